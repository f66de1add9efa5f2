#include "exposure/parallel.hpp"

#include <atomic>
#include <thread>

namespace exposure {

namespace {
std::atomic<unsigned> g_default_jobs{0};
}

void set_default_jobs(unsigned jobs) { g_default_jobs = jobs; }

unsigned default_jobs() {
  if (unsigned j = g_default_jobs.load()) return j;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace exposure
