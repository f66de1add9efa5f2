#include "exposure/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "exposure/errors.hpp"

namespace exposure {

const std::vector<Situation>& Situation::builtins() {
  static const std::vector<Situation> kBuiltins = {
      {"ACC", "Accommodation search"},
      {"BANK", "Bank credit"},
      {"IT", "IT job"},
      {"WAIT", "Waiter job"},
  };
  return kBuiltins;
}

Situation Situation::from_code(std::string_view code) {
  if (code.empty()) throw ValidationError("situation code is empty");
  for (const auto& s : builtins()) {
    if (s.code == code) return s;
  }
  return Situation{std::string(code), std::string(code)};
}

bool Situation::is_builtin() const {
  const auto& all = builtins();
  return std::any_of(all.begin(), all.end(), [&](const Situation& s) { return s.code == code; });
}

SituationModel::SituationModel(Situation situation, const std::vector<ObjectRating>& ratings,
                               RatingScale scale)
    : situation_(std::move(situation)), scale_(scale) {
  if (ratings.empty()) {
    throw ValidationError("situation model " + situation_.code + " has no objects");
  }
  for (const auto& r : ratings) {
    if (r.object_id.empty()) throw ValidationError("empty object id in situation model");
    if (!std::isfinite(r.rating)) {
      throw ValidationError("non-finite rating for object " + r.object_id);
    }
    if (scale_ == RatingScale::Likert && (r.rating < kLikertMin || r.rating > kLikertMax)) {
      throw ValidationError("rating of " + r.object_id + " outside [-3, 3]");
    }
    if (!ratings_.emplace(r.object_id, r.rating).second) {
      throw ValidationError("duplicate object id " + r.object_id);
    }
  }
}

std::optional<double> SituationModel::rating(const std::string& object_id) const {
  auto it = ratings_.find(object_id);
  if (it == ratings_.end()) return std::nullopt;
  return it->second;
}

double SituationModel::rating_or_zero(const std::string& object_id) const {
  return rating(object_id).value_or(0.0);
}

std::vector<ObjectRating> SituationModel::to_list() const {
  std::vector<ObjectRating> out;
  out.reserve(ratings_.size());
  for (const auto& [id, r] : ratings_) out.push_back({id, r});
  return out;
}

void validate(const DetectionRecord& d) {
  if (d.object_id.empty()) throw ValidationError("detection without object id");
  if (!(d.confidence > 0.0 && d.confidence <= 1.0)) {
    throw ValidationError("confidence of " + d.object_id + " outside (0, 1]");
  }
  if (d.bbox) {
    const auto& b = *d.bbox;
    const bool inside = b.x >= 0.0 && b.y >= 0.0 && b.width >= 0.0 && b.height >= 0.0 &&
                        b.x + b.width <= 1.0 + 1e-9 && b.y + b.height <= 1.0 + 1e-9;
    if (!inside) throw ValidationError("bbox of " + d.object_id + " leaves the unit square");
  }
}

void validate(const ProfileDetections& profile) {
  if (profile.user_id.empty()) throw ValidationError("profile without user id");
  std::set<std::string> seen;
  for (const auto& photo : profile.photos) {
    if (photo.photo_id.empty()) throw ValidationError("photo without id in " + profile.user_id);
    if (!seen.insert(photo.photo_id).second) {
      throw ValidationError("duplicate photo id " + photo.photo_id + " in " + profile.user_id);
    }
    for (const auto& d : photo.detections) validate(d);
  }
}

void require_known_objects(const ProfileDetections& profile, const SituationModel& model) {
  for (const auto& photo : profile.photos) {
    for (const auto& d : photo.detections) {
      if (!model.contains(d.object_id)) {
        throw ValidationError("object " + d.object_id + " is not rated in situation " +
                              model.situation().code);
      }
    }
  }
}

double ManualProfileRating::aggregate() const {
  validate();
  double sum = 0.0;
  for (int r : rater_ratings) sum += r;
  return sum / static_cast<double>(rater_ratings.size());
}

void ManualProfileRating::validate() const {
  if (rater_ratings.empty()) {
    throw ValidationError("manual rating of " + user_id + " has no rater ratings");
  }
  for (int r : rater_ratings) {
    if (r < -3 || r > 3) throw ValidationError("rater rating outside [-3, 3] for " + user_id);
  }
}

std::string_view to_string(Split split) {
  return split == Split::Train ? "TRAIN" : "VALIDATION";
}

Split parse_split(std::string_view text) {
  if (text == "TRAIN" || text == "train") return Split::Train;
  if (text == "VALIDATION" || text == "validation") return Split::Validation;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

void RatedProfileDataset::validate() const {
  std::set<std::string> users;
  for (const auto& p : profiles) {
    exposure::validate(p);
    if (!users.insert(p.user_id).second) throw ValidationError("duplicate user id " + p.user_id);
  }
  for (const auto& [key, rating] : manual) {
    if (!users.count(key.first)) {
      throw ValidationError("manual rating references unknown profile " + key.first);
    }
    if (rating.user_id != key.first || rating.situation != key.second) {
      throw ValidationError("manual rating key mismatch for " + key.first);
    }
    rating.validate();
  }
  if (split.size() != users.size()) {
    throw ValidationError("split does not cover every profile exactly once");
  }
  for (const auto& [user, s] : split) {
    if (!users.count(user)) throw ValidationError("split references unknown profile " + user);
  }
}

const ProfileDetections* RatedProfileDataset::find(const std::string& user_id) const {
  for (const auto& p : profiles) {
    if (p.user_id == user_id) return &p;
  }
  return nullptr;
}

std::optional<double> RatedProfileDataset::manual_rating(const std::string& user_id,
                                                         const std::string& situation) const {
  auto it = manual.find({user_id, situation});
  if (it == manual.end()) return std::nullopt;
  return it->second.aggregate();
}

std::vector<std::string> RatedProfileDataset::situations() const {
  std::set<std::string> codes;
  for (const auto& [key, r] : manual) codes.insert(key.second);
  return {codes.begin(), codes.end()};
}

RatedSample rated_sample(const RatedProfileDataset& dataset, const std::string& situation,
                         std::optional<Split> split) {
  RatedSample sample;
  for (const auto& p : dataset.profiles) {
    if (split) {
      auto it = dataset.split.find(p.user_id);
      if (it == dataset.split.end() || it->second != *split) continue;
    }
    auto m = dataset.manual_rating(p.user_id, situation);
    if (!m) continue;
    sample.profiles.push_back(&p);
    sample.manual.push_back(*m);
  }
  return sample;
}

double focal_rating(double rating, double k_param, int gamma) {
  if (gamma < 0) throw std::domain_error("focal gamma must be non-negative");
  if (!(k_param > std::abs(rating))) {
    throw std::domain_error("focal k must exceed the absolute rating");
  }
  if (gamma == 0) return rating;
  const double base = 1.0 - std::abs(rating) / k_param;
  return rating / std::pow(base, gamma);
}

SituationModel apply_focal(const SituationModel& model, double k_param, int gamma) {
  if (gamma == 0) return model;
  std::vector<ObjectRating> boosted;
  boosted.reserve(model.size());
  for (const auto& [id, r] : model.ratings()) {
    boosted.push_back({id, focal_rating(r, k_param, gamma)});
  }
  return SituationModel(model.situation(), boosted, RatingScale::Focal);
}

TableStats rating_table_stats(const SituationModel& model) {
  const auto& ratings = model.ratings();
  if (ratings.empty()) throw DegenerateError("rating table is empty");
  double sum = 0.0;
  for (const auto& [id, r] : ratings) sum += r;
  const double n = static_cast<double>(ratings.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (const auto& [id, r] : ratings) ss += (r - mean) * (r - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace exposure
