#include <doctest.h>

#include <httplib.h>

#include <cmath>

#include "exposure/errors.hpp"
#include "exposure/service.hpp"
#include "../service_support.hpp"

using namespace exposure;
using nlohmann::json;

namespace {

Service make_service() {
  auto models = support::shipped_baselines();
  auto reference = build_reference_community(models, 200, 5, 20);
  return Service(std::move(models), std::move(reference));
}

std::string created_id(Service& svc) {
  const auto r = svc.create_profile(support::fixture_profile_text());
  REQUIRE(r.status == 201);
  return r.body["profile_id"];
}

}  // namespace

TEST_CASE("bands") {
  CHECK(band_for(-1.5) == Band::Red);
  CHECK(band_for(-1.0) == Band::Orange);
  CHECK(band_for(-0.25) == Band::Yellow);
  CHECK(band_for(0.25) == Band::Yellow);
  CHECK(band_for(0.26) == Band::LightGreen);
  CHECK(band_for(1.0) == Band::LightGreen);
  CHECK(band_for(1.01) == Band::Green);
  CHECK(to_string(Band::LightGreen) == "light-green");
}

TEST_CASE("reference community percentiles") {
  ReferenceCommunity ref;
  ReferenceCommunity::Entry e;
  for (int i = 0; i < 100; ++i) e.ratings.push_back(-3.0 + 0.06 * i);
  ref.situations["ACC"] = e;
  CHECK_NOTHROW(ref.validate());
  CHECK(*ref.percentile("ACC", -10) == 0.0);
  CHECK(*ref.percentile("ACC", 10) == 1.0);
  CHECK(*ref.percentile("ACC", e.ratings[49]) == 0.5);
  CHECK_FALSE(ref.percentile("IT", 0).has_value());
  double last = -1;
  for (double r = -3.5; r <= 3.5; r += 0.01) {
    const double p = *ref.percentile("ACC", r);
    CHECK(p >= last);
    last = p;
  }
  const auto back = ReferenceCommunity::from_json(ref.to_json());
  CHECK(back.situations.at("ACC").ratings == e.ratings);
  ref.situations["ACC"].ratings.pop_back();
  CHECK_THROWS_AS(ref.validate(), ValidationError);
}

TEST_CASE("reference construction is seeded") {
  const auto models = support::shipped_baselines();
  const auto a = build_reference_community(models, 150, 9, 10);
  const auto b = build_reference_community(models, 150, 9, 10);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.situations.size() == 4);
  for (const auto& [code, e] : a.situations) CHECK(std::is_sorted(e.ratings.begin(), e.ratings.end()));
  CHECK_THROWS_AS(build_reference_community(models, 50, 9, 10), DegenerateError);
}

TEST_CASE("service rating of the fixture profile") {
  auto svc = make_service();
  const auto id = created_id(svc);
  const auto r = svc.rating(id, "ACC", std::nullopt);
  REQUIRE(r.status == 200);
  CHECK(std::fabs(r.body["rating"].get<double>() - (-0.5825)) < 1e-9);
  CHECK(r.body["band"] == "orange");
  CHECK(r.body["method"] == "BASE_ETA");
  CHECK(r.body["photos_rated"] == 2);
  CHECK(r.body["photos_total"] == 3);
  CHECK(r.body["percentile"].is_number());

  CHECK(svc.rating("nope", "ACC", std::nullopt).status == 404);
  CHECK(svc.rating(id, "MOON", std::nullopt).status == 409);
  CHECK(svc.rating(id, "ACC", std::string("LERVUP")).status == 409);
  CHECK(svc.rating(id, "ACC", std::string("bogus")).status == 400);
  CHECK(svc.rating(id, "", std::nullopt).status == 400);
}

TEST_CASE("service profile validation") {
  auto svc = make_service();
  CHECK(svc.create_profile("{not json").status == 400);
  CHECK(svc.create_profile(R"({"user_id":"u","photos":[{"photo_id":"a"},{"photo_id":"a"}]})").status == 400);
  const auto a = svc.create_profile(R"({"user_id":"u","photos":[]})");
  const auto b = svc.create_profile(R"({"user_id":"u","photos":[]})");
  CHECK(a.body["profile_id"] != b.body["profile_id"]);
  const auto empty = svc.rating(a.body["profile_id"], "ACC", std::nullopt);
  CHECK(empty.status == 200);
  CHECK(empty.body["rating"].is_null());
  CHECK(empty.body["coverage"] == 0);
}

TEST_CASE("photo impacts") {
  auto svc = make_service();
  const auto id = created_id(svc);
  const auto r = svc.photos(id, "ACC", std::nullopt);
  REQUIRE(r.status == 200);
  const auto& photos = r.body["photos"];
  REQUIRE(photos.size() == 3);
  CHECK(photos[0]["photo_id"] == "photo2");
  CHECK(photos[1]["photo_id"] == "photo1");
  CHECK(photos[2]["no_signal"] == true);
  CHECK(std::fabs(photos[0]["contribution"].get<double>() - (-2.84 * 0.8)) < 1e-12);
  CHECK(photos[1]["boxes"][0]["bbox"].size() == 4);
}

TEST_CASE("what-if is pure and matches a re-upload") {
  auto svc = make_service();
  const auto id = created_id(svc);
  const std::string body = R"({"masked_photo_ids":["photo2"]})";
  const auto first = svc.whatif(id, body, std::nullopt);
  const auto second = svc.whatif(id, body, std::nullopt);
  REQUIRE(first.status == 200);
  CHECK(first.body.dump() == second.body.dump());
  CHECK(svc.get_profile(id).body["profile"] == json::parse(support::fixture_profile_text()));

  auto reduced = json::parse(support::fixture_profile_text());
  reduced["photos"].erase(1);
  const auto other = svc.create_profile(reduced.dump());
  for (const auto& s : first.body["situations"]) {
    const auto direct = svc.rating(other.body["profile_id"], s["situation"], std::nullopt);
    CHECK(s["rating"] == direct.body["rating"]);
  }
  for (const auto& s : first.body["situations"]) {
    if (s["situation"] == "ACC") {
      CHECK(std::fabs(s["rating"].get<double>() - 1.107) < 1e-12);
      CHECK(s["delta"].get<double>() > 0);
    }
  }
  CHECK(svc.whatif(id, R"({"masked_photo_ids":["ghost"]})", std::nullopt).status == 400);
  CHECK(svc.whatif(id, "[", std::nullopt).status == 400);
  CHECK(svc.whatif("nope", body, std::nullopt).status == 404);
}

TEST_CASE("situations and models listings") {
  auto svc = make_service();
  const auto s = svc.situations().body["situations"];
  CHECK(s.size() == 4);
  CHECK(s[0]["code"] == "ACC");
  CHECK(s[0]["has_reference"] == true);
  const auto m = svc.models().body["models"];
  CHECK(m.size() == 4);
  CHECK(svc.models_hash().size() == 16);
}

TEST_CASE("model artifacts load from a directory") {
  const auto dir = std::filesystem::temp_directory_path() / ("exposure_models_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const auto& m : support::shipped_baselines()) {
    write_text_atomic(dir / (m.situation() + "_BASE_ETA.json"), dump(m.to_json()));
  }
  write_text_atomic(dir / "notes.json", "{\"hello\": 1}\n");
  const auto loaded = load_models(dir);
  CHECK(loaded.size() == 4);
  CHECK(default_model(loaded, "IT")->method == Method::BaseEta);
  CHECK(default_model(loaded, "MOON") == nullptr);
  write_text_atomic(dir / "dup.json", dump(loaded[0].to_json()));
  CHECK_THROWS_AS(load_models(dir), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("http front end") {
  auto svc = make_service();
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("X-Models-Hash") == svc.models_hash());
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto created = client.Post("/profiles", support::fixture_profile_text(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["profile_id"];

  auto got = client.Get("/profiles/" + id);
  REQUIRE(got);
  const auto etag = got->get_header_value("ETag");
  CHECK(!etag.empty());
  auto cached = client.Get("/profiles/" + id, {{"If-None-Match", etag}});
  REQUIRE(cached);
  CHECK(cached->status == 304);

  auto rating = client.Get("/profiles/" + id + "/rating?situation=ACC");
  REQUIRE(rating);
  CHECK(rating->status == 200);
  CHECK(json::parse(rating->body) == svc.rating(id, "ACC", std::nullopt).body);

  auto photos = client.Get("/profiles/" + id + "/photos?situation=BANK");
  REQUIRE(photos);
  CHECK(photos->status == 200);

  auto whatif = client.Post("/profiles/" + id + "/whatif", R"({"masked_photo_ids":["photo1"]})", "application/json");
  REQUIRE(whatif);
  CHECK(whatif->status == 200);

  auto missing = client.Get("/profiles/zzz/rating?situation=ACC");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"] == "not_found");
  auto unrouted = client.Get("/nowhere");
  REQUIRE(unrouted);
  CHECK(unrouted->status == 404);
  CHECK(json::parse(unrouted->body)["error"] == "not_found");

  auto options = client.Options("/profiles");
  REQUIRE(options);
  CHECK(options->status == 204);
  server.stop();
}
