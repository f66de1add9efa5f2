#include "exposure/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "exposure/errors.hpp"

namespace exposure {

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

}  // namespace

json to_json(const SituationModel& model) {
  json ratings = json::array();
  for (const auto& [id, r] : model.ratings()) ratings.push_back({{"object", id}, {"rating", r}});
  json j = {{"situation", model.situation().code}, {"ratings", std::move(ratings)}};
  if (model.scale() == RatingScale::Focal) j["scale"] = "focal";
  return j;
}

SituationModel situation_model_from_json(const json& j) {
  const auto code = field<std::string>(j, "situation");
  const auto scale = j.contains("scale") && j.at("scale") == "focal" ? RatingScale::Focal
                                                                      : RatingScale::Likert;
  if (!j.contains("ratings") || !j.at("ratings").is_array()) {
    throw ValidationError("situation model needs a 'ratings' array");
  }
  std::vector<ObjectRating> ratings;
  for (const auto& r : j.at("ratings")) {
    ratings.push_back({field<std::string>(r, "object"), field<double>(r, "rating")});
  }
  return SituationModel(Situation::from_code(code), ratings, scale);
}

json to_json(const ProfileDetections& profile) {
  json photos = json::array();
  for (const auto& p : profile.photos) {
    json dets = json::array();
    for (const auto& d : p.detections) {
      json dj = {{"object", d.object_id}, {"confidence", d.confidence}};
      if (d.bbox) dj["bbox"] = {d.bbox->x, d.bbox->y, d.bbox->width, d.bbox->height};
      dets.push_back(std::move(dj));
    }
    photos.push_back({{"photo_id", p.photo_id}, {"detections", std::move(dets)}});
  }
  return {{"user_id", profile.user_id}, {"photos", std::move(photos)}};
}

ProfileDetections profile_from_json(const json& j) {
  ProfileDetections profile;
  profile.user_id = field<std::string>(j, "user_id");
  if (!j.contains("photos") || !j.at("photos").is_array()) {
    throw ValidationError("profile needs a 'photos' array");
  }
  for (const auto& pj : j.at("photos")) {
    PhotoDetections photo;
    photo.photo_id = field<std::string>(pj, "photo_id");
    if (pj.contains("detections")) {
      if (!pj.at("detections").is_array()) throw ValidationError("'detections' must be an array");
      for (const auto& dj : pj.at("detections")) {
        DetectionRecord d;
        d.object_id = field<std::string>(dj, "object");
        d.confidence = field<double>(dj, "confidence");
        if (dj.contains("bbox") && !dj.at("bbox").is_null()) {
          const auto b = field<std::vector<double>>(dj, "bbox");
          if (b.size() != 4) throw ValidationError("bbox needs 4 numbers");
          d.bbox = BoundingBox{b[0], b[1], b[2], b[3]};
        }
        photo.detections.push_back(std::move(d));
      }
    }
    profile.photos.push_back(std::move(photo));
  }
  validate(profile);
  return profile;
}

json to_json(const ThresholdTable& table) {
  json objects = json::array();
  for (const auto& [id, t] : table.objects) {
    json o = {{"object", id}, {"eta", t.eta}, {"tau", t.tau}, {"support", t.support}};
    if (t.degenerate) o["degenerate"] = true;
    objects.push_back(std::move(o));
  }
  return {{"situation", table.situation},
          {"objects", std::move(objects)},
          {"tau_threshold", table.tau_threshold},
          {"default_eta", table.default_eta}};
}

ThresholdTable threshold_table_from_json(const json& j) {
  ThresholdTable table;
  table.situation = field<std::string>(j, "situation");
  table.tau_threshold = j.contains("tau_threshold") ? field<double>(j, "tau_threshold") : -1.0;
  table.default_eta = j.contains("default_eta") ? field<double>(j, "default_eta") : 0.5;
  for (const auto& o : j.at("objects")) {
    ObjectThreshold t;
    t.eta = field<double>(o, "eta");
    t.tau = field<double>(o, "tau");
    t.support = field<std::size_t>(o, "support");
    t.degenerate = o.contains("degenerate") && o.at("degenerate").get<bool>();
    if (t.eta < 0.01 - 1e-12 || t.eta > 1.0) throw ValidationError("eta outside [0.01, 1]");
    if (t.tau < -1.0 || t.tau > 1.0) throw ValidationError("tau outside [-1, 1]");
    table.objects[field<std::string>(o, "object")] = t;
  }
  return table;
}

json to_json(const ClusterModel& clusters) {
  return {{"k", clusters.k}, {"seed", clusters.seed}, {"centroids", clusters.centroids}};
}

ClusterModel cluster_model_from_json(const json& j) {
  ClusterModel c;
  c.k = field<int>(j, "k");
  c.seed = field<std::uint64_t>(j, "seed");
  c.centroids = field<std::vector<std::array<double, 3>>>(j, "centroids");
  if (c.centroids.size() != static_cast<std::size_t>(c.k)) {
    throw ValidationError("cluster model centroid count differs from k");
  }
  return c;
}

json to_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth ? json(*c.max_depth) : json(nullptr)},
          {"min_samples_leaf", c.min_samples_leaf},
          {"bootstrap", c.bootstrap},
          {"feature_fraction", c.feature_fraction},
          {"seed", c.seed}};
}

ForestConfig forest_config_from_json(const json& j) {
  ForestConfig c;
  c.n_trees = field<int>(j, "n_trees");
  if (j.contains("max_depth") && !j.at("max_depth").is_null()) c.max_depth = field<int>(j, "max_depth");
  c.min_samples_leaf = field<int>(j, "min_samples_leaf");
  c.bootstrap = field<bool>(j, "bootstrap");
  c.feature_fraction = field<double>(j, "feature_fraction");
  c.seed = j.contains("seed") ? field<std::uint64_t>(j, "seed") : 0;
  c.validate();
  return c;
}

std::vector<ManualProfileRating> read_manual_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manual ratings CSV is empty");
  if (trim(line) != "user_id,situation,rater_id,rating") {
    throw ValidationError("manual ratings CSV header must be user_id,situation,rater_id,rating");
  }
  std::map<std::pair<std::string, std::string>, ManualProfileRating> grouped;
  std::vector<std::pair<std::string, std::string>> order;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) {
      throw ValidationError("manual ratings CSV line " + std::to_string(line_no) + ": expected 4 fields");
    }
    int rating = 0;
    try {
      std::size_t used = 0;
      rating = std::stoi(cells[3], &used);
      if (used != cells[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("manual ratings CSV line " + std::to_string(line_no) + ": bad rating");
    }
    const std::pair<std::string, std::string> key{cells[0], cells[1]};
    auto [it, inserted] = grouped.try_emplace(key, ManualProfileRating{cells[0], cells[1], {}});
    if (inserted) order.push_back(key);
    it->second.rater_ratings.push_back(rating);
  }
  std::vector<ManualProfileRating> out;
  for (const auto& key : order) {
    grouped.at(key).validate();
    out.push_back(grouped.at(key));
  }
  return out;
}

void write_manual_csv(std::ostream& out, const RatedProfileDataset& dataset) {
  out << "user_id,situation,rater_id,rating\n";
  for (const auto& [key, m] : dataset.manual) {
    for (std::size_t r = 0; r < m.rater_ratings.size(); ++r) {
      out << m.user_id << ',' << m.situation << ",r" << (r + 1) << ',' << m.rater_ratings[r] << '\n';
    }
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

RatedProfileDataset load_dataset(const std::filesystem::path& dir) {
  RatedProfileDataset dataset;
  const auto profiles = read_json(dir / "profiles.json");
  if (!profiles.is_array()) throw ValidationError("profiles.json must hold an array");
  for (const auto& p : profiles) dataset.profiles.push_back(profile_from_json(p));

  std::istringstream manual(read_text(dir / "manual_ratings.csv"));
  for (auto& m : read_manual_csv(manual)) {
    const std::pair<std::string, std::string> key{m.user_id, m.situation};
    dataset.manual.emplace(key, std::move(m));
  }

  std::istringstream split(read_text(dir / "split.csv"));
  std::string line;
  std::getline(split, line);
  if (trim(line) != "user_id,split") throw ValidationError("split.csv header must be user_id,split");
  while (std::getline(split, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2) throw ValidationError("split.csv: expected 2 fields");
    if (!dataset.split.emplace(cells[0], parse_split(cells[1])).second) {
      throw ValidationError("split.csv lists " + cells[0] + " twice");
    }
  }
  dataset.validate();
  return dataset;
}

void save_dataset(const std::filesystem::path& dir, const RatedProfileDataset& dataset) {
  json profiles = json::array();
  for (const auto& p : dataset.profiles) profiles.push_back(to_json(p));
  write_text_atomic(dir / "profiles.json", profiles.dump() + "\n");
  std::ostringstream manual;
  write_manual_csv(manual, dataset);
  write_text_atomic(dir / "manual_ratings.csv", manual.str());
  std::ostringstream split;
  split << "user_id,split\n";
  for (const auto& p : dataset.profiles) {
    split << p.user_id << ',' << to_string(dataset.split.at(p.user_id)) << '\n';
  }
  write_text_atomic(dir / "split.csv", split.str());
}

std::map<std::string, SituationModel> load_situation_models(const std::filesystem::path& dir) {
  std::map<std::string, SituationModel> out;
  const auto sub = dir / "situations";
  if (!std::filesystem::is_directory(sub)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(sub)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto model = situation_model_from_json(read_json(f));
    const auto code = model.situation().code;
    out.emplace(code, std::move(model));
  }
  return out;
}

void save_situation_models(const std::filesystem::path& dir,
                           const std::map<std::string, SituationModel>& models) {
  for (const auto& [code, model] : models) {
    write_text_atomic(dir / "situations" / (code + ".json"), dump(to_json(model)));
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << value;
  return ss.str();
}

std::string dataset_hash(const RatedProfileDataset& dataset) {
  json profiles = json::array();
  for (const auto& p : dataset.profiles) profiles.push_back(to_json(p));
  std::ostringstream manual;
  write_manual_csv(manual, dataset);
  std::string split;
  for (const auto& [user, s] : dataset.split) split += user + ":" + std::string(to_string(s)) + ";";
  return hex64(fnv1a64(profiles.dump() + "\n" + manual.str() + "\n" + split));
}

}  // namespace exposure
