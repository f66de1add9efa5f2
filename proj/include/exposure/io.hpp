#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exposure/calibration.hpp"
#include "exposure/core.hpp"
#include "exposure/descriptors.hpp"
#include "exposure/forest.hpp"

namespace exposure {

using nlohmann::json;

json to_json(const SituationModel& model);
SituationModel situation_model_from_json(const json& j);

json to_json(const ProfileDetections& profile);
ProfileDetections profile_from_json(const json& j);

json to_json(const ThresholdTable& table);
ThresholdTable threshold_table_from_json(const json& j);

json to_json(const ClusterModel& clusters);
ClusterModel cluster_model_from_json(const json& j);

json to_json(const ForestConfig& config);
ForestConfig forest_config_from_json(const json& j);

// user_id,situation,rater_id,rating with a header row.
std::vector<ManualProfileRating> read_manual_csv(std::istream& in);
void write_manual_csv(std::ostream& out, const RatedProfileDataset& dataset);

/// Dataset directory: profiles.json, manual_ratings.csv, split.csv.
RatedProfileDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const RatedProfileDataset& dataset);

// Situation tables stored as situations/<CODE>.json under `dir`.
std::map<std::string, SituationModel> load_situation_models(const std::filesystem::path& dir);
void save_situation_models(const std::filesystem::path& dir,
                           const std::map<std::string, SituationModel>& models);

std::string read_text(const std::filesystem::path& path);
json read_json(const std::filesystem::path& path);
// Write to a sibling temporary file and rename into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::string dump(const json& j);  // 2-space indented, trailing newline

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);
// Hash of the canonical serialization of profiles, ratings and split.
std::string dataset_hash(const RatedProfileDataset& dataset);

}  // namespace exposure
