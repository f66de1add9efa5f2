#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace exposure {

inline constexpr double kLikertMin = -3.0;
inline constexpr double kLikertMax = 3.0;

/// A real-life decision context in which photos are interpreted. The four
/// built-in codes are ACC, BANK, IT and WAIT; other codes are accepted for
/// synthetic experiments.
struct Situation {
  std::string code;
  std::string display_name;

  static Situation from_code(std::string_view code);
  static const std::vector<Situation>& builtins();
  bool is_builtin() const;

  friend bool operator==(const Situation& a, const Situation& b) { return a.code == b.code; }
  friend bool operator<(const Situation& a, const Situation& b) { return a.code < b.code; }
};

struct ObjectRating {
  std::string object_id;
  double rating = 0.0;
};

// Likert tables come from raters; Focal tables are the boosted output of
// apply_focal and may leave [-3, 3].
enum class RatingScale { Likert, Focal };

/// Per-situation table of object impact ratings.
class SituationModel {
 public:
  SituationModel(Situation situation, const std::vector<ObjectRating>& ratings,
                 RatingScale scale = RatingScale::Likert);

  const Situation& situation() const { return situation_; }
  RatingScale scale() const { return scale_; }
  const std::map<std::string, double>& ratings() const { return ratings_; }
  std::size_t size() const { return ratings_.size(); }

  bool contains(const std::string& object_id) const { return ratings_.count(object_id) != 0; }
  std::optional<double> rating(const std::string& object_id) const;
  // Unrated objects are neutral.
  double rating_or_zero(const std::string& object_id) const;

  std::vector<ObjectRating> to_list() const;

  friend bool operator==(const SituationModel& a, const SituationModel& b) {
    return a.situation_ == b.situation_ && a.scale_ == b.scale_ && a.ratings_ == b.ratings_;
  }

 private:
  Situation situation_;
  std::map<std::string, double> ratings_;
  RatingScale scale_;
};

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double width = 0.0;
  double height = 0.0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct DetectionRecord {
  std::string object_id;
  double confidence = 0.0;
  std::optional<BoundingBox> bbox;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct PhotoDetections {
  std::string photo_id;
  std::vector<DetectionRecord> detections;

  friend bool operator==(const PhotoDetections&, const PhotoDetections&) = default;
};

struct ProfileDetections {
  std::string user_id;
  std::vector<PhotoDetections> photos;

  friend bool operator==(const ProfileDetections&, const ProfileDetections&) = default;
};

void validate(const DetectionRecord& detection);
// Checks detections and photo_id uniqueness.
void validate(const ProfileDetections& profile);
// Strict mode: every detected object must be rated in `model`.
void require_known_objects(const ProfileDetections& profile, const SituationModel& model);

struct ManualProfileRating {
  std::string user_id;
  std::string situation;
  std::vector<int> rater_ratings;

  // Arithmetic mean of the rater ratings.
  double aggregate() const;
  void validate() const;
};

enum class Split { Train, Validation };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// Profiles with manual ratings and a train/validation assignment.
struct RatedProfileDataset {
  std::vector<ProfileDetections> profiles;
  std::map<std::pair<std::string, std::string>, ManualProfileRating> manual;  // (user_id, situation)
  std::map<std::string, Split> split;

  void validate() const;
  const ProfileDetections* find(const std::string& user_id) const;
  std::optional<double> manual_rating(const std::string& user_id, const std::string& situation) const;
  std::vector<std::string> situations() const;
};

/// Profiles of one split that carry a manual rating for a situation, in
/// dataset order, paired with their aggregate manual rating.
struct RatedSample {
  std::vector<const ProfileDetections*> profiles;
  std::vector<double> manual;

  std::size_t size() const { return profiles.size(); }
};

RatedSample rated_sample(const RatedProfileDataset& dataset, const std::string& situation,
                         std::optional<Split> split);

/// Attention-style boost of an object rating: r / (1 - |r|/k)^gamma.
/// Throws std::domain_error unless k > |r| and gamma >= 0.
double focal_rating(double rating, double k_param, int gamma);

SituationModel apply_focal(const SituationModel& model, double k_param, int gamma);

struct TableStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// Population statistics over all ratings of the table.
TableStats rating_table_stats(const SituationModel& model);

}  // namespace exposure
