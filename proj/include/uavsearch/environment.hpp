#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/field.hpp"
#include "uavsearch/grid.hpp"
#include "uavsearch/rng.hpp"

namespace uavsearch {

enum class Action : int { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3, kLand = 4 };

std::string to_string(Action action);
Cell move(Cell from, Action action);

enum class DoneReason { kNone, kAllFound, kCrashed, kLanded, kCoverage, kStalled, kPlanComplete };

std::string to_string(DoneReason reason);
DoneReason parse_done_reason(const std::string& text);

struct StoppingCriterion {
  enum class Kind { kAllFound, kCoverage, kNoNewDetections, kLearnedLand };

  Kind kind = Kind::kAllFound;
  double fraction = 1.0;  ///< coverage threshold in (0, 1]
  int window = 50;        ///< steps without a new find
  int min_detected = 2;

  static StoppingCriterion all_found() { return {}; }
  static StoppingCriterion coverage(double f) { return {Kind::kCoverage, f}; }
  static StoppingCriterion no_new_detections(int window) {
    return {Kind::kNoNewDetections, 1.0, window};
  }
  static StoppingCriterion learned_land() { return {Kind::kLearnedLand}; }

  void validate() const;
  /// "all_found", "coverage:0.5", "stalled:50" or "learned_land".
  std::string to_string() const;
  static StoppingCriterion parse(const std::string& text);
};

struct Rewards {
  double detect = 1.0;
  double nfz = -1.0;
  double step = -0.5;
  double crash = -150.0;
};

struct EnvConfig {
  FieldConfig field{48, 100.0, 30.0, 3.0, 2.0, strong_covariances(), DistributionKind::kStrong};
  DetectionModel detection{0.0001, 0.05, 0.05};
  PriorModel prior{0.001, 0.20, 0.5, 12};
  int F = 11;
  int g_global = 3;
  double b_init = 75.0;
  double b_step = 0.2;
  Rewards rewards;
  StoppingCriterion stopping;
  bool land_action = false;

  void validate() const;
  int action_count() const { return land_action ? 5 : 4; }
  /// Side of the pooled global map, ceil((2M - 1) / g_global).
  int global_size() const { return (2 * field.M - 1 + g_global - 1) / g_global; }
  /// Number of steps until the battery is empty.
  long max_steps() const;
};

struct EnvState {
  Field field;
  GridMap prior_map;
  Cell drone;
  Cell start;
  std::vector<std::uint8_t> found;
  GridMap detected_memory;
  GridMap current_detection;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> coverage;
  long covered_cells = 0;
  long steps = 0;
  long boundary_hits = 0;
  long last_new_found_step = 0;
  long total_found = 0;
  long initial_found = 0;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;

  double coverage_fraction() const;
  double found_fraction() const;
};

/// Drone-centric network input: `local` is 3 x F x F and `global` 3 x G x G,
/// both flattened layer-major then row-major.
struct Observation {
  int F = 0;
  int G = 0;
  Eigen::VectorXd local;
  Eigen::VectorXd global;
  double budget = 0.0;
};

struct StepInfo {
  long newly_found = 0;
  bool hit_boundary = false;
  bool crashed = false;
  DoneReason reason = DoneReason::kNone;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Field layers of the local map around the drone.
Eigen::VectorXd encode_local(const EnvState& state, int F);
/// Padded, drone-centred, pooled global map.
Eigen::VectorXd encode_global(const EnvState& state, int g_global);
/// Remaining battery normalised by b_init, clamped to [0, 1].
double budget_scalar(const EnvState& state, const EnvConfig& cfg);
std::optional<DoneReason> check_stop(const EnvState& state, const StoppingCriterion& criterion);
Observation observe(const EnvState& state, const EnvConfig& cfg);

/// Replaces random field generation, e.g. for constructed scenarios.
using FieldSource = std::function<Field(RngStream&)>;

class Environment {
 public:
  explicit Environment(EnvConfig cfg, FieldSource source = {});

  Observation reset(std::uint64_t episode_seed);
  StepResult step(Action action);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  std::uint64_t episode_seed() const { return episode_seed_; }
  Observation observation() const { return observe(state_, cfg_); }

 private:
  long detect();

  EnvConfig cfg_;
  FieldSource source_;
  EnvState state_;
  std::uint64_t episode_seed_ = 0;
  RngStream detection_rng_{0, StreamId::kDetection};
};

}  // namespace uavsearch
