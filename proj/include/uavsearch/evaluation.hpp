#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/environment.hpp"
#include "uavsearch/policy.hpp"

namespace uavsearch {

struct StepRecord {
  long step = 0;
  Cell pos;
  Action action = Action::kNorth;
  double reward = 0.0;
  long newly_found = 0;
  long cumulative_found = 0;
  double budget = 0.0;
  bool hit_boundary = false;
  DoneReason done_reason = DoneReason::kNone;
  std::vector<double> q_values;  ///< empty unless the policy exposes action values
};

struct EpisodeLog {
  std::string fingerprint;
  std::uint64_t seed = 0;
  int M = 0;
  int F = 0;
  Cell start;
  std::vector<Weed> weeds;
  std::vector<long> found_step;  ///< step at which each weed was found, -1 if never
  long initial_found = 0;
  std::vector<StepRecord> steps;

  long path_length = 0;  ///< movement actions (land excluded)
  double found_fraction = 0.0;
  double reward_sum = 0.0;
  long boundary_hits = 0;
  DoneReason done_reason = DoneReason::kNone;

  std::size_t n_weeds() const { return weeds.size(); }
};

/// Stable fingerprint of everything in the environment config that affects episodes.
std::string config_fingerprint(const EnvConfig& cfg);
/// Fingerprint of the field generator settings only (M and weed distribution).
std::string field_fingerprint(const EnvConfig& cfg);

/// Resets `env` with `seed` and steps it with `policy` until the episode ends
/// (environment termination or the policy running out of actions).
EpisodeLog run_episode(Environment& env, Policy& policy, std::uint64_t seed);

/// Found fraction after min(t, episode length) steps; later steps hold the
/// final value. A field without weeds counts as fully found.
double found_fraction_at(const EpisodeLog& log, long t);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample (n - 1) standard deviation, 0 for n < 2
};

MeanStd mean_std(std::span<const double> values);

struct EvalSummary {
  std::string label;
  std::string fingerprint;
  std::string family;  ///< field_fingerprint of the runs, if known
  long n_episodes = 0;
  std::vector<long> checkpoints;
  std::vector<MeanStd> found_at;  ///< one per checkpoint
  MeanStd path_length;
  MeanStd terminal_found;
  MeanStd reward;
  std::vector<double> curve;  ///< mean found fraction per step index
};

/// Throws std::invalid_argument for an empty set or mixed fingerprints.
EvalSummary aggregate(std::span<const EpisodeLog> logs, std::vector<long> checkpoints = {100, 200, 300},
                      std::string label = "");

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_two_sided = 1.0;
  bool degenerate = false;  ///< zero combined variance or too few samples; t/dof/p are NaN
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);
/// Same test from summary statistics (sample standard deviations).
WelchResult welch_t_test(MeanStd a, long n_a, MeanStd b, long n_b);

/// Spearman rank correlation with average ranks for ties; NaN if either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct ComparisonRow {
  std::string method;
  std::vector<MeanStd> found_at;
  std::vector<bool> found_star;  ///< significantly higher than the baseline
  MeanStd terminal_found;
  MeanStd path_length;
  bool path_star = false;  ///< significantly shorter than the baseline
};

struct ComparisonTable {
  std::vector<long> checkpoints;
  double alpha = 0.001;
  std::vector<ComparisonRow> rows;  ///< baseline first
};

/// Stars mark Welch tests with p < alpha in the favourable direction.
/// Throws std::invalid_argument if the checkpoints differ.
ComparisonTable compare(const EvalSummary& policy, const EvalSummary& baseline, double alpha = 0.001);
ComparisonTable compare(std::span<const EpisodeLog> policy_logs, std::span<const EpisodeLog> baseline_logs,
                        std::vector<long> checkpoints = {100, 200, 300}, double alpha = 0.001);

void write_table_text(std::ostream& os, const ComparisonTable& table);
void write_table_tsv(std::ostream& os, const ComparisonTable& table);

/// Line-delimited JSON: a header record, one record per step, a footer.
void write_episode_log(std::ostream& os, const EpisodeLog& log);
EpisodeLog read_episode_log(std::istream& is);
/// Reads every episode from a file holding several concatenated logs.
std::vector<EpisodeLog> read_episode_logs(std::istream& is);

void write_summary_json(std::ostream& os, const EvalSummary& summary);
EvalSummary read_summary_json(std::istream& is);
void write_summary_tsv(std::ostream& os, const EvalSummary& summary);
/// Two columns: step index, mean found fraction.
void write_curve(std::ostream& os, const EvalSummary& summary);

}  // namespace uavsearch
