#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "uavsearch/config.hpp"
#include "uavsearch/dqn.hpp"
#include "uavsearch/evaluation.hpp"

namespace uavsearch {

namespace fs = std::filesystem;

/// What a command needs to be rerun: its name, resolved config and inputs.
struct Manifest {
  std::string command;
  ExperimentConfig config;
  std::vector<std::pair<std::string, std::string>> inputs;
};

/// Writes <dir>/manifest.json; `results` are reported numbers (not read back).
void write_manifest(const fs::path& dir, const Manifest& manifest, double wall_seconds,
                    const std::vector<std::pair<std::string, double>>& results = {});
Manifest read_manifest(const fs::path& path);

/// Config from either a key-value file or a manifest.json.
void apply_config_source(ExperimentConfig& cfg, const std::string& path);

/// Seeds of the evaluation episodes; the same for every policy under one master seed.
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t seed, int n);

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Runs one episode per seed; logs come back in seed order whatever the thread count.
std::vector<EpisodeLog> evaluate_policy(const EnvConfig& env, const PolicyFactory& make_policy,
                                        const std::vector<std::uint64_t>& seeds, bool single_threaded);

struct TrainRun {
  TrainResult result;
  fs::path checkpoint;
};

/// Trains, then writes checkpoint.qnet (best validated parameters), history.tsv and manifest.json.
TrainRun cmd_train(const ExperimentConfig& cfg);

struct EvalRun {
  EvalSummary summary;
  std::vector<EpisodeLog> logs;
};

/// Greedy evaluation of eval.checkpoint, or a random walk when eval.policy is "random".
/// Writes summary.json, summary.tsv, curve.tsv, episodes.jsonl and manifest.json.
EvalRun cmd_evaluate(const ExperimentConfig& cfg);
/// Row-by-row plan through the same environment and outputs as cmd_evaluate.
EvalRun cmd_baseline(const ExperimentConfig& cfg);

/// Side-by-side table of two summaries (b is the baseline); writes report.txt and report.tsv.
ComparisonTable cmd_compare(const fs::path& summary_a, const fs::path& summary_b, double alpha, const fs::path& out);

/// Renders episode `index` of a JSON-lines log file to <out>/render.svg.
void cmd_render(const fs::path& episode_log, std::size_t index, const fs::path& out);

/// Draws one field with the configured generator and writes <out>/field.txt.
Field cmd_generate_field(const ExperimentConfig& cfg);

/// Reruns the command recorded in a manifest into `out`.
void rerun(const fs::path& manifest, const fs::path& out);

}  // namespace uavsearch
