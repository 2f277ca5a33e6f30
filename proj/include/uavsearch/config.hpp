#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "uavsearch/dqn.hpp"
#include "uavsearch/environment.hpp"
#include "uavsearch/nn.hpp"

namespace uavsearch {

/// Bad key, bad value or failed validation; the message starts with the key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NetworkConfig {
  std::vector<nn::ConvSpec> local{{5, 16}, {3, 64}};
  std::vector<nn::ConvSpec> global{{5, 16}, {3, 12}};
  std::vector<int> hidden{256, 256, 256};
};

struct EvalConfig {
  int n_episodes = 1000;
  std::vector<long> checkpoints{100, 200, 300};
  double alpha = 0.001;
  std::string checkpoint;  ///< network to evaluate; empty for baseline runs
  std::string policy = "greedy";  ///< "greedy" (checkpoint) or "random"
};

struct ExperimentConfig {
  EnvConfig env;
  /// Take the covariance set from field.kind instead of field.covariances.
  bool covariances_auto = true;
  TrainConfig train;
  NetworkConfig net;
  EvalConfig eval;
  std::uint64_t seed = 0;
  std::string out = "run";

  /// EnvConfig with automatic covariances filled in.
  EnvConfig resolved_env() const;
  nn::QNetworkSpec network_spec() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Sets one key from its text value.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const ExperimentConfig& cfg, const std::string& key);
/// All keys in render order.
std::vector<std::string> config_keys();

/// Applies "key = value" lines; '#' starts a comment.
void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& source = "config");
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
/// Applies "key=value" overrides.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments);

void apply_preset(ExperimentConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

/// defaults < presets (in order) < file < overrides, then validate.
ExperimentConfig parse_config(const std::vector<std::string>& presets, const std::string& file,
                              const std::vector<std::string>& overrides);

/// Every key, one "key = value" line each; parses back to an equal config.
std::string render(const ExperimentConfig& cfg);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace uavsearch
