#include "uavsearch/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

namespace uavsearch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": cannot parse '" + text + "' as a number");
  return v;
}

std::string format(int v) { return std::to_string(v); }
std::string format(long v) { return std::to_string(v); }
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(double v) { return format_double(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(DistributionKind v) { return to_string(v); }
std::string format(const StoppingCriterion& v) { return v.to_string(); }
std::string format(const std::vector<nn::ConvSpec>& v) { return nn::format_conv_list(v); }
std::string format(const std::vector<int>& v) { return nn::format_width_list(v); }
std::string format(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <typename T>
T parse(const std::string& key, const std::string& text) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw ConfigError(key + ": expected true or false, got '" + text + "'");
    } else if constexpr (std::is_arithmetic_v<T>) {
      return parse_number<T>(key, text);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, DistributionKind>) {
      return parse_distribution_kind(text);
    } else if constexpr (std::is_same_v<T, StoppingCriterion>) {
      return StoppingCriterion::parse(text);
    } else if constexpr (std::is_same_v<T, std::vector<nn::ConvSpec>>) {
      return nn::parse_conv_list(text);
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      return nn::parse_width_list(text);
    } else if constexpr (std::is_same_v<T, std::vector<long>>) {
      std::vector<long> out;
      if (text.empty()) return out;
      for (const auto& item : split(text, ',')) out.push_back(parse_number<long>(key, item));
      return out;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::string format_covariances(const std::vector<Eigen::Matrix2d>& covs) {
  std::string out;
  for (std::size_t i = 0; i < covs.size(); ++i) {
    const auto& c = covs[i];
    if (i) out += ';';
    out += format_double(c(0, 0)) + ',' + format_double(c(0, 1)) + ',' + format_double(c(1, 0)) + ',' +
           format_double(c(1, 1));
  }
  return out;
}

std::vector<Eigen::Matrix2d> parse_covariances(const std::string& key, const std::string& text) {
  std::vector<Eigen::Matrix2d> out;
  for (const auto& item : split(text, ';')) {
    const auto parts = split(item, ',');
    if (parts.size() != 4) throw ConfigError(key + ": each covariance needs 4 comma-separated entries");
    Eigen::Matrix2d c;
    c << parse_number<double>(key, parts[0]), parse_number<double>(key, parts[1]), parse_number<double>(key, parts[2]),
        parse_number<double>(key, parts[3]);
    out.push_back(c);
  }
  return out;
}

struct KeyHandler {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

using Registry = std::vector<std::pair<std::string, KeyHandler>>;

template <typename Access>
void add(Registry& reg, const std::string& key, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  reg.emplace_back(key, KeyHandler{
                            [access](const ExperimentConfig& c) { return format(access(const_cast<ExperimentConfig&>(c))); },
                            [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse<T>(key, v); }});
}

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    add(r, "seed", [](ExperimentConfig& c) -> auto& { return c.seed; });
    add(r, "out", [](ExperimentConfig& c) -> auto& { return c.out; });

    add(r, "field.M", [](ExperimentConfig& c) -> auto& { return c.env.field.M; });
    add(r, "field.kind", [](ExperimentConfig& c) -> auto& { return c.env.field.kind; });
    add(r, "field.obj_mu", [](ExperimentConfig& c) -> auto& { return c.env.field.obj_mu; });
    add(r, "field.obj_sigma", [](ExperimentConfig& c) -> auto& { return c.env.field.obj_sigma; });
    add(r, "field.dist_mu", [](ExperimentConfig& c) -> auto& { return c.env.field.dist_mu; });
    add(r, "field.dist_sigma", [](ExperimentConfig& c) -> auto& { return c.env.field.dist_sigma; });
    r.emplace_back("field.covariances",
                   KeyHandler{[](const ExperimentConfig& c) {
                                return c.covariances_auto ? std::string("auto") : format_covariances(c.env.field.covariances);
                              },
                              [](ExperimentConfig& c, const std::string& v) {
                                if (v == "auto") {
                                  c.covariances_auto = true;
                                  return;
                                }
                                c.env.field.covariances = parse_covariances("field.covariances", v);
                                c.covariances_auto = false;
                              }});

    add(r, "det.fp", [](ExperimentConfig& c) -> auto& { return c.env.detection.r_fp; });
    add(r, "det.fn", [](ExperimentConfig& c) -> auto& { return c.env.detection.r_fn; });
    add(r, "det.pos_sigma", [](ExperimentConfig& c) -> auto& { return c.env.detection.pos_sigma; });
    add(r, "prior.fp", [](ExperimentConfig& c) -> auto& { return c.env.prior.r_fp; });
    add(r, "prior.fn", [](ExperimentConfig& c) -> auto& { return c.env.prior.r_fn; });
    add(r, "prior.pos_sigma", [](ExperimentConfig& c) -> auto& { return c.env.prior.pos_sigma; });
    add(r, "prior.P", [](ExperimentConfig& c) -> auto& { return c.env.prior.P; });

    add(r, "env.F", [](ExperimentConfig& c) -> auto& { return c.env.F; });
    add(r, "env.g_global", [](ExperimentConfig& c) -> auto& { return c.env.g_global; });
    add(r, "env.b_init", [](ExperimentConfig& c) -> auto& { return c.env.b_init; });
    add(r, "env.b_step", [](ExperimentConfig& c) -> auto& { return c.env.b_step; });
    add(r, "env.stopping", [](ExperimentConfig& c) -> auto& { return c.env.stopping; });
    add(r, "env.land_action", [](ExperimentConfig& c) -> auto& { return c.env.land_action; });
    add(r, "reward.detect", [](ExperimentConfig& c) -> auto& { return c.env.rewards.detect; });
    add(r, "reward.nfz", [](ExperimentConfig& c) -> auto& { return c.env.rewards.nfz; });
    add(r, "reward.step", [](ExperimentConfig& c) -> auto& { return c.env.rewards.step; });
    add(r, "reward.crash", [](ExperimentConfig& c) -> auto& { return c.env.rewards.crash; });

    add(r, "train.gamma", [](ExperimentConfig& c) -> auto& { return c.train.gamma; });
    add(r, "train.tau", [](ExperimentConfig& c) -> auto& { return c.train.tau; });
    add(r, "train.lambda", [](ExperimentConfig& c) -> auto& { return c.train.lambda; });
    add(r, "train.alpha", [](ExperimentConfig& c) -> auto& { return c.train.alpha; });
    add(r, "train.batch", [](ExperimentConfig& c) -> auto& { return c.train.batch; });
    add(r, "train.buffer", [](ExperimentConfig& c) -> auto& { return c.train.buffer; });
    add(r, "train.n_steps", [](ExperimentConfig& c) -> auto& { return c.train.n_steps; });
    add(r, "train.n_val", [](ExperimentConfig& c) -> auto& { return c.train.n_val; });
    add(r, "train.fill_fraction", [](ExperimentConfig& c) -> auto& { return c.train.fill_fraction; });
    add(r, "train.val_interval", [](ExperimentConfig& c) -> auto& { return c.train.val_interval; });
    add(r, "train.parallel_envs", [](ExperimentConfig& c) -> auto& { return c.train.parallel_envs; });
    add(r, "train.train_every", [](ExperimentConfig& c) -> auto& { return c.train.train_every; });
    add(r, "train.max_grad_norm", [](ExperimentConfig& c) -> auto& { return c.train.max_grad_norm; });
    add(r, "train.single_threaded", [](ExperimentConfig& c) -> auto& { return c.train.single_threaded; });

    add(r, "net.local", [](ExperimentConfig& c) -> auto& { return c.net.local; });
    add(r, "net.global", [](ExperimentConfig& c) -> auto& { return c.net.global; });
    add(r, "net.hidden", [](ExperimentConfig& c) -> auto& { return c.net.hidden; });

    add(r, "eval.n_episodes", [](ExperimentConfig& c) -> auto& { return c.eval.n_episodes; });
    add(r, "eval.checkpoints", [](ExperimentConfig& c) -> auto& { return c.eval.checkpoints; });
    add(r, "eval.alpha", [](ExperimentConfig& c) -> auto& { return c.eval.alpha; });
    add(r, "eval.checkpoint", [](ExperimentConfig& c) -> auto& { return c.eval.checkpoint; });
    add(r, "eval.policy", [](ExperimentConfig& c) -> auto& { return c.eval.policy; });
    return r;
  }();
  return reg;
}

const KeyHandler& handler(const std::string& key) {
  for (const auto& [name, h] : registry()) {
    if (name == key) return h;
  }
  throw ConfigError(key + ": unknown key");
}

// Prefixes a sub-validator's message with the key it concerns.
template <typename Fn>
void check(const std::string& key, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

EnvConfig ExperimentConfig::resolved_env() const {
  EnvConfig out = env;
  if (covariances_auto) {
    out.field.covariances =
        env.field.kind == DistributionKind::kMedium ? medium_covariances() : strong_covariances();
  }
  return out;
}

nn::QNetworkSpec ExperimentConfig::network_spec() const {
  nn::QNetworkSpec spec;
  spec.local_size = env.F;
  spec.global_size = env.global_size();
  spec.local_branch = net.local;
  spec.global_branch = net.global;
  spec.head = net.hidden;
  spec.head.push_back(env.action_count());
  return spec;
}

void ExperimentConfig::validate() const {
  const EnvConfig e = resolved_env();
  check("field", [&] { e.field.validate(); });
  check("det", [&] { e.detection.validate(); });
  check("prior", [&] { e.prior.validate(e.field.M); });
  check("env.F", [&] {
    if (e.F < 1 || e.F % 2 == 0) throw std::invalid_argument("F must be odd");
    if (e.F > e.field.M) throw std::invalid_argument("F must not exceed field.M");
  });
  check("env.stopping", [&] { e.stopping.validate(); });
  check("env", [&] { e.validate(); });
  check("train", [&] { train.validate(); });
  check("net", [&] { network_spec().validate(); });
  if (eval.n_episodes < 1) throw ConfigError("eval.n_episodes: must be >= 1");
  if (!(eval.alpha > 0.0 && eval.alpha < 1.0)) throw ConfigError("eval.alpha: must be in (0, 1)");
  if (eval.policy != "greedy" && eval.policy != "random") {
    throw ConfigError("eval.policy: must be 'greedy' or 'random'");
  }
  for (long c : eval.checkpoints) {
    if (c < 0) throw ConfigError("eval.checkpoints: must be >= 0");
  }
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  handler(key).set(cfg, value);
}

std::string get_key(const ExperimentConfig& cfg, const std::string& key) { return handler(key).get(cfg); }

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& entry : registry()) out.push_back(entry.first);
  return out;
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "': expected key=value");
    set_key(cfg, trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
  }
}

namespace {

void set_detection(ExperimentConfig& c, double fp, double fn, double sigma) { c.env.detection = {fp, fn, sigma}; }

void set_prior(ExperimentConfig& c, double fp, double fn, double sigma, int P) { c.env.prior = {fp, fn, sigma, P}; }

const std::map<std::string, std::function<void(ExperimentConfig&)>>& presets() {
  static const std::map<std::string, std::function<void(ExperimentConfig&)>> table = {
      {"full-scale", [](ExperimentConfig& c) { c = ExperimentConfig{}; }},
      {"desk-scale",
       [](ExperimentConfig& c) {
         c.env.field.M = 16;
         c.env.field.obj_mu = 20;
         c.env.field.obj_sigma = 4;
         c.env.field.dist_mu = 2;
         c.env.field.dist_sigma = 0;
         c.env.field.kind = DistributionKind::kStrong;
         c.env.field.covariances = strong_covariances();
         for (auto& cov : c.env.field.covariances) cov /= 4.0;
         c.covariances_auto = false;
         c.env.F = 5;
         c.env.g_global = 3;
         c.env.b_init = 20;
         c.env.b_step = 0.2;
         set_detection(c, 0, 0, 0);
         set_prior(c, 0, 0, 0, 16);
         c.net.local = {{3, 16}};
         c.net.global = {{5, 16}, {3, 8}};
         c.net.hidden = {96, 96, 96};
         c.train.n_steps = 200000;
         c.train.alpha = 3e-4;
         c.train.buffer = 50000;
         c.train.val_interval = 2500;
         c.train.n_val = 60;
         c.eval.n_episodes = 200;
         c.eval.checkpoints = {10, 20, 30, 40, 50};
       }},
      {"dist-strong",
       [](ExperimentConfig& c) {
         c.env.field.kind = DistributionKind::kStrong;
         c.env.field.dist_mu = 3;
         c.env.field.dist_sigma = 2;
         c.covariances_auto = true;
       }},
      {"dist-medium",
       [](ExperimentConfig& c) {
         c.env.field.kind = DistributionKind::kMedium;
         c.env.field.dist_mu = 4;
         c.env.field.dist_sigma = 1;
         c.covariances_auto = true;
       }},
      {"dist-uniform",
       [](ExperimentConfig& c) {
         c.env.field.kind = DistributionKind::kUniform;
         c.covariances_auto = true;
       }},
      {"det-very-high", [](ExperimentConfig& c) { set_detection(c, 0.01, 0.5, 0.5); }},
      {"det-high", [](ExperimentConfig& c) { set_detection(c, 0.001, 0.1, 0.1); }},
      {"det-moderate", [](ExperimentConfig& c) { set_detection(c, 0.0001, 0.05, 0.05); }},
      {"det-low", [](ExperimentConfig& c) { set_detection(c, 0.00005, 0.02, 0.02); }},
      {"det-perfect", [](ExperimentConfig& c) { set_detection(c, 0, 0, 0); }},
      // P is relative to the current field size; at M=48 these are 0, 2, 12, 24 and 48.
      {"prior-none", [](ExperimentConfig& c) { set_prior(c, 0, 0, 0, 0); }},
      {"prior-low", [](ExperimentConfig& c) { set_prior(c, 0.002, 0.40, 1.0, 2); }},
      {"prior-moderate", [](ExperimentConfig& c) { set_prior(c, 0.001, 0.20, 0.5, c.env.field.M / 4); }},
      {"prior-high", [](ExperimentConfig& c) { set_prior(c, 0.0005, 0.05, 0.25, c.env.field.M / 2); }},
      {"prior-perfect", [](ExperimentConfig& c) { set_prior(c, 0, 0, 0, c.env.field.M); }},
      {"stop-all-found", [](ExperimentConfig& c) { c.env.stopping = StoppingCriterion::all_found(); }},
      {"stop-coverage", [](ExperimentConfig& c) { c.env.stopping = StoppingCriterion::coverage(0.5); }},
      {"stop-stalled-15", [](ExperimentConfig& c) { c.env.stopping = StoppingCriterion::no_new_detections(15); }},
      {"stop-stalled-25", [](ExperimentConfig& c) { c.env.stopping = StoppingCriterion::no_new_detections(25); }},
      {"stop-stalled-50", [](ExperimentConfig& c) { c.env.stopping = StoppingCriterion::no_new_detections(50); }},
      {"land",
       [](ExperimentConfig& c) {
         c.env.land_action = true;
         c.env.stopping = StoppingCriterion::learned_land();
       }},
  };
  return table;
}

}  // namespace

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("preset: unknown preset '" + name + "'");
  it->second(cfg);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& entry : presets()) out.push_back(entry.first);
  return out;
}

ExperimentConfig parse_config(const std::vector<std::string>& presets, const std::string& file,
                              const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  for (const auto& p : presets) apply_preset(cfg, p);
  if (!file.empty()) apply_config_file(cfg, file);
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

std::string render(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, h] : registry()) out += name + " = " + h.get(cfg) + "\n";
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return render(a) == render(b); }

}  // namespace uavsearch
