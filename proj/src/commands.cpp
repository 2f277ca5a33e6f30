#include "uavsearch/commands.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "uavsearch/render.hpp"

namespace uavsearch {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read '" + path.string() + "'");
  return is;
}

std::string exact(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_history(const fs::path& path, const std::vector<HistoryEntry>& history) {
  auto os = open_out(path);
  os << "env_step\tlearner_step\tloss\tval_mean_reward\tval_mean_found_fraction\n";
  for (const auto& h : history) {
    os << h.env_step << '\t' << h.learner_step << '\t' << exact(h.loss) << '\t' << exact(h.val_mean_reward) << '\t'
       << exact(h.val_mean_found_fraction) << '\n';
  }
}

EnvFactory env_factory(const EnvConfig& env) {
  return [env](int) { return Environment(env); };
}

EvalRun finish_evaluation(const ExperimentConfig& cfg, const std::string& command, const std::string& label,
                          std::vector<EpisodeLog> logs, Clock::time_point t0) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  EvalRun run;
  run.summary = aggregate(logs, cfg.eval.checkpoints, label);
  run.summary.family = field_fingerprint(cfg.resolved_env());
  {
    auto os = open_out(dir / "episodes.jsonl");
    for (const auto& log : logs) write_episode_log(os, log);
  }
  {
    auto os = open_out(dir / "summary.json");
    write_summary_json(os, run.summary);
  }
  {
    auto os = open_out(dir / "summary.tsv");
    write_summary_tsv(os, run.summary);
  }
  {
    auto os = open_out(dir / "curve.tsv");
    write_curve(os, run.summary);
  }
  std::vector<std::pair<std::string, double>> results{{"path_length_mean", run.summary.path_length.mean},
                                                      {"terminal_found_mean", run.summary.terminal_found.mean}};
  for (std::size_t i = 0; i < run.summary.checkpoints.size(); ++i) {
    results.emplace_back("found_at_" + std::to_string(run.summary.checkpoints[i]), run.summary.found_at[i].mean);
  }
  write_manifest(dir, {command, cfg, {}}, seconds_since(t0), results);
  run.logs = std::move(logs);
  return run;
}

}  // namespace

void write_manifest(const fs::path& dir, const Manifest& manifest, double wall_seconds,
                    const std::vector<std::pair<std::string, double>>& results) {
  fs::create_directories(dir);
  json config = json::object();
  for (const auto& key : config_keys()) config[key] = get_key(manifest.config, key);
  json inputs = json::object();
  for (const auto& [k, v] : manifest.inputs) inputs[k] = v;
  json res = json::object();
  for (const auto& [k, v] : results) res[k] = v;
  const json j = {{"command", manifest.command},
                  {"config", config},
                  {"inputs", inputs},
                  {"seeds",
                   {{"master", manifest.config.seed},
                    {"evaluation", "derive_seed(derive_seed(master, 0xe7a1), i)"},
                    {"validation", "derive_seed(derive_seed(master, 0x7a11da7e), i)"},
                    {"actor", "derive_seed(master, 1000 + i)"}}},
                  {"wall_seconds", wall_seconds},
                  {"results", res}};
  auto os = open_out(dir / "manifest.json");
  os << j.dump(2) << '\n';
}

Manifest read_manifest(const fs::path& path) {
  auto is = open_in(path);
  const json j = json::parse(is);
  Manifest m;
  m.command = j.at("command").get<std::string>();
  for (const auto& [k, v] : j.at("config").items()) set_key(m.config, k, v.get<std::string>());
  if (j.contains("inputs")) {
    for (const auto& [k, v] : j.at("inputs").items()) m.inputs.emplace_back(k, v.get<std::string>());
  }
  return m;
}

void apply_config_source(ExperimentConfig& cfg, const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    cfg = read_manifest(path).config;
  } else {
    apply_config_file(cfg, path);
  }
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t seed, int n) {
  const std::uint64_t base = derive_seed(seed, 0xe7a1);
  std::vector<std::uint64_t> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = derive_seed(base, static_cast<std::uint64_t>(i));
  return out;
}

std::vector<EpisodeLog> evaluate_policy(const EnvConfig& env, const PolicyFactory& make_policy,
                                        const std::vector<std::uint64_t>& seeds, bool single_threaded) {
  std::vector<EpisodeLog> logs(seeds.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    Environment e(env);
    auto policy = make_policy();
    for (std::size_t i = begin; i < seeds.size(); i += stride) logs[i] = run_episode(e, *policy, seeds[i]);
  };
  const std::size_t workers =
      single_threaded ? 1 : std::min<std::size_t>(seeds.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    work(0, 1);
    return logs;
  }
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
  for (auto& t : threads) t.join();
  return logs;
}

TrainRun cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  const nn::QNetworkSpec spec = cfg.network_spec();
  TrainRun run;
  run.result = training_loop(env_factory(cfg.resolved_env()), spec, cfg.train, cfg.seed);
  run.checkpoint = dir / "checkpoint.qnet";
  nn::save_params(run.checkpoint, spec, run.result.best_params);
  nn::save_params(dir / "final.qnet", spec, run.result.final_params);
  write_history(dir / "history.tsv", run.result.history);
  write_manifest(dir, {"train", cfg, {}}, seconds_since(t0),
                 {{"parameter_count", static_cast<double>(spec.parameter_count())},
                  {"env_steps", static_cast<double>(run.result.env_steps)},
                  {"learner_steps", static_cast<double>(run.result.learner_steps)},
                  {"episodes", static_cast<double>(run.result.episodes)},
                  {"best_learner_step", static_cast<double>(run.result.best_learner_step)},
                  {"best_val_mean_reward", run.result.best_val_reward},
                  {"final_val_mean_reward",
                   run.result.history.empty() ? 0.0 : run.result.history.back().val_mean_reward},
                  {"final_val_mean_found_fraction",
                   run.result.history.empty() ? 0.0 : run.result.history.back().val_mean_found_fraction}});
  return run;
}

EvalRun cmd_evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const EnvConfig env = cfg.resolved_env();
  const auto seeds = evaluation_seeds(cfg.seed, cfg.eval.n_episodes);
  const bool single = cfg.train.single_threaded;
  if (cfg.eval.policy == "random") {
    if (env.stopping.kind == StoppingCriterion::Kind::kLearnedLand) {
      throw ConfigError("env.stopping: learned_land needs a trained policy");
    }
    auto logs = evaluate_policy(env, [] { return std::make_unique<RandomWalkPolicy>(); }, seeds, single);
    return finish_evaluation(cfg, "evaluate", "random-walk", std::move(logs), t0);
  }
  if (cfg.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint: required for greedy evaluation");
  const nn::QNetworkSpec spec = cfg.network_spec();
  const nn::CheckpointHeader header = nn::read_checkpoint_header(cfg.eval.checkpoint);
  if (header.spec_hash != spec.hash()) {
    throw std::runtime_error("checkpoint '" + cfg.eval.checkpoint + "' does not match the configured network (" +
                             spec.describe() + ")");
  }
  const nn::Vector<float> params = nn::load_params(cfg.eval.checkpoint, spec);
  const nn::QNetwork<float> net(spec);
  auto logs = evaluate_policy(env, [&] { return std::make_unique<GreedyQPolicy>(net, params); }, seeds, single);
  return finish_evaluation(cfg, "evaluate", "dqn", std::move(logs), t0);
}

EvalRun cmd_baseline(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  EnvConfig env = cfg.resolved_env();
  // The plan is flown to the end: full coverage is its last action.
  env.land_action = false;
  env.stopping = StoppingCriterion::coverage(1.0);
  const auto seeds = evaluation_seeds(cfg.seed, cfg.eval.n_episodes);
  auto logs = evaluate_policy(env, [] { return std::make_unique<RowByRowPolicy>(); }, seeds, cfg.train.single_threaded);
  return finish_evaluation(cfg, "baseline", "row-by-row", std::move(logs), t0);
}

ComparisonTable cmd_compare(const fs::path& summary_a, const fs::path& summary_b, double alpha, const fs::path& out) {
  const auto t0 = Clock::now();
  EvalSummary a, b;
  {
    auto is = open_in(summary_a);
    a = read_summary_json(is);
  }
  {
    auto is = open_in(summary_b);
    b = read_summary_json(is);
  }
  if (!a.family.empty() && !b.family.empty() && a.family != b.family) {
    throw std::invalid_argument("compare: summaries come from different field configurations");
  }
  const ComparisonTable table = compare(a, b, alpha);
  fs::create_directories(out);
  {
    auto os = open_out(out / "report.txt");
    write_table_text(os, table);
  }
  {
    auto os = open_out(out / "report.tsv");
    write_table_tsv(os, table);
  }
  ExperimentConfig cfg;
  cfg.eval.alpha = alpha;
  cfg.out = out.string();
  write_manifest(out, {"compare", cfg, {{"summary_a", summary_a.string()}, {"summary_b", summary_b.string()}}},
                 seconds_since(t0));
  return table;
}

void cmd_render(const fs::path& episode_log, std::size_t index, const fs::path& out) {
  const auto t0 = Clock::now();
  auto is = open_in(episode_log);
  const std::vector<EpisodeLog> logs = read_episode_logs(is);
  if (index >= logs.size()) {
    throw std::out_of_range("render: episode " + std::to_string(index) + " not in '" + episode_log.string() + "'");
  }
  fs::create_directories(out);
  {
    auto os = open_out(out / "render.svg");
    os << render_svg(logs[index]);
  }
  ExperimentConfig cfg;
  cfg.out = out.string();
  write_manifest(out, {"render", cfg, {{"episode_log", episode_log.string()}, {"index", std::to_string(index)}}},
                 seconds_since(t0));
}

Field cmd_generate_field(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  RngStream rng(cfg.seed, StreamId::kFieldGen);
  Field field = generate_field(cfg.resolved_env().field, rng);
  field.seed = cfg.seed;
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "field.txt");
    write_field(os, field);
  }
  write_manifest(dir, {"generate-field", cfg, {}}, seconds_since(t0),
                 {{"n_weeds", static_cast<double>(field.weeds.size())}});
  return field;
}

void rerun(const fs::path& manifest_path, const fs::path& out) {
  Manifest m = read_manifest(manifest_path);
  m.config.out = out.string();
  m.config.train.single_threaded = true;
  auto input = [&](const std::string& key) {
    for (const auto& [k, v] : m.inputs) {
      if (k == key) return v;
    }
    throw std::runtime_error("manifest lacks input '" + key + "'");
  };
  if (m.command == "train") {
    cmd_train(m.config);
  } else if (m.command == "evaluate") {
    cmd_evaluate(m.config);
  } else if (m.command == "baseline") {
    cmd_baseline(m.config);
  } else if (m.command == "compare") {
    cmd_compare(input("summary_a"), input("summary_b"), m.config.eval.alpha, out);
  } else if (m.command == "render") {
    cmd_render(input("episode_log"), std::stoul(input("index")), out);
  } else if (m.command == "generate-field") {
    cmd_generate_field(m.config);
  } else {
    throw std::runtime_error("manifest: unknown command '" + m.command + "'");
  }
}

}  // namespace uavsearch
