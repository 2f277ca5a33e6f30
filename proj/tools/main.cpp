#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uavsearch/commands.hpp"

using namespace uavsearch;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> presets;
  std::vector<std::string> sets;
  std::string seed;
  std::string out;
  bool single_threaded = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "key = value file, or a manifest.json to rerun");
  cmd->add_option("--preset", o.presets, "named preset, applied in order before the config file")
      ->check(CLI::IsMember(preset_names()));
  cmd->add_option("--set", o.sets, "key=value override (repeatable)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--single-threaded", o.single_threaded, "deterministic single-threaded execution");
}

ExperimentConfig resolve(const CommonOptions& o, std::vector<std::string> extra) {
  ExperimentConfig cfg;
  for (const auto& p : o.presets) apply_preset(cfg, p);
  if (!o.config.empty()) apply_config_source(cfg, o.config);
  apply_overrides(cfg, o.sets);
  if (!o.seed.empty()) extra.push_back("seed=" + o.seed);
  if (!o.out.empty()) extra.push_back("out=" + o.out);
  if (o.single_threaded) extra.push_back("train.single_threaded=true");
  apply_overrides(cfg, extra);
  cfg.validate();
  return cfg;
}

void print_summary(const EvalSummary& s) {
  std::cout << s.label << ": " << s.n_episodes << " episodes, path " << s.path_length.mean << " +- "
            << s.path_length.std << ", found " << s.terminal_found.mean << " +- " << s.terminal_found.std << '\n';
  for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
    std::cout << "  found@" << s.checkpoints[i] << ": " << s.found_at[i].mean << " +- " << s.found_at[i].std << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV weed search: simulation, DQN training and evaluation"};
  app.require_subcommand(1);

  CommonOptions train_o, eval_o, base_o, field_o;
  std::string checkpoint, policy;
  int episodes = 0;

  auto* train = app.add_subcommand("train", "train a Q-network");
  add_common(train, train_o);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint (or a random walk)");
  add_common(evaluate, eval_o);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint to evaluate");
  evaluate->add_option("--episodes", episodes, "number of evaluation episodes");
  evaluate->add_option("--policy", policy, "greedy or random")->check(CLI::IsMember({"greedy", "random"}));

  auto* baseline = app.add_subcommand("baseline", "evaluate the row-by-row coverage path");
  add_common(baseline, base_o);
  int base_episodes = 0;
  baseline->add_option("--episodes", base_episodes, "number of evaluation episodes");

  auto* compare = app.add_subcommand("compare", "compare two summaries with Welch's t-test");
  std::string summary_a, summary_b, compare_out = "compare";
  double alpha = 0.001;
  compare->add_option("policy", summary_a, "summary.json of the policy")->required();
  compare->add_option("baseline", summary_b, "summary.json of the baseline")->required();
  compare->add_option("--alpha", alpha, "significance level");
  compare->add_option("--out", compare_out, "output directory");

  auto* render = app.add_subcommand("render", "render an episode log to SVG");
  std::string log_path, render_out = "render";
  std::size_t index = 0;
  render->add_option("log", log_path, "episodes.jsonl")->required();
  render->add_option("--index", index, "episode index in the file");
  render->add_option("--out", render_out, "output directory");

  auto* gen = app.add_subcommand("generate-field", "draw one field and write it as text");
  add_common(gen, field_o);

  auto* rerun_cmd = app.add_subcommand("rerun", "rerun a command from its manifest (single-threaded)");
  std::string manifest, rerun_out;
  rerun_cmd->add_option("manifest", manifest, "manifest.json")->required();
  rerun_cmd->add_option("--out", rerun_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const TrainRun run = cmd_train(resolve(train_o, {}));
      std::cout << "trained " << run.result.env_steps << " env steps, " << run.result.learner_steps
                << " updates; best validation reward " << run.result.best_val_reward << "\ncheckpoint "
                << run.checkpoint.string() << '\n';
    } else if (*evaluate) {
      std::vector<std::string> extra;
      if (!checkpoint.empty()) extra.push_back("eval.checkpoint=" + checkpoint);
      if (episodes > 0) extra.push_back("eval.n_episodes=" + std::to_string(episodes));
      if (!policy.empty()) extra.push_back("eval.policy=" + policy);
      print_summary(cmd_evaluate(resolve(eval_o, extra)).summary);
    } else if (*baseline) {
      std::vector<std::string> extra;
      if (base_episodes > 0) extra.push_back("eval.n_episodes=" + std::to_string(base_episodes));
      print_summary(cmd_baseline(resolve(base_o, extra)).summary);
    } else if (*compare) {
      write_table_text(std::cout, cmd_compare(summary_a, summary_b, alpha, compare_out));
    } else if (*render) {
      cmd_render(log_path, index, render_out);
      std::cout << render_out << "/render.svg\n";
    } else if (*gen) {
      const Field f = cmd_generate_field(resolve(field_o, {}));
      std::cout << f.weeds.size() << " weeds\n";
    } else if (*rerun_cmd) {
      rerun(manifest, rerun_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
