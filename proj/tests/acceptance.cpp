// Acceptance runner: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "uavsearch/baseline.hpp"
#include "uavsearch/commands.hpp"
#include "uavsearch/config.hpp"
#include "uavsearch/dqn.hpp"
#include "uavsearch/environment.hpp"
#include "uavsearch/evaluation.hpp"
#include "uavsearch/grid.hpp"
#include "uavsearch/nn.hpp"
#include "uavsearch/policy.hpp"

using namespace uavsearch;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& id, const std::string& what, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS " : "FAIL ") << id << ' ' << what << " | " << detail << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- kernels

void numerical_kernels() {
  auto t0 = std::chrono::steady_clock::now();
  {
    bool ok = true;
    const auto a = nn::smooth_l1(0.0, 0.0), b = nn::smooth_l1(0.5, 0.0), c = nn::smooth_l1(2.0, 0.0);
    ok &= a.loss == 0.0 && a.grad == 0.0;
    ok &= std::abs(b.loss - 0.125) <= 1e-12 && std::abs(b.grad - 0.5) <= 1e-12;
    ok &= std::abs(c.loss - 1.5) <= 1e-12 && std::abs(c.grad - 1.0) <= 1e-12;
    report(ok, "1.1", "smooth-L1 closed form", "d=0,0.5,2 within 1e-12");
  }
  {
    nn::Vector<double> tgt = nn::Vector<double>::Zero(3), pol = nn::Vector<double>::Ones(3);
    nn::Vector<double> t0v = tgt, t1 = tgt, t2 = tgt;
    soft_update(t0v, pol, 0.0);
    soft_update(t1, pol, 1.0);
    soft_update(t2, pol, 0.005);
    const bool ok = t0v == tgt && t1 == pol && (t2.array() - 0.005).abs().maxCoeff() <= 1e-12;
    report(ok, "1.2", "soft update", "tau in {0,1,0.005}");
  }
  {
    const Eigen::VectorXd eq = softmax_probabilities(Eigen::Vector4d::Constant(0.3), 0.1);
    const Eigen::VectorXd p = softmax_probabilities(Eigen::Vector4d(1, 0, 0, 0), 0.1);
    const double closed = std::exp(10.0) / (std::exp(10.0) + 3.0);
    RngStream rng(5, StreamId::kExploration);
    double worst_sum = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Eigen::VectorXd q(5);
      for (int j = 0; j < 5; ++j) q(j) = next_normal(rng, 0.0, 5.0);
      worst_sum = std::max(worst_sum, std::abs(softmax_probabilities(q, 0.05 + 0.01 * i).sum() - 1.0));
    }
    const bool ok = (eq.array() == 0.25).all() && worst_sum <= 1e-12 && std::abs(p(0) - closed) <= 1e-9;
    report(ok, "1.3", "softmax policy", "uniform exact, |sum-1| max " + fmt(worst_sum) + ", p0 err " +
                                           fmt(std::abs(p(0) - closed)));
  }
  {
    RngStream rng(7, 1);
    double worst = 0.0;
    const int instances = 20;
    for (int inst = 0; inst < instances; ++inst) {
      nn::QNetworkSpec spec;
      spec.in_channels = 1 + static_cast<int>(rng.next_index(3));
      spec.local_size = 3 + static_cast<int>(rng.next_index(3));
      spec.global_size = 4 + static_cast<int>(rng.next_index(3));
      spec.local_branch = {{1 + 2 * static_cast<int>(rng.next_index(2)), 2 + static_cast<int>(rng.next_index(3))}};
      spec.global_branch = {{3, 2}, {2, 2 + static_cast<int>(rng.next_index(2))}};
      spec.head = {3 + static_cast<int>(rng.next_index(4)), 4, 5};
      const nn::QNetwork<double> net(spec);
      nn::Vector<double> p = nn::init_params<double>(spec, rng).values;
      for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += 0.05 * next_normal(rng, 0.0, 1.0);
      nn::Batch<double> b;
      b.local.resize(spec.in_channels * spec.local_size * spec.local_size, 2);
      b.global.resize(spec.in_channels * spec.global_size * spec.global_size, 2);
      b.budget.resize(1, 2);
      for (auto* m : {&b.local, &b.global, &b.budget})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = next_uniform(rng);
      nn::Matrix<double> up(5, 2);
      for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = next_normal(rng, 0.0, 1.0);
      nn::ForwardCache<double> cache;
      net.forward(p, b, cache);
      const nn::Vector<double> g = net.backward(p, cache, up);
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        nn::Vector<double> pp = p, pm = p;
        pp(i) += h;
        pm(i) -= h;
        const double fd =
            ((net.forward(pp, b).array() * up.array()).sum() - (net.forward(pm, b).array() * up.array()).sum()) /
            (2 * h);
        worst = std::max(worst, std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), 1e-6}));
      }
    }
    report(worst < 1e-4, "1.4", "gradient check", std::to_string(instances) + " networks, max rel err " + fmt(worst));
  }
  {
    RngStream rng(11, 1);
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      const int rows = 1 + static_cast<int>(rng.next_index(40)), cols = 1 + static_cast<int>(rng.next_index(40));
      const int k = 1 + static_cast<int>(rng.next_index(5));
      GridMap m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = next_uniform(rng);
      const GridMap pooled = avg_pool(m, k);
      for (int i = 0; i < pooled.rows(); ++i)
        for (int j = 0; j < pooled.cols(); ++j) {
          double s = 0;
          // Same summation order as the kernel, so equality is exact.
          for (int c = 0; c < k; ++c)
            for (int a = 0; a < k; ++a) s += m(std::min(i * k + a, rows - 1), std::min(j * k + c, cols - 1));
          ok &= pooled(i, j) == s * (1.0 / (k * k));
        }
      const int h = rows + static_cast<int>(rng.next_index(30)), w = cols + static_cast<int>(rng.next_index(30));
      const GridMap up = nearest_upsample(m, w, h);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) ok &= up(i, j) == m(i * rows / h, j * cols / w);
    }
    // encode_global against a direct canvas construction.
    EnvConfig cfg;
    cfg.field.M = 12;
    cfg.F = 3;
    cfg.prior.P = 6;
    cfg.g_global = 3;
    Environment env(cfg);
    int checked = 0;
    for (std::uint64_t ep = 0; checked < 100; ++ep) {
      env.reset(ep);
      while (!env.state().done && checked < 100) {
        const EnvState& s = env.state();
        const Eigen::VectorXd g = encode_global(s, cfg.g_global);
        const int M = cfg.field.M, S = 2 * M - 1, G = cfg.global_size();
        const GridMap* layers[3] = {nullptr, &s.detected_memory, &s.prior_map};
        for (int l = 0; l < 3; ++l) {
          GridMap canvas(S, S);
          for (int i = 0; i < S; ++i)
            for (int j = 0; j < S; ++j) {
              const int r = i - (M - 1 - s.drone.row), c = j - (M - 1 - s.drone.col);
              const bool in = r >= 0 && r < M && c >= 0 && c < M;
              canvas(i, j) = l == 0 ? (in ? 0.0 : 1.0) : (in ? (*layers[l])(r, c) : 0.0);
            }
          const GridMap ref = avg_pool(canvas, cfg.g_global);
          for (int i = 0; i < G; ++i)
            for (int j = 0; j < G; ++j) ok &= g(l * G * G + i * G + j) == ref(i, j);
        }
        ++checked;
        env.step(static_cast<Action>(ep % 4 == 0 ? (checked % 4) : (checked * 7 + ep) % 4));
      }
    }
    report(ok, "1.5", "avg_pool / nearest_upsample / encode_global oracles", "100 random maps each, exact");
  }
  const double t = seconds_since(t0);
  report(t < 60.0, "1.6", "numerical-kernel suite runtime", fmt(t, 3) + " s (limit 60 s)");
}

// ------------------------------------------------------------ environment

void environment_suite() {
  auto t0 = std::chrono::steady_clock::now();
  {
    EnvConfig cfg;
    cfg.field.M = 24;
    cfg.F = 5;
    cfg.prior.P = 6;
    Environment env(cfg);
    RngStream rng(77, StreamId::kRandomPolicy);
    int bad = 0;
    for (std::uint64_t ep = 0; ep < 1000; ++ep) {
      env.reset(ep);
      const EnvState& s = env.state();
      double sum = 0;
      bool crashed = false;
      while (!s.done) {
        const StepResult r = env.step(static_cast<Action>(rng.next_index(4)));
        sum += r.reward;
        crashed = r.info.crashed;
      }
      const double expected = cfg.rewards.step * static_cast<double>(s.steps) +
                              cfg.rewards.nfz * static_cast<double>(s.boundary_hits) +
                              cfg.rewards.detect * static_cast<double>(s.total_found - s.initial_found) +
                              (crashed ? cfg.rewards.crash : 0.0);
      bad += sum != expected;
    }
    report(bad == 0, "2.1", "reward decomposition identity", "1000 random-action episodes, " +
                                                                 std::to_string(bad) + " mismatches");
  }
  {
    EnvConfig cfg;
    cfg.stopping = StoppingCriterion::coverage(1.0);
    // Nothing to find, so only the battery can end the flight.
    Environment env(cfg, [](RngStream&) {
      Field f;
      f.M = 48;
      return f;
    });
    env.reset(1);
    StepResult r;
    long steps = 0;
    while (!env.state().done) {
      r = env.step(steps % 2 ? Action::kEast : Action::kWest);
      ++steps;
    }
    report(steps == 375 && r.info.crashed && cfg.max_steps() == 375, "2.2", "crash step under default budget",
           "crashed at step " + std::to_string(steps));
  }
  {
    EnvConfig cfg;
    cfg.detection = {0, 0, 0};
    cfg.stopping = StoppingCriterion::coverage(1.0);
    Environment env(cfg);
    std::vector<EpisodeLog> logs;
    for (std::uint64_t s = 0; s < 100; ++s) {
      RowByRowPolicy plan;
      logs.push_back(run_episode(env, plan, s));
    }
    const EvalSummary sum = aggregate(logs);
    report(sum.terminal_found.mean == 1.0 && sum.terminal_found.std == 0.0, "2.3",
           "zero-error detector + baseline finds every weed", "100 episodes, found " + fmt(sum.terminal_found.mean));
    bool coverage_ok = true;
    for (int M = 5; M <= 60; ++M)
      for (int F = 1; F <= M; F += 2)
        for (Corner corner : {Corner::kTopLeft, Corner::kBottomRight}) {
          const CoveragePlan plan = plan_row_by_row(M, F, corner);
          coverage_ok &= plan_coverage(plan, M, F).all();
        }
    const bool ok = sum.path_length.std == 0.0 && sum.path_length.mean >= 270 && sum.path_length.mean <= 290 &&
                    coverage_ok;
    report(ok, "2.4", "baseline path deterministic and complete",
           "M=48 F=11 length " + fmt(sum.path_length.mean) + " std " + fmt(sum.path_length.std) +
               ", coverage sweep " + (coverage_ok ? "complete" : "INCOMPLETE"));
  }
  {
    bool ok = true;
    EnvConfig cfg;
    cfg.detection = {0, 0, 0};
    auto field = [](std::vector<std::pair<double, double>> xy) {
      return [xy](RngStream&) {
        Field f;
        f.M = 48;
        for (auto [x, y] : xy) f.weeds.push_back({x, y, 0});
        return f;
      };
    };
    auto top_left = [&](Environment& env) {
      for (std::uint64_t s = 0;; ++s) {
        env.reset(s);
        if (env.state().start == Cell{5, 5}) return;
      }
    };
    for (int w : {15, 25, 50}) {
      cfg.stopping = StoppingCriterion::no_new_detections(w);
      Environment env(cfg, field({{11.5, 5.5}, {12.5, 5.5}, {40.5, 40.5}}));
      top_left(env);
      env.step(Action::kEast);
      env.step(Action::kEast);
      int steps = 0;
      while (!env.state().done) {
        env.step(steps % 2 ? Action::kEast : Action::kWest);
        ++steps;
      }
      ok &= steps == w && env.state().done_reason == DoneReason::kStalled;
      // A single find never arms the stall rule.
      Environment one(cfg, field({{11.5, 5.5}, {40.5, 40.5}}));
      top_left(one);
      one.step(Action::kEast);
      for (int i = 0; i < 2 * w; ++i) one.step(i % 2 ? Action::kEast : Action::kWest);
      ok &= !one.state().done;
    }
    cfg.stopping = StoppingCriterion::coverage(0.5);
    {
      Environment env(cfg, field({}));
      top_left(env);
      const CoveragePlan plan = plan_row_by_row(48, 11, Corner::kTopLeft);
      double before = 0.0;
      for (Action act : plan.actions) {
        before = env.state().coverage_fraction();
        env.step(act);
        if (env.state().done) break;
      }
      ok &= env.state().done_reason == DoneReason::kCoverage && env.state().coverage_fraction() >= 0.5 &&
            before < 0.5;
    }
    cfg.stopping = StoppingCriterion::all_found();
    {
      Environment env(cfg, field({{11.5, 5.5}, {12.5, 5.5}}));
      top_left(env);
      env.step(Action::kEast);
      ok &= !env.state().done;
      env.step(Action::kEast);
      ok &= env.state().done && env.state().done_reason == DoneReason::kAllFound;
    }
    report(ok, "2.5", "stopping criteria on constructed scenarios", "stalled 15/25/50 with min-2, coverage 0.5, all-found");
  }
  const double t = seconds_since(t0);
  report(t < 60.0, "2.6", "environment suite runtime", fmt(t, 3) + " s (limit 60 s)");
}

// ------------------------------------------------------------- statistics

void statistics_suite() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const WelchResult r = welch_t_test(a, b), s = welch_t_test(b, a);
  std::vector<double> a2, b2;
  for (double v : a) a2.push_back(0.25 * v);
  for (double v : b) b2.push_back(0.25 * v);
  const WelchResult sc = welch_t_test(a2, b2);
  const bool ok = std::abs(r.t + 1.0) < 1e-9 && std::abs(r.dof - 8.0) < 1e-9 && std::abs(r.p_two_sided - 0.3466) < 1e-3 &&
                  s.t == -r.t && s.p_two_sided == r.p_two_sided && std::abs(sc.t - r.t) < 1e-12 &&
                  std::abs(sc.p_two_sided - r.p_two_sided) < 1e-12;
  report(ok, "3.1", "Welch test", "t " + fmt(r.t) + " dof " + fmt(r.dof) + " p " + fmt(r.p_two_sided) +
                                      ", antisymmetric, scale invariant");
  const double t = seconds_since(t0);
  report(t < 60.0, "3.2", "statistics suite runtime", fmt(t, 3) + " s (limit 60 s)");
}

// -------------------------------------------------------- desk-scale runs

ExperimentConfig desk(const std::vector<std::string>& presets, const fs::path& out) {
  std::vector<std::string> all{"desk-scale"};
  all.insert(all.end(), presets.begin(), presets.end());
  ExperimentConfig cfg = parse_config(all, "", {});
  cfg.seed = 1;
  cfg.out = out.string();
  return cfg;
}

// Trains unless the directory already holds a run of the same config.
fs::path train_cached(const ExperimentConfig& cfg, double& seconds) {
  const fs::path dir = cfg.out;
  if (fs::exists(dir / "checkpoint.qnet") && fs::exists(dir / "manifest.json")) {
    Manifest m = read_manifest(dir / "manifest.json");
    ExperimentConfig c = m.config;
    c.out = cfg.out;
    c.train.single_threaded = cfg.train.single_threaded;
    if (m.command == "train" && c == cfg) {
      std::cout << "  reusing " << dir << std::endl;
      return dir / "checkpoint.qnet";
    }
  }
  auto t0 = std::chrono::steady_clock::now();
  std::cout << "  training " << dir << std::endl;
  const TrainRun run = cmd_train(cfg);
  seconds += seconds_since(t0);
  return run.checkpoint;
}

double mean_found_at(const std::vector<EpisodeLog>& logs, long t) {
  double s = 0;
  for (const auto& l : logs) s += found_fraction_at(l, t);
  return s / static_cast<double>(logs.size());
}

void learning_suite(const fs::path& work) {
  auto t0 = std::chrono::steady_clock::now();
  double train_seconds = 0.0;

  const ExperimentConfig base_cfg = desk({}, work / "baseline");
  const EvalRun baseline = cmd_baseline(base_cfg);
  ExperimentConfig walk_cfg = desk({}, work / "random");
  walk_cfg.eval.policy = "random";
  const EvalRun walk = cmd_evaluate(walk_cfg);

  const double base_len = baseline.summary.path_length.mean;
  const long k = std::lround(0.4 * base_len);

  ExperimentConfig a_cfg = desk({}, work / "train_A");
  a_cfg.eval.checkpoint = train_cached(a_cfg, train_seconds).string();
  a_cfg.out = (work / "eval_A").string();
  const EvalRun a = cmd_evaluate(a_cfg);

  ExperimentConfig b_cfg = desk({"prior-none"}, work / "train_B");
  b_cfg.eval.checkpoint = train_cached(b_cfg, train_seconds).string();
  b_cfg.out = (work / "eval_B").string();
  const EvalRun b = cmd_evaluate(b_cfg);

  ExperimentConfig c_cfg = desk({"land"}, work / "train_C");
  c_cfg.eval.checkpoint = train_cached(c_cfg, train_seconds).string();
  c_cfg.out = (work / "eval_C").string();
  const EvalRun c = cmd_evaluate(c_cfg);

  const double fa = mean_found_at(a.logs, k), fb = mean_found_at(b.logs, k);
  const double fbase = mean_found_at(baseline.logs, k), fwalk = mean_found_at(walk.logs, k);
  report(fa >= fbase + 0.2 && fa >= fwalk + 0.25, "4.A", "trained policy beats baseline and random walk",
         "found@" + std::to_string(k) + ": dqn " + fmt(fa) + ", baseline " + fmt(fbase) + " (+0.2 needed), random " +
             fmt(fwalk) + " (+0.25 needed)");
  report(fa - fb >= 0.2, "4.B", "prior knowledge effect",
         "found@" + std::to_string(k) + ": perfect prior " + fmt(fa) + ", no prior " + fmt(fb) + " (gap >= 0.2 needed)");

  // Land probability before each decision against the fraction found so far.
  std::vector<double> land_p, found;
  const double lambda = c_cfg.train.lambda;
  for (const EpisodeLog& log : c.logs) {
    long prev = log.initial_found;
    for (const StepRecord& s : log.steps) {
      if (s.q_values.size() == 5) {
        const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(s.q_values.data(), 5);
        land_p.push_back(softmax_probabilities(q, lambda)(4));
        found.push_back(static_cast<double>(prev) / static_cast<double>(log.n_weeds()));
      }
      prev = s.cumulative_found;
    }
  }
  const double rho = spearman(land_p, found);
  long landed = 0;
  for (const auto& l : c.logs) landed += l.done_reason == DoneReason::kLanded;
  const double c_len = c.summary.path_length.mean, c_found = c.summary.terminal_found.mean;
  report(c_len < 0.6 * base_len && c_found >= 0.6 && rho > 0.0, "4.C", "learned landing",
         "path " + fmt(c_len) + " vs limit " + fmt(0.6 * base_len) + ", found " + fmt(c_found) +
             " (>= 0.6), land-probability rank correlation " + fmt(rho) + " (> 0), landed " +
             std::to_string(landed) + "/" + std::to_string(c.logs.size()));

  const double t = seconds_since(t0);
  report(t <= 7200.0, "4.T", "desk-scale experiment runtime",
         fmt(t, 4) + " s total, " + fmt(train_seconds, 4) + " s training this run (limit 7200 s)");
}

// -------------------------------------------------------- reproducibility

void reproducibility_suite(const fs::path& work) {
  const fs::path dir = work / "repro";
  fs::remove_all(dir);
  ExperimentConfig cfg = parse_config({"desk-scale"}, "",
                                      {"train.n_steps=3000", "train.buffer=1000", "train.batch=32",
                                       "train.val_interval=100", "train.n_val=4", "eval.n_episodes=10",
                                       "train.parallel_envs=3", "train.single_threaded=false"});
  cfg.seed = 5;
  cfg.out = (dir / "train").string();
  const TrainRun run = cmd_train(cfg);
  cfg.eval.checkpoint = run.checkpoint.string();
  cfg.out = (dir / "evaluate").string();
  cmd_evaluate(cfg);
  cfg.out = (dir / "baseline").string();
  cmd_baseline(cfg);
  cmd_compare(dir / "evaluate" / "summary.json", dir / "baseline" / "summary.json", 0.001, dir / "compare");
  cmd_render(dir / "evaluate" / "episodes.jsonl", 2, dir / "render");
  cfg.out = (dir / "generate").string();
  cmd_generate_field(cfg);

  bool ok = true;
  std::string detail;
  int files = 0;
  for (const char* name : {"train", "evaluate", "baseline", "compare", "render", "generate"}) {
    const fs::path orig = dir / name, again = dir / (std::string(name) + "_rerun");
    rerun(orig / "manifest.json", again);
    for (const auto& entry : fs::directory_iterator(orig)) {
      const std::string file = entry.path().filename().string();
      if (file == "manifest.json") continue;
      ++files;
      if (slurp(entry.path()) != slurp(again / file)) {
        ok = false;
        detail += " " + std::string(name) + "/" + file;
      }
    }
  }
  report(ok, "5", "manifest reruns reproduce outputs bit-exactly",
         std::to_string(files) + " files compared" + (ok ? "" : ", differing:" + detail));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work = "acceptance_work";
  bool skip_learning = false;
  app.add_option("--work", work, "directory for runs (desk-scale checkpoints are reused)");
  app.add_flag("--skip-learning", skip_learning, "skip the desk-scale training experiment");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  try {
    numerical_kernels();
    environment_suite();
    statistics_suite();
    if (!skip_learning) learning_suite(work);
    reproducibility_suite(work);
  } catch (const std::exception& e) {
    std::cout << "FAIL exception: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
