#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "uavsearch/baseline.hpp"
#include "uavsearch/evaluation.hpp"
#include "uavsearch/render.hpp"

using namespace uavsearch;

namespace {

// Synthetic log: n weeds, cumulative counts per step.
EpisodeLog synthetic(int n, long initial, std::vector<long> cumulative, std::string fp = "f") {
  EpisodeLog log;
  log.fingerprint = std::move(fp);
  log.M = 8;
  log.F = 3;
  log.start = {1, 1};
  for (int i = 0; i < n; ++i) log.weeds.push_back({0.5 + i % 8, 0.5 + i / 8, 0});
  log.found_step.assign(n, -1);
  log.initial_found = initial;
  Cell pos = log.start;
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    StepRecord r;
    r.step = static_cast<long>(i) + 1;
    r.action = i % 2 ? Action::kSouth : Action::kEast;
    pos = move(pos, r.action);
    r.pos = pos;
    r.cumulative_found = cumulative[i];
    r.newly_found = cumulative[i] - (i ? cumulative[i - 1] : initial);
    r.reward = -0.5 + r.newly_found;
    log.steps.push_back(r);
  }
  log.path_length = static_cast<long>(cumulative.size());
  log.found_fraction = n ? static_cast<double>(cumulative.empty() ? initial : cumulative.back()) / n : 1.0;
  return log;
}

EnvConfig perfect_small() {
  EnvConfig cfg;
  cfg.field.M = 16;
  cfg.field.obj_mu = 20;
  cfg.field.obj_sigma = 4;
  cfg.field.dist_mu = 2;
  cfg.field.dist_sigma = 0;
  cfg.F = 5;
  cfg.prior.P = 16;
  cfg.detection = {0, 0, 0};
  return cfg;
}

}  // namespace

TEST_CASE("run_episode") {
  SUBCASE("immediate land") {
    EnvConfig cfg = perfect_small();
    cfg.land_action = true;
    Environment env(cfg);
    LandPolicy land;
    const EpisodeLog log = run_episode(env, land, 5);
    CHECK(log.path_length == 0);
    CHECK(log.done_reason == DoneReason::kLanded);
    CHECK(log.found_fraction == static_cast<double>(log.initial_found) / log.n_weeds());
  }
  SUBCASE("baseline with a zero-error detector finds everything, path deterministic") {
    EnvConfig cfg;
    cfg.detection = {0, 0, 0};
    cfg.stopping = StoppingCriterion::coverage(1.0);
    Environment env(cfg);
    std::vector<EpisodeLog> logs;
    for (std::uint64_t s = 0; s < 100; ++s) {
      RowByRowPolicy plan;
      logs.push_back(run_episode(env, plan, s));
      CHECK(logs.back().found_fraction == 1.0);
    }
    const EvalSummary sum = aggregate(logs);
    CHECK(sum.path_length.std == 0.0);
    CHECK(sum.path_length.mean >= 270);
    CHECK(sum.path_length.mean <= 290);
    CHECK(sum.terminal_found.mean == 1.0);
  }
  SUBCASE("moderate detector errors miss weeds") {
    EnvConfig cfg;
    cfg.detection = {0.04, 0.25, 0.5};
    cfg.stopping = StoppingCriterion::coverage(1.0);
    Environment env(cfg);
    std::vector<EpisodeLog> logs;
    for (std::uint64_t s = 0; s < 20; ++s) {
      RowByRowPolicy plan;
      logs.push_back(run_episode(env, plan, s));
    }
    CHECK(aggregate(logs).terminal_found.mean < 1.0);
  }
  SUBCASE("fixed seed is reproducible") {
    Environment env(perfect_small());
    RandomWalkPolicy a, b;
    std::ostringstream x, y;
    write_episode_log(x, run_episode(env, a, 9));
    write_episode_log(y, run_episode(env, b, 9));
    CHECK(x.str() == y.str());
  }
}

TEST_CASE("random walk trails the baseline at step 100") {
  EnvConfig cfg;
  cfg.stopping = StoppingCriterion::coverage(1.0);
  Environment env(cfg);
  std::vector<EpisodeLog> walk, plan;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    RandomWalkPolicy w;
    RowByRowPolicy p;
    walk.push_back(run_episode(env, w, s));
    plan.push_back(run_episode(env, p, s));
  }
  const double w100 = aggregate(walk).found_at[0].mean;
  const double p100 = aggregate(plan).found_at[0].mean;
  MESSAGE("found@100: random walk " << w100 << ", baseline " << p100);
  CHECK(w100 < p100);
}

TEST_CASE("found_fraction_at") {
  const EpisodeLog log = synthetic(4, 1, {1, 2, 2, 4});
  CHECK(found_fraction_at(log, 0) == 0.25);
  CHECK(found_fraction_at(log, 2) == 0.5);
  CHECK(found_fraction_at(log, 4) == 1.0);
  CHECK(found_fraction_at(log, 400) == 1.0);
  for (long t = 1; t < 10; ++t) CHECK(found_fraction_at(log, t) >= found_fraction_at(log, t - 1));
  CHECK(found_fraction_at(synthetic(0, 0, {0, 0}), 1) == 1.0);
}

TEST_CASE("aggregate") {
  const EpisodeLog one = synthetic(10, 2, {3, 5, 8});
  SUBCASE("single log") {
    const EvalSummary s = aggregate(std::vector<EpisodeLog>{one}, {1, 2, 5});
    CHECK(s.found_at[0].mean == 0.3);
    CHECK(s.found_at[2].mean == 0.8);
    CHECK(s.found_at[2].std == 0.0);
    CHECK(s.path_length.mean == 3);
    CHECK(s.n_episodes == 1);
  }
  SUBCASE("two-point statistics") {
    const std::vector<EpisodeLog> logs{synthetic(10, 0, {8}), synthetic(10, 0, {10})};
    const EvalSummary s = aggregate(logs, {100});
    CHECK(std::abs(s.found_at[0].mean - 0.9) < 1e-12);
    CHECK(std::abs(s.found_at[0].std - std::sqrt(0.02)) < 1e-12);
  }
  SUBCASE("K copies") {
    const std::vector<EpisodeLog> logs(7, one);
    const EvalSummary s = aggregate(logs, {1, 2, 3});
    for (std::size_t i = 0; i < s.curve.size(); ++i)
      CHECK(s.curve[i] == found_fraction_at(one, static_cast<long>(i)));
    for (const MeanStd& m : s.found_at) CHECK(m.std == 0.0);
  }
  SUBCASE("curve is non-decreasing") {
    Environment env(perfect_small());
    std::vector<EpisodeLog> logs;
    for (std::uint64_t s = 0; s < 200; ++s) {
      RandomWalkPolicy w;
      logs.push_back(run_episode(env, w, s));
    }
    const EvalSummary s = aggregate(logs);
    for (std::size_t i = 1; i < s.curve.size(); ++i) CHECK(s.curve[i] >= s.curve[i - 1]);
  }
  SUBCASE("rejects empty and mixed sets") {
    CHECK_THROWS_AS(aggregate(std::vector<EpisodeLog>{}), std::invalid_argument);
    const std::vector<EpisodeLog> mixed{one, synthetic(10, 0, {1}, "other")};
    CHECK_THROWS_AS(aggregate(mixed), std::invalid_argument);
  }
}

TEST_CASE("welch_t_test") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const WelchResult r = welch_t_test(a, b);
  CHECK(std::abs(r.t + 1.0) < 1e-12);
  CHECK(std::abs(r.dof - 8.0) < 1e-12);
  CHECK(std::abs(r.p_two_sided - 0.3466) < 1e-3);

  const WelchResult same = welch_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p_two_sided == 1.0);

  const WelchResult swapped = welch_t_test(b, a);
  CHECK(swapped.t == -r.t);
  CHECK(swapped.p_two_sided == r.p_two_sided);

  std::vector<double> a3, b3;
  for (double v : a) a3.push_back(3.7 * v);
  for (double v : b) b3.push_back(3.7 * v);
  const WelchResult scaled = welch_t_test(a3, b3);
  CHECK(std::abs(scaled.t - r.t) < 1e-12);
  CHECK(std::abs(scaled.p_two_sided - r.p_two_sided) < 1e-12);

  const std::vector<double> c{2, 2, 2}, d{3, 3, 3};
  const WelchResult deg = welch_t_test(c, d);
  CHECK(deg.degenerate);
  CHECK(std::isnan(deg.p_two_sided));

  const WelchResult sig = welch_t_test(MeanStd{0.9, 0.1}, 1000, MeanStd{0.37, 0.08}, 1000);
  CHECK(sig.t > 0);
  CHECK(sig.p_two_sided < 1e-3);
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, z{4, 3, 2, 1};
  CHECK(std::abs(spearman(x, y) - 1.0) < 1e-12);
  CHECK(std::abs(spearman(x, z) + 1.0) < 1e-12);
  const std::vector<double> t{1, 1, 2, 2}, u{1, 2, 3, 4};
  CHECK(std::abs(spearman(t, u) - 0.894427191) < 1e-8);
  CHECK(std::isnan(spearman(x, std::vector<double>{1, 1, 1, 1})));
}

TEST_CASE("compare") {
  std::vector<EpisodeLog> pol, base;
  for (int i = 0; i < 30; ++i) {
    std::vector<long> c{static_cast<long>(i % 4), static_cast<long>(5 + i % 3)};
    if (i % 3 == 0) c.push_back(c.back());
    pol.push_back(synthetic(10, 0, c));
    base.push_back(synthetic(10, 0, {0, 1, 1, static_cast<long>(1 + i % 2)}));
  }
  SUBCASE("self comparison has no stars") {
    const ComparisonTable t = compare(pol, pol, {1, 2});
    for (const auto& row : t.rows) {
      for (bool s : row.found_star) CHECK(!s);
      CHECK(!row.path_star);
    }
  }
  SUBCASE("better policy is starred; constant baseline path is fine") {
    const ComparisonTable t = compare(pol, base, {2, 4}, 0.001);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1].found_star[0]);
    CHECK(t.rows[1].path_star);
    CHECK(t.rows[0].path_length.std == 0.0);
    std::ostringstream text, tsv;
    write_table_text(text, t);
    write_table_tsv(tsv, t);
    CHECK(!text.str().empty());
    CHECK(tsv.str().find('\t') != std::string::npos);
  }
  SUBCASE("checkpoint mismatch") {
    const EvalSummary a = aggregate(pol, {1}), b = aggregate(base, {2});
    CHECK_THROWS_AS(compare(a, b), std::invalid_argument);
  }
}

TEST_CASE("serialization round trips") {
  Environment env(perfect_small());
  RandomWalkPolicy w;
  const EpisodeLog log = run_episode(env, w, 3);
  std::stringstream ss;
  write_episode_log(ss, log);
  write_episode_log(ss, log);
  const std::vector<EpisodeLog> back = read_episode_logs(ss);
  REQUIRE(back.size() == 2);
  std::ostringstream again;
  write_episode_log(again, back[1]);
  std::ostringstream orig;
  write_episode_log(orig, log);
  CHECK(again.str() == orig.str());
  CHECK(back[0].path_length == log.path_length);
  CHECK(back[0].found_step == log.found_step);

  EvalSummary s = aggregate(std::vector<EpisodeLog>{log}, {5, 10});
  s.family = "abc";
  std::stringstream js;
  write_summary_json(js, s);
  const EvalSummary r = read_summary_json(js);
  CHECK(r.family == "abc");
  CHECK(r.found_at[1].mean == s.found_at[1].mean);
  CHECK(r.curve == s.curve);
}

TEST_CASE("render") {
  SUBCASE("colour changes at the threshold step") {
    const EpisodeLog log = synthetic(10, 0, {2, 5, 8, 8, 9});
    CHECK(threshold_step(log, 0.8) == 3);
    CHECK(threshold_step(log, 0.95) == -1);
    const std::string svg = render_svg(log);
    CHECK(svg.find("#d62728") != std::string::npos);
    CHECK(svg.find("#1f77b4") != std::string::npos);
    // Red ends and blue starts at the position reached on step 3.
    const Cell p3 = log.steps[2].pos;
    std::ostringstream c3;
    c3 << (p3.col + 0.5) * 12 << ',' << (p3.row + 0.5) * 12;
    auto points = [&](const std::string& colour) {
      const auto at = svg.find("stroke=\"" + colour + "\"");
      const auto from = svg.find("points=\"", at) + 8;
      return svg.substr(from, svg.find('"', from) - from);
    };
    const std::string red = points("#d62728"), blue = points("#1f77b4");
    CHECK(red.substr(red.rfind(' ') + 1) == c3.str());
    CHECK(blue.substr(0, blue.find(' ')) == c3.str());
    CHECK(std::count(red.begin(), red.end(), ' ') == 3);
  }
  SUBCASE("empty field draws grid and path only") {
    const EpisodeLog log = synthetic(0, 0, {0, 0, 0});
    const std::string svg = render_svg(log);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("#1f3a1f") == std::string::npos);
    CHECK(svg.find("#a0a0a0") == std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
  }
}
