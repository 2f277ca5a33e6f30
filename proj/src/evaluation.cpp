#include "uavsearch/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

namespace uavsearch {

using nlohmann::json;

namespace {

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

void write_field_part(std::ostream& os, const EnvConfig& cfg) {
  os << std::setprecision(17);
  os << "M=" << cfg.field.M << ";kind=" << to_string(cfg.field.kind) << ";obj=" << cfg.field.obj_mu << ','
     << cfg.field.obj_sigma << ";dist=" << cfg.field.dist_mu << ',' << cfg.field.dist_sigma << ";cov=";
  for (const auto& c : cfg.field.covariances) os << c(0, 0) << ',' << c(0, 1) << ',' << c(1, 0) << ',' << c(1, 1) << '|';
}

}  // namespace

std::string field_fingerprint(const EnvConfig& cfg) {
  std::ostringstream os;
  write_field_part(os, cfg);
  return fnv_hex(os.str());
}

std::string config_fingerprint(const EnvConfig& cfg) {
  std::ostringstream os;
  write_field_part(os, cfg);
  os << ";det=" << cfg.detection.r_fp << ',' << cfg.detection.r_fn << ',' << cfg.detection.pos_sigma
     << ";prior=" << cfg.prior.r_fp << ',' << cfg.prior.r_fn << ',' << cfg.prior.pos_sigma << ',' << cfg.prior.P
     << ";F=" << cfg.F << ";g=" << cfg.g_global << ";b=" << cfg.b_init << ',' << cfg.b_step
     << ";r=" << cfg.rewards.detect << ',' << cfg.rewards.nfz << ',' << cfg.rewards.step << ',' << cfg.rewards.crash
     << ";stop=" << cfg.stopping.to_string() << ";land=" << cfg.land_action;
  return fnv_hex(os.str());
}

EpisodeLog run_episode(Environment& env, Policy& policy, std::uint64_t seed) {
  EpisodeLog log;
  Observation obs = env.reset(seed);
  const EnvState& state = env.state();
  log.fingerprint = config_fingerprint(env.config());
  log.seed = seed;
  log.M = state.field.M;
  log.F = env.config().F;
  log.start = state.start;
  log.weeds = state.field.weeds;
  log.initial_found = state.total_found;
  log.found_step.assign(state.field.size(), -1);
  for (std::size_t i = 0; i < state.found.size(); ++i) {
    if (state.found[i]) log.found_step[i] = 0;
  }
  policy.begin_episode(state, seed);

  while (!state.done) {
    const std::optional<Action> action = policy.act(state, obs);
    if (!action) {
      log.done_reason = DoneReason::kPlanComplete;
      break;
    }
    StepRecord rec;
    if (const Eigen::VectorXd* q = policy.last_values()) rec.q_values.assign(q->data(), q->data() + q->size());
    StepResult res = env.step(*action);
    rec.step = state.steps;
    rec.pos = state.drone;
    rec.action = *action;
    rec.reward = res.reward;
    rec.newly_found = res.info.newly_found;
    rec.cumulative_found = state.total_found;
    rec.budget = res.obs.budget;
    rec.hit_boundary = res.info.hit_boundary;
    rec.done_reason = res.info.reason;
    if (rec.newly_found > 0) {
      for (std::size_t i = 0; i < state.found.size(); ++i) {
        if (state.found[i] && log.found_step[i] < 0) log.found_step[i] = rec.step;
      }
    }
    log.reward_sum += rec.reward;
    if (*action != Action::kLand) ++log.path_length;
    log.steps.push_back(std::move(rec));
    obs = std::move(res.obs);
  }
  if (state.done) log.done_reason = state.done_reason;
  log.boundary_hits = state.boundary_hits;
  log.found_fraction = state.found_fraction();
  return log;
}

double found_fraction_at(const EpisodeLog& log, long t) {
  if (log.weeds.empty()) return 1.0;
  long found = log.initial_found;
  if (t > 0 && !log.steps.empty()) {
    const auto idx = static_cast<std::size_t>(std::min<long>(t, static_cast<long>(log.steps.size()))) - 1;
    found = log.steps[idx].cumulative_found;
  }
  return static_cast<double>(found) / static_cast<double>(log.weeds.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  // Shifted by the first value so identical samples give an exact mean.
  const double shift = values.front();
  double dev = 0.0;
  for (double v : values) dev += v - shift;
  out.mean = shift + dev / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

EvalSummary aggregate(std::span<const EpisodeLog> logs, std::vector<long> checkpoints, std::string label) {
  if (logs.empty()) throw std::invalid_argument("aggregate: no episode logs");
  for (const EpisodeLog& log : logs) {
    if (log.fingerprint != logs.front().fingerprint) {
      throw std::invalid_argument("aggregate: logs come from different environment configs");
    }
  }
  EvalSummary s;
  s.label = std::move(label);
  s.fingerprint = logs.front().fingerprint;
  s.n_episodes = static_cast<long>(logs.size());
  s.checkpoints = std::move(checkpoints);

  std::vector<double> values(logs.size());
  auto collect = [&](auto&& fn) {
    std::transform(logs.begin(), logs.end(), values.begin(), fn);
    return mean_std(values);
  };
  for (long t : s.checkpoints) {
    s.found_at.push_back(collect([t](const EpisodeLog& l) { return found_fraction_at(l, t); }));
  }
  s.path_length = collect([](const EpisodeLog& l) { return static_cast<double>(l.path_length); });
  s.terminal_found = collect([](const EpisodeLog& l) { return l.found_fraction; });
  s.reward = collect([](const EpisodeLog& l) { return l.reward_sum; });

  std::size_t longest = 0;
  for (const EpisodeLog& l : logs) longest = std::max(longest, l.steps.size());
  s.curve.assign(longest + 1, 0.0);
  std::vector<double> column(logs.size());
  for (std::size_t t = 0; t <= longest; ++t) {
    for (std::size_t i = 0; i < logs.size(); ++i) column[i] = found_fraction_at(logs[i], static_cast<long>(t));
    s.curve[t] = mean_std(column).mean;
  }
  return s;
}

WelchResult welch_t_test(MeanStd a, long n_a, MeanStd b, long n_b) {
  WelchResult r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double va = a.std * a.std / static_cast<double>(n_a);
  const double vb = b.std * b.std / static_cast<double>(n_b);
  const double se2 = va + vb;
  if (n_a < 2 || n_b < 2 || !(se2 > 0.0) || !std::isfinite(se2)) {
    r.t = r.dof = r.p_two_sided = nan;
    r.degenerate = true;
    return r;
  }
  r.t = (a.mean - b.mean) / std::sqrt(se2);
  r.dof = se2 * se2 / (va * va / static_cast<double>(n_a - 1) + vb * vb / static_cast<double>(n_b - 1));
  const boost::math::students_t dist(r.dof);
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p_two_sided = std::min(1.0, r.p_two_sided);
  return r;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  return welch_t_test(mean_std(a), static_cast<long>(a.size()), mean_std(b), static_cast<long>(b.size()));
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), static_cast<Eigen::Index>(rx.size()));
  const Eigen::Map<const Eigen::VectorXd> b(ry.data(), static_cast<Eigen::Index>(ry.size()));
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return da.dot(db) / denom;
}

ComparisonTable compare(const EvalSummary& policy, const EvalSummary& baseline, double alpha) {
  if (policy.checkpoints != baseline.checkpoints) {
    throw std::invalid_argument("compare: summaries use different checkpoints");
  }
  ComparisonTable table;
  table.checkpoints = baseline.checkpoints;
  table.alpha = alpha;
  auto row_for = [&](const EvalSummary& s, bool is_baseline) {
    ComparisonRow row;
    row.method = s.label.empty() ? (is_baseline ? "baseline" : "policy") : s.label;
    row.found_at = s.found_at;
    row.terminal_found = s.terminal_found;
    row.path_length = s.path_length;
    row.found_star.assign(s.found_at.size(), false);
    if (!is_baseline) {
      for (std::size_t i = 0; i < s.found_at.size(); ++i) {
        const WelchResult w = welch_t_test(s.found_at[i], s.n_episodes, baseline.found_at[i], baseline.n_episodes);
        row.found_star[i] = !w.degenerate && w.p_two_sided < alpha && w.t > 0.0;
      }
      const WelchResult w = welch_t_test(s.path_length, s.n_episodes, baseline.path_length, baseline.n_episodes);
      row.path_star = !w.degenerate && w.p_two_sided < alpha && w.t < 0.0;
    }
    return row;
  };
  table.rows.push_back(row_for(baseline, true));
  table.rows.push_back(row_for(policy, false));
  return table;
}

ComparisonTable compare(std::span<const EpisodeLog> policy_logs, std::span<const EpisodeLog> baseline_logs,
                        std::vector<long> checkpoints, double alpha) {
  return compare(aggregate(policy_logs, checkpoints, "policy"), aggregate(baseline_logs, checkpoints, "baseline"),
                 alpha);
}

namespace {

std::string format_cell(const MeanStd& v, int precision, bool star) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v.mean << "±" << v.std << (star ? "*" : "");
  return os.str();
}

}  // namespace

void write_table_text(std::ostream& os, const ComparisonTable& table) {
  os << std::left << std::setw(16) << "Method";
  for (long t : table.checkpoints) os << std::setw(14) << (std::to_string(t) + " steps");
  os << std::setw(14) << "found" << "path length\n";
  for (const ComparisonRow& row : table.rows) {
    os << std::setw(16) << row.method;
    for (std::size_t i = 0; i < row.found_at.size(); ++i) {
      // "±" is two bytes in UTF-8; pad one extra column.
      os << std::setw(15) << format_cell(row.found_at[i], 2, row.found_star[i]);
    }
    os << std::setw(15) << format_cell(row.terminal_found, 2, false)
       << format_cell(row.path_length, 0, row.path_star) << '\n';
  }
  os << "* significant at alpha=" << table.alpha << " (Welch's t-test)\n";
}

void write_table_tsv(std::ostream& os, const ComparisonTable& table) {
  os << "method";
  for (long t : table.checkpoints) os << "\tfound_" << t << "_mean\tfound_" << t << "_std\tfound_" << t << "_star";
  os << "\tterminal_found_mean\tterminal_found_std\tpath_mean\tpath_std\tpath_star\n";
  os << std::setprecision(17);
  for (const ComparisonRow& row : table.rows) {
    os << row.method;
    for (std::size_t i = 0; i < row.found_at.size(); ++i) {
      os << '\t' << row.found_at[i].mean << '\t' << row.found_at[i].std << '\t' << (row.found_star[i] ? 1 : 0);
    }
    os << '\t' << row.terminal_found.mean << '\t' << row.terminal_found.std << '\t' << row.path_length.mean
       << '\t' << row.path_length.std << '\t' << (row.path_star ? 1 : 0) << '\n';
  }
}

void write_episode_log(std::ostream& os, const EpisodeLog& log) {
  json header = {{"type", "header"}, {"fingerprint", log.fingerprint}, {"seed", log.seed},
                 {"M", log.M},       {"F", log.F},                     {"start", {log.start.row, log.start.col}},
                 {"initial_found", log.initial_found}};
  json weeds = json::array();
  for (const Weed& w : log.weeds) weeds.push_back({w.x, w.y, w.cluster});
  header["weeds"] = std::move(weeds);
  os << header.dump() << '\n';
  for (const StepRecord& r : log.steps) {
    json rec = {{"type", "step"},
                {"step", r.step},
                {"row", r.pos.row},
                {"col", r.pos.col},
                {"action", to_string(r.action)},
                {"reward", r.reward},
                {"newly_found", r.newly_found},
                {"cumulative_found", r.cumulative_found},
                {"budget", r.budget},
                {"hit_boundary", r.hit_boundary}};
    if (r.done_reason != DoneReason::kNone) rec["done_reason"] = to_string(r.done_reason);
    if (!r.q_values.empty()) rec["q"] = r.q_values;
    os << rec.dump() << '\n';
  }
  json footer = {{"type", "footer"},
                 {"steps", log.steps.size()},
                 {"path_length", log.path_length},
                 {"found_fraction", log.found_fraction},
                 {"reward_sum", log.reward_sum},
                 {"boundary_hits", log.boundary_hits},
                 {"done_reason", to_string(log.done_reason)},
                 {"found_step", log.found_step}};
  os << footer.dump() << '\n';
}

namespace {

Action parse_action(const std::string& s) {
  for (Action a : {Action::kNorth, Action::kEast, Action::kSouth, Action::kWest, Action::kLand}) {
    if (to_string(a) == s) return a;
  }
  throw std::runtime_error("episode log: unknown action '" + s + "'");
}

bool read_one(std::istream& is, EpisodeLog& log) {
  std::string line;
  while (std::getline(is, line) && line.empty()) {
  }
  if (line.empty()) return false;
  json header = json::parse(line);
  if (header.at("type") != "header") throw std::runtime_error("episode log: expected a header record");
  log = EpisodeLog{};
  log.fingerprint = header.at("fingerprint").get<std::string>();
  log.seed = header.at("seed").get<std::uint64_t>();
  log.M = header.at("M").get<int>();
  log.F = header.at("F").get<int>();
  log.start = {header.at("start").at(0).get<int>(), header.at("start").at(1).get<int>()};
  log.initial_found = header.at("initial_found").get<long>();
  for (const json& w : header.at("weeds")) log.weeds.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<int>()});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const std::string type = rec.at("type").get<std::string>();
    if (type == "footer") {
      log.path_length = rec.at("path_length").get<long>();
      log.found_fraction = rec.at("found_fraction").get<double>();
      log.reward_sum = rec.at("reward_sum").get<double>();
      log.boundary_hits = rec.at("boundary_hits").get<long>();
      log.done_reason = parse_done_reason(rec.at("done_reason").get<std::string>());
      log.found_step = rec.at("found_step").get<std::vector<long>>();
      return true;
    }
    if (type != "step") throw std::runtime_error("episode log: unexpected record type '" + type + "'");
    StepRecord r;
    r.step = rec.at("step").get<long>();
    r.pos = {rec.at("row").get<int>(), rec.at("col").get<int>()};
    r.action = parse_action(rec.at("action").get<std::string>());
    r.reward = rec.at("reward").get<double>();
    r.newly_found = rec.at("newly_found").get<long>();
    r.cumulative_found = rec.at("cumulative_found").get<long>();
    r.budget = rec.at("budget").get<double>();
    r.hit_boundary = rec.at("hit_boundary").get<bool>();
    if (rec.contains("done_reason")) r.done_reason = parse_done_reason(rec.at("done_reason").get<std::string>());
    if (rec.contains("q")) r.q_values = rec.at("q").get<std::vector<double>>();
    log.steps.push_back(std::move(r));
  }
  throw std::runtime_error("episode log: missing footer record");
}

}  // namespace

EpisodeLog read_episode_log(std::istream& is) {
  EpisodeLog log;
  if (!read_one(is, log)) throw std::runtime_error("episode log: empty input");
  return log;
}

std::vector<EpisodeLog> read_episode_logs(std::istream& is) {
  std::vector<EpisodeLog> logs;
  EpisodeLog log;
  while (read_one(is, log)) logs.push_back(std::move(log));
  return logs;
}

namespace {

json to_json(const MeanStd& v) { return {{"mean", v.mean}, {"std", v.std}}; }
MeanStd mean_std_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

void write_summary_json(std::ostream& os, const EvalSummary& s) {
  json found = json::array();
  for (const MeanStd& v : s.found_at) found.push_back(to_json(v));
  json j = {{"label", s.label},
            {"fingerprint", s.fingerprint},
            {"family", s.family},
            {"n_episodes", s.n_episodes},
            {"checkpoints", s.checkpoints},
            {"found_at", found},
            {"path_length", to_json(s.path_length)},
            {"terminal_found", to_json(s.terminal_found)},
            {"reward", to_json(s.reward)},
            {"curve", s.curve}};
  os << j.dump(2) << '\n';
}

EvalSummary read_summary_json(std::istream& is) {
  const json j = json::parse(is);
  EvalSummary s;
  s.label = j.at("label").get<std::string>();
  s.fingerprint = j.at("fingerprint").get<std::string>();
  s.family = j.value("family", std::string());
  s.n_episodes = j.at("n_episodes").get<long>();
  s.checkpoints = j.at("checkpoints").get<std::vector<long>>();
  for (const json& v : j.at("found_at")) s.found_at.push_back(mean_std_from(v));
  s.path_length = mean_std_from(j.at("path_length"));
  s.terminal_found = mean_std_from(j.at("terminal_found"));
  s.reward = mean_std_from(j.at("reward"));
  s.curve = j.at("curve").get<std::vector<double>>();
  return s;
}

void write_summary_tsv(std::ostream& os, const EvalSummary& s) {
  os << std::setprecision(17) << "metric\tmean\tstd\n";
  for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
    os << "found_at_" << s.checkpoints[i] << '\t' << s.found_at[i].mean << '\t' << s.found_at[i].std << '\n';
  }
  os << "terminal_found\t" << s.terminal_found.mean << '\t' << s.terminal_found.std << '\n';
  os << "path_length\t" << s.path_length.mean << '\t' << s.path_length.std << '\n';
  os << "reward\t" << s.reward.mean << '\t' << s.reward.std << '\n';
}

void write_curve(std::ostream& os, const EvalSummary& s) {
  os << std::setprecision(17);
  for (std::size_t t = 0; t < s.curve.size(); ++t) os << t << '\t' << s.curve[t] << '\n';
}

}  // namespace uavsearch
