#include "uavsearch/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uavsearch {

std::string to_string(Action action) {
  switch (action) {
    case Action::kNorth: return "N";
    case Action::kEast: return "E";
    case Action::kSouth: return "S";
    case Action::kWest: return "W";
    case Action::kLand: return "L";
  }
  return "?";
}

Cell move(Cell from, Action action) {
  switch (action) {
    case Action::kNorth: return {from.row - 1, from.col};
    case Action::kEast: return {from.row, from.col + 1};
    case Action::kSouth: return {from.row + 1, from.col};
    case Action::kWest: return {from.row, from.col - 1};
    case Action::kLand: return from;
  }
  return from;
}

std::string to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::kNone: return "none";
    case DoneReason::kAllFound: return "all_found";
    case DoneReason::kCrashed: return "crashed";
    case DoneReason::kLanded: return "landed";
    case DoneReason::kCoverage: return "coverage";
    case DoneReason::kStalled: return "stalled";
    case DoneReason::kPlanComplete: return "plan_complete";
  }
  return "none";
}

DoneReason parse_done_reason(const std::string& text) {
  for (auto r : {DoneReason::kNone, DoneReason::kAllFound, DoneReason::kCrashed,
                 DoneReason::kLanded, DoneReason::kCoverage, DoneReason::kStalled,
                 DoneReason::kPlanComplete}) {
    if (to_string(r) == text) return r;
  }
  throw std::invalid_argument("unknown done reason '" + text + "'");
}

void StoppingCriterion::validate() const {
  if (kind == Kind::kCoverage && !(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("coverage fraction must be in (0, 1]");
  }
  if (kind == Kind::kNoNewDetections && window < 1) {
    throw std::invalid_argument("stall window must be >= 1");
  }
}

std::string StoppingCriterion::to_string() const {
  switch (kind) {
    case Kind::kAllFound: return "all_found";
    case Kind::kCoverage: {
      std::string s = std::to_string(fraction);
      while (s.size() > 1 && s.back() == '0') s.pop_back();
      if (s.back() == '.') s.pop_back();
      return "coverage:" + s;
    }
    case Kind::kNoNewDetections: return "stalled:" + std::to_string(window);
    case Kind::kLearnedLand: return "learned_land";
  }
  return "all_found";
}

StoppingCriterion StoppingCriterion::parse(const std::string& text) {
  StoppingCriterion out;
  if (text == "all_found") {
    out = all_found();
  } else if (text == "learned_land") {
    out = learned_land();
  } else if (text.rfind("coverage:", 0) == 0) {
    out = coverage(std::stod(text.substr(9)));
  } else if (text.rfind("stalled:", 0) == 0) {
    out = no_new_detections(std::stoi(text.substr(8)));
  } else {
    throw std::invalid_argument("unknown stopping criterion '" + text + "'");
  }
  out.validate();
  return out;
}

void EnvConfig::validate() const {
  field.validate();
  detection.validate();
  prior.validate(field.M);
  if (F < 1 || F % 2 == 0) throw std::invalid_argument("F must be odd");
  if (F > field.M) throw std::invalid_argument("F must not exceed M");
  if (g_global < 1) throw std::invalid_argument("g_global must be >= 1");
  if (!(b_init > 0.0)) throw std::invalid_argument("b_init must be > 0");
  if (!(b_step > 0.0)) throw std::invalid_argument("b_step must be > 0");
  stopping.validate();
  if (stopping.kind == StoppingCriterion::Kind::kLearnedLand && !land_action) {
    throw std::invalid_argument("learned_land stopping requires the land action");
  }
}

namespace {

bool battery_empty(double b_init, double b_step, long steps) {
  return b_init - static_cast<double>(steps) * b_step <= 1e-9 * b_init;
}

bool inside(Cell c, int M) { return c.row >= 0 && c.col >= 0 && c.row < M && c.col < M; }

}  // namespace

long EnvConfig::max_steps() const {
  long steps = static_cast<long>(std::floor(b_init / b_step)) - 1;
  if (steps < 1) steps = 1;
  while (!battery_empty(b_init, b_step, steps)) ++steps;
  while (steps > 1 && battery_empty(b_init, b_step, steps - 1)) --steps;
  return steps;
}

double EnvState::coverage_fraction() const {
  const double cells = static_cast<double>(field.M) * field.M;
  return cells > 0 ? static_cast<double>(covered_cells) / cells : 1.0;
}

double EnvState::found_fraction() const {
  return field.weeds.empty() ? 1.0
                             : static_cast<double>(total_found) / static_cast<double>(field.size());
}

Eigen::VectorXd encode_local(const EnvState& state, int F) {
  const int M = state.field.M;
  const int h = F / 2;
  const int area = F * F;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * area);
  for (int r = 0; r < F; ++r) {
    for (int c = 0; c < F; ++c) {
      const Cell cell{state.drone.row - h + r, state.drone.col - h + c};
      const int idx = r * F + c;
      if (!inside(cell, M)) {
        out(idx) = 1.0;
        continue;
      }
      out(area + idx) = state.detected_memory(cell.row, cell.col);
      out(2 * area + idx) = state.current_detection(r, c);
    }
  }
  return out;
}

Eigen::VectorXd encode_global(const EnvState& state, int g_global) {
  const int M = state.field.M;
  const int S = 2 * M - 1;
  const int row_off = M - 1 - state.drone.row;
  const int col_off = M - 1 - state.drone.col;

  GridMap area = GridMap::Ones(S, S);
  GridMap detected = GridMap::Zero(S, S);
  GridMap prior = GridMap::Zero(S, S);
  area.block(row_off, col_off, M, M).setZero();
  detected.block(row_off, col_off, M, M) = state.detected_memory;
  prior.block(row_off, col_off, M, M) = state.prior_map;

  const GridMap layers[3] = {avg_pool(area, g_global), avg_pool(detected, g_global),
                             avg_pool(prior, g_global)};
  const Eigen::Index G = layers[0].rows();
  Eigen::VectorXd out(3 * G * G);
  for (int l = 0; l < 3; ++l) {
    for (Eigen::Index r = 0; r < G; ++r) {
      for (Eigen::Index c = 0; c < G; ++c) out(l * G * G + r * G + c) = layers[l](r, c);
    }
  }
  return out;
}

double budget_scalar(const EnvState& state, const EnvConfig& cfg) {
  const double b = cfg.b_init - static_cast<double>(state.steps) * cfg.b_step;
  return std::clamp(b / cfg.b_init, 0.0, 1.0);
}

std::optional<DoneReason> check_stop(const EnvState& state, const StoppingCriterion& criterion) {
  using Kind = StoppingCriterion::Kind;
  switch (criterion.kind) {
    case Kind::kAllFound:
      if (state.total_found == static_cast<long>(state.field.size())) return DoneReason::kAllFound;
      break;
    case Kind::kCoverage:
      if (state.coverage_fraction() >= criterion.fraction) return DoneReason::kCoverage;
      break;
    case Kind::kNoNewDetections:
      if (state.total_found >= criterion.min_detected &&
          state.steps - state.last_new_found_step >= criterion.window) {
        return DoneReason::kStalled;
      }
      break;
    case Kind::kLearnedLand:
      break;
  }
  return std::nullopt;
}

Observation observe(const EnvState& state, const EnvConfig& cfg) {
  Observation obs;
  obs.F = cfg.F;
  obs.G = cfg.global_size();
  obs.local = encode_local(state, cfg.F);
  obs.global = encode_global(state, cfg.g_global);
  obs.budget = budget_scalar(state, cfg);
  return obs;
}

Environment::Environment(EnvConfig cfg, FieldSource source)
    : cfg_(std::move(cfg)), source_(std::move(source)) {
  cfg_.validate();
}

long Environment::detect() {
  const int M = cfg_.field.M;
  const int h = cfg_.F / 2;
  DetectionResult det =
      simulate_detection_map(state_.field, state_.drone, cfg_.F, cfg_.detection, detection_rng_);
  long newly = 0;
  for (std::size_t id : det.visible_true_ids) {
    if (!state_.found[id]) {
      state_.found[id] = 1;
      ++newly;
    }
  }
  state_.total_found += newly;
  for (int r = 0; r < cfg_.F; ++r) {
    for (int c = 0; c < cfg_.F; ++c) {
      const Cell cell{state_.drone.row - h + r, state_.drone.col - h + c};
      if (!inside(cell, M)) continue;
      if (det.map(r, c) > 0.0) state_.detected_memory(cell.row, cell.col) = 1.0;
      if (!state_.coverage(cell.row, cell.col)) {
        state_.coverage(cell.row, cell.col) = 1;
        ++state_.covered_cells;
      }
    }
  }
  state_.current_detection = std::move(det.map);
  return newly;
}

Observation Environment::reset(std::uint64_t episode_seed) {
  episode_seed_ = episode_seed;
  RngStream field_rng(episode_seed, StreamId::kFieldGen);
  RngStream prior_rng(episode_seed, StreamId::kPrior);
  RngStream start_rng(episode_seed, StreamId::kStartCorner);
  detection_rng_ = RngStream(episode_seed, StreamId::kDetection);

  const int M = cfg_.field.M;
  state_ = EnvState{};
  state_.field = source_ ? source_(field_rng) : generate_field(cfg_.field, field_rng);
  if (state_.field.M != M) throw std::invalid_argument("field source produced a field of the wrong size");
  state_.prior_map = generate_prior_map(state_.field, cfg_.prior, prior_rng);
  const int h = cfg_.F / 2;
  state_.start = next_uniform(start_rng) < 0.5 ? Cell{h, h} : Cell{M - 1 - h, M - 1 - h};
  state_.drone = state_.start;
  state_.found.assign(state_.field.size(), 0);
  state_.detected_memory = GridMap::Zero(M, M);
  state_.coverage.setZero(M, M);
  state_.initial_found = detect();
  return observe(state_, cfg_);
}

StepResult Environment::step(Action action) {
  if (state_.done) throw std::logic_error("step called on a finished episode");
  if (action == Action::kLand && !cfg_.land_action) {
    throw std::invalid_argument("land action is not enabled");
  }
  StepResult result;
  ++state_.steps;
  result.reward = cfg_.rewards.step;

  if (action == Action::kLand) {
    state_.done = true;
    state_.done_reason = DoneReason::kLanded;
  } else {
    const Cell target = move(state_.drone, action);
    if (inside(target, cfg_.field.M)) {
      state_.drone = target;
    } else {
      result.info.hit_boundary = true;
      ++state_.boundary_hits;
      result.reward += cfg_.rewards.nfz;
    }
    const long newly = detect();
    result.info.newly_found = newly;
    if (newly > 0) state_.last_new_found_step = state_.steps;
    result.reward += cfg_.rewards.detect * static_cast<double>(newly);

    if (battery_empty(cfg_.b_init, cfg_.b_step, state_.steps)) {
      result.reward += cfg_.rewards.crash;
      result.info.crashed = true;
      state_.done = true;
      state_.done_reason = DoneReason::kCrashed;
    } else if (auto reason = check_stop(state_, cfg_.stopping)) {
      state_.done = true;
      state_.done_reason = *reason;
    }
  }
  result.done = state_.done;
  result.info.reason = state_.done_reason;
  result.obs = observe(state_, cfg_);
  return result;
}

}  // namespace uavsearch
