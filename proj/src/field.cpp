#include "uavsearch/field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace uavsearch {

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::kStrong: return "strong";
    case DistributionKind::kMedium: return "medium";
    case DistributionKind::kUniform: return "uniform";
  }
  return "strong";
}

DistributionKind parse_distribution_kind(const std::string& text) {
  if (text == "strong") return DistributionKind::kStrong;
  if (text == "medium") return DistributionKind::kMedium;
  if (text == "uniform") return DistributionKind::kUniform;
  throw std::invalid_argument("unknown distribution kind '" + text + "'");
}

void FieldConfig::validate() const {
  if (M < 1) throw std::invalid_argument("field.M must be >= 1");
  if (!(obj_mu > 0.0)) throw std::invalid_argument("field.obj_mu must be > 0");
  if (!(obj_sigma >= 0.0)) throw std::invalid_argument("field.obj_sigma must be >= 0");
  if (!(dist_sigma >= 0.0)) throw std::invalid_argument("field.dist_sigma must be >= 0");
  if (kind != DistributionKind::kUniform) {
    if (covariances.empty()) {
      throw std::invalid_argument("field.covariances must be non-empty for clustered kinds");
    }
    for (const auto& cov : covariances) cholesky2(cov);
  }
}

std::vector<Eigen::Matrix2d> strong_covariances() {
  Eigen::Matrix2d s1, s2;
  s1 << 5, 8, 8, 15;
  s2 << 15, 0, 0, 5;
  return {s1, s2};
}

std::vector<Eigen::Matrix2d> medium_covariances() {
  Eigen::Matrix2d s1, s2, s3, s4;
  s1 << 10, 16, 16, 40;
  s2 << 40, 0, 0, 10;
  s3 << 30, 12, 12, 12;
  s4 << 15, 4, 4, 20;
  return {s1, s2, s3, s4};
}

Cell Weed::cell() const {
  return {static_cast<int>(std::floor(y)), static_cast<int>(std::floor(x))};
}

void DetectionModel::validate() const {
  if (!(r_fp >= 0.0)) throw std::invalid_argument("det.fp must be >= 0");
  if (!(r_fn >= 0.0 && r_fn <= 1.0)) throw std::invalid_argument("det.fn must be in [0, 1]");
  if (!(pos_sigma >= 0.0)) throw std::invalid_argument("det.pos_sigma must be >= 0");
}

void PriorModel::validate(int M) const {
  if (!(r_fp >= 0.0)) throw std::invalid_argument("prior.fp must be >= 0");
  if (!(r_fn >= 0.0 && r_fn <= 1.0)) throw std::invalid_argument("prior.fn must be in [0, 1]");
  if (!(pos_sigma >= 0.0)) throw std::invalid_argument("prior.pos_sigma must be >= 0");
  if (P < 0 || P > M) throw std::invalid_argument("prior.P must be in [0, M]");
}

namespace {

long long rounded_count(double value) {
  return std::max<long long>(0, std::llround(value));
}

// Picks `count` distinct entries of `pool` (partial Fisher-Yates, in place);
// the chosen entries end up in the first `count` slots.
template <typename T>
void choose_distinct(std::vector<T>& pool, std::size_t count, RngStream& rng) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.next_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
}

double clamp_open(double value, double lo, double hi) {
  return std::clamp(value, lo, std::nextafter(hi, lo));
}

}  // namespace

Field generate_field(const FieldConfig& cfg, RngStream& rng) {
  cfg.validate();
  Field field;
  field.M = cfg.M;
  field.seed = rng.seed();
  field.kind = cfg.kind;
  const double M = cfg.M;
  auto n = static_cast<std::size_t>(rounded_count(next_normal(rng, cfg.obj_mu, cfg.obj_sigma)));

  if (cfg.kind == DistributionKind::kUniform) {
    const std::size_t cells = static_cast<std::size_t>(cfg.M) * cfg.M;
    n = std::min(n, cells);
    std::vector<std::size_t> pool(cells);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    choose_distinct(pool, n, rng);
    field.weeds.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<double>(pool[i] / cfg.M);
      const auto col = static_cast<double>(pool[i] % cfg.M);
      field.weeds.push_back({col + 0.5, row + 0.5, -1});
    }
    return field;
  }

  const auto k = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(next_normal(rng, cfg.dist_mu, cfg.dist_sigma))));
  std::vector<Eigen::Vector2d> means(k);
  std::vector<std::size_t> cov_ids(k);
  for (std::size_t i = 0; i < k; ++i) {
    means[i] = {M * next_uniform(rng), M * next_uniform(rng)};
    cov_ids[i] = rng.next_index(cfg.covariances.size());
  }
  field.weeds.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t cluster = rng.next_index(k);
    Eigen::Vector2d p;
    do {
      p = sample_mvn2(rng, means[cluster], cfg.covariances[cov_ids[cluster]]);
    } while (!(p.x() >= 0.0 && p.x() < M && p.y() >= 0.0 && p.y() < M));
    field.weeds.push_back({p.x(), p.y(), static_cast<int>(cluster)});
  }
  return field;
}

GridMap rasterize(const Field& field, const CellRect& region) {
  GridMap map = GridMap::Zero(region.rows, region.cols);
  for (const Weed& weed : field.weeds) {
    const Cell c = weed.cell();
    if (c.row < 0 || c.col < 0 || c.row >= field.M || c.col >= field.M) continue;
    if (region.contains(c)) map(c.row - region.row0, c.col - region.col0) = 1.0;
  }
  return map;
}

GridMap rasterize(const Field& field) { return rasterize(field, {0, 0, field.M, field.M}); }

DetectionResult simulate_detection_map(const Field& field, Cell center, int F,
                                       const DetectionModel& model, RngStream& rng) {
  if (F < 1 || F % 2 == 0) throw std::invalid_argument("F must be odd");
  if (center.row < 0 || center.col < 0 || center.row >= field.M || center.col >= field.M) {
    throw std::invalid_argument("simulate_detection_map: FoV centre outside the field");
  }
  const int h = F / 2;
  const CellRect window{center.row - h, center.col - h, F, F};
  // In-field part of the FoV, in continuous coordinates.
  const double x_lo = std::max(window.col0, 0);
  const double x_hi = std::min(window.col0 + F, field.M);
  const double y_lo = std::max(window.row0, 0);
  const double y_hi = std::min(window.row0 + F, field.M);

  DetectionResult result;
  result.map = GridMap::Zero(F, F);
  for (std::size_t id = 0; id < field.weeds.size(); ++id) {
    const Weed& weed = field.weeds[id];
    if (!window.contains(weed.cell())) continue;
    if (next_uniform(rng) < model.r_fn) continue;
    result.visible_true_ids.push_back(id);
    const double x = clamp_open(next_normal(rng, weed.x, model.pos_sigma), x_lo, x_hi);
    const double y = clamp_open(next_normal(rng, weed.y, model.pos_sigma), y_lo, y_hi);
    const Weed observed{x, y};
    const Cell c = observed.cell();
    result.map(c.row - window.row0, c.col - window.col0) = 1.0;
  }

  const auto fp_count = static_cast<std::size_t>(rounded_count(model.r_fp * F * F));
  if (fp_count > 0) {
    std::vector<Cell> free_cells;
    for (int r = static_cast<int>(y_lo); r < static_cast<int>(y_hi); ++r) {
      for (int c = static_cast<int>(x_lo); c < static_cast<int>(x_hi); ++c) {
        if (result.map(r - window.row0, c - window.col0) == 0.0) free_cells.push_back({r, c});
      }
    }
    choose_distinct(free_cells, fp_count, rng);
    const std::size_t placed = std::min(fp_count, free_cells.size());
    for (std::size_t i = 0; i < placed; ++i) {
      result.map(free_cells[i].row - window.row0, free_cells[i].col - window.col0) = 1.0;
    }
  }
  return result;
}

GridMap generate_prior_map(const Field& field, const PriorModel& model, RngStream& rng) {
  model.validate(field.M);
  const int M = field.M;
  if (model.P == 0) return GridMap::Zero(M, M);

  std::vector<Weed> weeds = field.weeds;
  const auto drop = static_cast<std::size_t>(
      rounded_count(model.r_fn * static_cast<double>(weeds.size())));
  choose_distinct(weeds, drop, rng);
  weeds.erase(weeds.begin(), weeds.begin() + static_cast<std::ptrdiff_t>(std::min(drop, weeds.size())));

  const auto spurious = static_cast<std::size_t>(rounded_count(model.r_fp * M * M));
  for (std::size_t i = 0; i < spurious; ++i) {
    const double x = M * next_uniform(rng);
    const double y = M * next_uniform(rng);
    weeds.push_back({x, y, -1});
  }

  Field noisy;
  noisy.M = M;
  noisy.weeds.reserve(weeds.size());
  for (const Weed& w : weeds) {
    const double x = clamp_open(next_normal(rng, w.x, model.pos_sigma), 0.0, M);
    const double y = clamp_open(next_normal(rng, w.y, model.pos_sigma), 0.0, M);
    noisy.weeds.push_back({x, y, w.cluster});
  }

  const int kernel = M / model.P;
  const GridMap pooled = avg_pool(rasterize(noisy), kernel);
  return nearest_upsample(pooled, M, M);
}

void write_field(std::ostream& os, const Field& field) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "field M=" << field.M << " seed=" << field.seed << " kind=" << to_string(field.kind)
     << " n=" << field.weeds.size() << '\n';
  for (const Weed& w : field.weeds) os << w.x << ' ' << w.y << ' ' << w.cluster << '\n';
  os.precision(old_precision);
}

Field read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_field: empty input");
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "field") throw std::runtime_error("read_field: missing 'field' header");
  Field field;
  std::size_t n = 0;
  bool have_m = false;
  bool have_n = false;
  std::string item;
  while (header >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::runtime_error("read_field: bad header item '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "M") {
      field.M = std::stoi(value);
      have_m = true;
    } else if (key == "seed") {
      field.seed = std::stoull(value);
    } else if (key == "kind") {
      field.kind = parse_distribution_kind(value);
    } else if (key == "n") {
      n = std::stoull(value);
      have_n = true;
    } else {
      throw std::runtime_error("read_field: unknown header key '" + key + "'");
    }
  }
  if (!have_m || !have_n) throw std::runtime_error("read_field: header needs M and n");
  field.weeds.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Weed w;
    if (!(is >> w.x >> w.y >> w.cluster)) throw std::runtime_error("read_field: truncated weed list");
    if (!(w.x >= 0.0 && w.x < field.M && w.y >= 0.0 && w.y < field.M)) {
      throw std::runtime_error("read_field: weed outside the field");
    }
    field.weeds.push_back(w);
  }
  return field;
}

}  // namespace uavsearch
