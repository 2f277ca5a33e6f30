#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavsearch/grid.hpp"
#include "uavsearch/rng.hpp"

namespace uavsearch {

enum class DistributionKind { kStrong, kMedium, kUniform };

std::string to_string(DistributionKind kind);
DistributionKind parse_distribution_kind(const std::string& text);

/// Covariance set {S1, S2} of the strongly clustered distribution.
std::vector<Eigen::Matrix2d> strong_covariances();
/// The four covariances of the medium clustered distribution.
std::vector<Eigen::Matrix2d> medium_covariances();

struct FieldConfig {
  int M = 48;
  double obj_mu = 100.0;
  double obj_sigma = 30.0;
  double dist_mu = 3.0;
  double dist_sigma = 2.0;
  std::vector<Eigen::Matrix2d> covariances = strong_covariances();
  DistributionKind kind = DistributionKind::kStrong;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// A weed at continuous position (x, y) in [0, M)^2; x runs along columns
/// and y along rows, so the weed occupies cell (floor(y), floor(x)).
struct Weed {
  double x = 0.0;
  double y = 0.0;
  int cluster = -1;

  Cell cell() const;
};

struct Field {
  int M = 0;
  std::uint64_t seed = 0;
  DistributionKind kind = DistributionKind::kStrong;
  std::vector<Weed> weeds;

  std::size_t size() const { return weeds.size(); }
};

struct DetectionModel {
  double r_fp = 0.0;
  double r_fn = 0.0;
  double pos_sigma = 0.0;

  void validate() const;
};

struct PriorModel {
  double r_fp = 0.0;
  double r_fn = 0.0;
  double pos_sigma = 0.0;
  int P = 0;  ///< prior resolution; 0 means no prior knowledge

  void validate(int M) const;
};

/// Inclusive-exclusive cell rectangle [row0, row0+rows) x [col0, col0+cols).
struct CellRect {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;

  bool contains(Cell c) const {
    return c.row >= row0 && c.row < row0 + rows && c.col >= col0 && c.col < col0 + cols;
  }
};

Field generate_field(const FieldConfig& cfg, RngStream& rng);

/// Binary occupancy of `region`; cells outside the field stay zero.
GridMap rasterize(const Field& field, const CellRect& region);
GridMap rasterize(const Field& field);

struct DetectionResult {
  GridMap map;                        ///< F x F, centred on the FoV centre
  std::vector<std::size_t> visible_true_ids;  ///< ground-truth weeds that survived FN filtering
};

/// Simulated detector output for the F x F window centred on `center`.
/// Throws std::invalid_argument for even F or a centre outside the field.
DetectionResult simulate_detection_map(const Field& field, Cell center, int F,
                                       const DetectionModel& model, RngStream& rng);

/// Corrupted, down-sampled prior map, resized back to M x M.
GridMap generate_prior_map(const Field& field, const PriorModel& model, RngStream& rng);

void write_field(std::ostream& os, const Field& field);
Field read_field(std::istream& is);

}  // namespace uavsearch
