#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace uavsearch {

/// Raster layer. Row index is the north-south cell coordinate, column index the
/// west-east one; (0, 0) is the top-left (north-west) cell.
using GridMap = Eigen::MatrixXd;

/// A cell coordinate (row, col).
struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Average pooling with a k x k window and stride k. Dimensions that are not a
/// multiple of k are edge-padded by replicating the last row/column, so the
/// output is ceil(rows/k) x ceil(cols/k).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> avg_pool(
    const Eigen::MatrixBase<Derived>& map, int k) {
  using Scalar = typename Derived::Scalar;
  if (k < 1) throw std::invalid_argument("avg_pool: kernel size must be >= 1");
  const Eigen::Index rows = map.rows();
  const Eigen::Index cols = map.cols();
  const Eigen::Index out_rows = (rows + k - 1) / k;
  const Eigen::Index out_cols = (cols + k - 1) / k;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(out_rows, out_cols);
  const Scalar inv_area = Scalar(1) / static_cast<Scalar>(k * k);
  for (Eigen::Index oc = 0; oc < out_cols; ++oc) {
    for (Eigen::Index orow = 0; orow < out_rows; ++orow) {
      Scalar sum(0);
      for (int dc = 0; dc < k; ++dc) {
        const Eigen::Index c = std::min<Eigen::Index>(oc * k + dc, cols - 1);
        for (int dr = 0; dr < k; ++dr) {
          const Eigen::Index r = std::min<Eigen::Index>(orow * k + dr, rows - 1);
          sum += map(r, c);
        }
      }
      out(orow, oc) = sum * inv_area;
    }
  }
  return out;
}

/// Nearest-neighbour resize: out(i, j) = map(floor(i*rows/h), floor(j*cols/w)).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> nearest_upsample(
    const Eigen::MatrixBase<Derived>& map, Eigen::Index target_w, Eigen::Index target_h) {
  if (target_w < map.cols() || target_h < map.rows()) {
    throw std::invalid_argument("nearest_upsample: target must not be smaller than source");
  }
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(target_h, target_w);
  for (Eigen::Index j = 0; j < target_w; ++j) {
    const Eigen::Index sj = j * map.cols() / target_w;
    for (Eigen::Index i = 0; i < target_h; ++i) {
      out(i, j) = map(i * map.rows() / target_h, sj);
    }
  }
  return out;
}

}  // namespace uavsearch
