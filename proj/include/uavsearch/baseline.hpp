#pragma once

#include <vector>

#include "uavsearch/environment.hpp"
#include "uavsearch/grid.hpp"

namespace uavsearch {

enum class Corner { kTopLeft, kBottomRight };

/// Serpentine (boustrophedon) coverage route in the agent's action vocabulary.
struct CoveragePlan {
  Cell start;
  std::vector<Action> actions;
  std::vector<int> swath_centers;  ///< column index of each vertical swath
};

/// Start cell used by the environment for `corner`.
Cell start_cell(int M, int F, Corner corner);

/// Row-by-row plan with swath width F and no overlap except the last swath,
/// whose centre is clamped so its FoV stays inside the field. Swaths run the
/// full field length; the plan ends as soon as the FoV union covers the field.
/// Throws std::invalid_argument for even F or F > M.
CoveragePlan plan_row_by_row(int M, int F, Corner corner);

/// Cells seen by the F x F FoV along the plan, including the start cell.
Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> plan_coverage(const CoveragePlan& plan,
                                                                         int M, int F);

}  // namespace uavsearch
