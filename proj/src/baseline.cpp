#include "uavsearch/baseline.hpp"

#include <algorithm>
#include <stdexcept>

namespace uavsearch {

namespace {

using CoverMask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Marks the FoV around `c`; returns the number of newly covered cells.
long mark_fov(CoverMask& mask, Cell c, int F) {
  const int M = static_cast<int>(mask.rows());
  const int h = F / 2;
  long added = 0;
  for (int r = std::max(0, c.row - h); r <= std::min(M - 1, c.row + h); ++r) {
    for (int col = std::max(0, c.col - h); col <= std::min(M - 1, c.col + h); ++col) {
      if (!mask(r, col)) {
        mask(r, col) = 1;
        ++added;
      }
    }
  }
  return added;
}

Action rotate_half_turn(Action a) {
  switch (a) {
    case Action::kNorth: return Action::kSouth;
    case Action::kSouth: return Action::kNorth;
    case Action::kEast: return Action::kWest;
    case Action::kWest: return Action::kEast;
    case Action::kLand: return Action::kLand;
  }
  return a;
}

}  // namespace

Cell start_cell(int M, int F, Corner corner) {
  const int h = F / 2;
  return corner == Corner::kTopLeft ? Cell{h, h} : Cell{M - 1 - h, M - 1 - h};
}

CoveragePlan plan_row_by_row(int M, int F, Corner corner) {
  if (F < 1 || F % 2 == 0) throw std::invalid_argument("F must be odd");
  if (F > M) throw std::invalid_argument("F must not exceed M");
  const int h = F / 2;
  const int swaths = (M + F - 1) / F;

  // Built for the top-left corner; the bottom-right plan is its half-turn.
  CoveragePlan plan;
  plan.start = start_cell(M, F, Corner::kTopLeft);
  for (int i = 0; i < swaths; ++i) plan.swath_centers.push_back(std::min(h + i * F, M - 1 - h));

  CoverMask mask = CoverMask::Zero(M, M);
  const long total = static_cast<long>(M) * M;
  Cell pos = plan.start;
  long covered = mark_fov(mask, pos, F);
  auto go = [&](Action a) {
    pos = move(pos, a);
    plan.actions.push_back(a);
    covered += mark_fov(mask, pos, F);
  };

  bool heading_south = false;  // first swath starts at the nearer (top) edge
  while (pos.row > 0 && covered < total) go(Action::kNorth);
  for (int i = 0; i < swaths && covered < total; ++i) {
    while (pos.col < plan.swath_centers[i] && covered < total) go(Action::kEast);
    heading_south = !heading_south;
    if (heading_south) {
      while (pos.row < M - 1 && covered < total) go(Action::kSouth);
    } else {
      while (pos.row > 0 && covered < total) go(Action::kNorth);
    }
  }

  if (corner == Corner::kBottomRight) {
    plan.start = start_cell(M, F, Corner::kBottomRight);
    for (Action& a : plan.actions) a = rotate_half_turn(a);
    for (int& c : plan.swath_centers) c = M - 1 - c;
  }
  return plan;
}

Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> plan_coverage(const CoveragePlan& plan,
                                                                         int M, int F) {
  CoverMask mask = CoverMask::Zero(M, M);
  Cell pos = plan.start;
  mark_fov(mask, pos, F);
  for (Action a : plan.actions) {
    const Cell next = move(pos, a);
    if (next.row >= 0 && next.col >= 0 && next.row < M && next.col < M) pos = next;
    mark_fov(mask, pos, F);
  }
  return mask;
}

}  // namespace uavsearch
