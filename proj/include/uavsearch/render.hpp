#pragma once

#include <string>

#include "uavsearch/evaluation.hpp"

namespace uavsearch {

struct RenderStyle {
  int cell_px = 12;
  double threshold = 0.8;  ///< found fraction where the path turns from red to blue
};

/// First step index t with found_fraction_at(log, t) >= threshold, or -1.
long threshold_step(const EpisodeLog& log, double threshold);

/// Static SVG: grid, weeds (found dark, missed gray), FoV of the start cell
/// and the flight path, red up to threshold_step and blue after.
std::string render_svg(const EpisodeLog& log, const RenderStyle& style = {});

}  // namespace uavsearch
