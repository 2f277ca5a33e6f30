#include "uavsearch/render.hpp"

#include <cmath>
#include <sstream>

namespace uavsearch {

long threshold_step(const EpisodeLog& log, double threshold) {
  const long n_steps = static_cast<long>(log.steps.size());
  for (long t = 0; t <= n_steps; ++t) {
    if (found_fraction_at(log, t) >= threshold - 1e-12) return t;
  }
  return -1;
}

std::string render_svg(const EpisodeLog& log, const RenderStyle& style) {
  const int px = style.cell_px;
  const int size = log.M * px;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  os << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"#f4f1e8\"/>\n";

  os << "<g stroke=\"#d8d2c0\" stroke-width=\"1\">\n";
  for (int i = 0; i <= log.M; ++i) {
    os << "<line x1=\"" << i * px << "\" y1=\"0\" x2=\"" << i * px << "\" y2=\"" << size << "\"/>\n";
    os << "<line x1=\"0\" y1=\"" << i * px << "\" x2=\"" << size << "\" y2=\"" << i * px << "\"/>\n";
  }
  os << "</g>\n";

  const double r = 0.3 * px;
  os << "<g>\n";
  for (std::size_t i = 0; i < log.weeds.size(); ++i) {
    const bool found = i < log.found_step.size() && log.found_step[i] >= 0;
    os << "<circle cx=\"" << log.weeds[i].x * px << "\" cy=\"" << log.weeds[i].y * px << "\" r=\"" << r
       << "\" fill=\"" << (found ? "#1f3a1f" : "#a0a0a0") << "\"/>\n";
  }
  os << "</g>\n";

  auto centre = [&](Cell c) {
    std::ostringstream p;
    p << (c.col + 0.5) * px << ',' << (c.row + 0.5) * px;
    return p.str();
  };

  // Segment i joins position i-1 to position i; position 0 is the start cell.
  std::vector<Cell> positions{log.start};
  for (const auto& s : log.steps) positions.push_back(s.pos);
  const long k = threshold_step(log, style.threshold);
  const long last = static_cast<long>(positions.size()) - 1;
  const long split = k < 0 ? last : std::min(k, last);

  auto polyline = [&](long from, long to, const char* colour) {
    if (to <= from) return;
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << 0.25 * px
       << "\" stroke-linejoin=\"round\" points=\"";
    for (long i = from; i <= to; ++i) os << (i > from ? " " : "") << centre(positions[static_cast<std::size_t>(i)]);
    os << "\"/>\n";
  };
  polyline(0, split, "#d62728");
  polyline(split, last, "#1f77b4");

  const int h = log.F / 2;
  os << "<rect x=\"" << (log.start.col - h) * px << "\" y=\"" << (log.start.row - h) * px << "\" width=\""
     << log.F * px << "\" height=\"" << log.F * px << "\" fill=\"none\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
  os << "<circle cx=\"" << (log.start.col + 0.5) * px << "\" cy=\"" << (log.start.row + 0.5) * px << "\" r=\"" << r
     << "\" fill=\"none\" stroke=\"#000\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace uavsearch
