#include "fdp/render.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fdp::render {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

// SVG y grows downward, so world y is negated.
std::string xy(const Vec2& p) { return num(p.x()) + "," + num(-p.y()); }

void polyline(std::ostringstream& out, const std::vector<Vec2>& pts, const char* cls, const char* color,
              double width) {
  out << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
      << num(width) << "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << xy(pts[i]);
  out << "\"/>\n";
}

void marker(std::ostringstream& out, const Vec2& p, const char* cls, const char* color, double half) {
  out << "  <rect class=\"" << cls << "\" x=\"" << num(p.x() - half) << "\" y=\"" << num(-p.y() - half)
      << "\" width=\"" << num(2 * half) << "\" height=\"" << num(2 * half) << "\" fill=\"" << color << "\"/>\n";
}

}  // namespace

std::string render_svg(const episode::EpisodeRecord& record, const SvgStyle& style) {
  record.validate();
  const auto& env = record.env;
  double x0 = -1.5, x1 = 7.5, y0 = -1.5, y1 = 7.5;
  auto extend = [&](const Vec2& p, double r) {
    x0 = std::min(x0, p.x() - r);
    x1 = std::max(x1, p.x() + r);
    y0 = std::min(y0, p.y() - r);
    y1 = std::max(y1, p.y() + r);
  };
  for (const auto& ob : env.obstacles) extend(ob.center, ob.radius);
  extend(env.goal, style.success_radius);
  std::vector<Vec2> mid, l1, l2;
  std::vector<std::vector<Vec2>> fol(record.followers.front().size());
  for (std::size_t i = 0; i < record.length(); ++i) {
    mid.emplace_back(record.states[i][0], record.states[i][1]);
    l1.push_back(record.leaders[i][0]);
    l2.push_back(record.leaders[i][1]);
    for (std::size_t f = 0; f < fol.size() && f < record.followers[i].size(); ++f) {
      fol[f].push_back(record.followers[i][f]);
    }
  }
  for (const auto* path : {&mid, &l1, &l2}) {
    for (const auto& p : *path) extend(p, 0.2);
  }
  for (const auto& path : fol) {
    for (const auto& p : path) extend(p, 0.2);
  }

  const double w = x1 - x0;
  const double h = y1 - y0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(x0) << " " << num(-y1) << " " << num(w)
      << " " << num(h) << "\" width=\"" << num(w * style.pixels_per_meter) << "\" height=\""
      << num(h * style.pixels_per_meter) << "\">\n";
  out << "  <title>" << record.policy << " seed " << record.seed << " " << world::to_string(record.outcome)
      << "</title>\n";
  out << "  <rect x=\"" << num(x0) << "\" y=\"" << num(-y1) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" fill=\"#ffffff\"/>\n";
  const auto& reg = env.obstacle_region;
  out << "  <rect class=\"region\" x=\"" << num(reg.lo.x()) << "\" y=\"" << num(-reg.hi.y()) << "\" width=\""
      << num(reg.hi.x() - reg.lo.x()) << "\" height=\"" << num(reg.hi.y() - reg.lo.y())
      << "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"0.02\" stroke-dasharray=\"0.1 0.1\"/>\n";
  for (const auto& ob : env.obstacles) {
    out << "  <circle class=\"obstacle\" cx=\"" << num(ob.center.x()) << "\" cy=\"" << num(-ob.center.y())
        << "\" r=\"" << num(ob.radius) << "\" fill=\"#888888\"/>\n";
  }
  out << "  <circle class=\"goal\" cx=\"" << num(env.goal.x()) << "\" cy=\"" << num(-env.goal.y()) << "\" r=\""
      << num(style.success_radius) << "\" fill=\"#7fd67f\" fill-opacity=\"0.5\" stroke=\"#2e8b2e\" "
      << "stroke-width=\"0.02\"/>\n";
  static const char* kFollowerColors[] = {"#e08a1e", "#9b59b6", "#16a085", "#c0392b"};
  for (std::size_t f = 0; f < fol.size(); ++f) polyline(out, fol[f], "follower", kFollowerColors[f % 4], 0.02);
  polyline(out, l1, "leader", "#1f5fbf", 0.02);
  polyline(out, l2, "leader", "#1f5fbf", 0.02);
  polyline(out, mid, "midpoint", "#000000", 0.04);
  marker(out, mid.front(), "start", "#1f5fbf", 0.08);
  marker(out, mid.back(), "end", "#d62728", 0.08);
  out << "</svg>\n";
  return out.str();
}

void write_svg(const episode::EpisodeRecord& record, const std::filesystem::path& path, const SvgStyle& style) {
  const std::string svg = render_svg(record, style);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << svg;
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace fdp::render
