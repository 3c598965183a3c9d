#pragma once

#include "fdp/episode.hpp"

#include <filesystem>
#include <string>

namespace fdp::render {

struct SvgStyle {
  double pixels_per_meter = 60.0;
  double success_radius = 0.3;
};

/// Obstacles as circles, the goal disc, midpoint/leader/follower paths and
/// start/end markers. The view spans the workspace plus every recorded point;
/// output bytes depend only on the record.
std::string render_svg(const episode::EpisodeRecord& record, const SvgStyle& style = {});

void write_svg(const episode::EpisodeRecord& record, const std::filesystem::path& path, const SvgStyle& style = {});

}  // namespace fdp::render
