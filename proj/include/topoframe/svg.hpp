#pragma once

#include <span>
#include <string>

#include "topoframe/frame_fe.hpp"
#include "topoframe/graph.hpp"
#include "topoframe/raster.hpp"

namespace topoframe {

/// Grey-scale heat map, one rect per element, black = solid.
std::string svg_density(std::span<const double> values, int nx, int ny, double h);

/// Skeleton pixels over the binarized structure; End pixels green, Joint
/// pixels orange, tagged pixels outlined.
std::string svg_skeleton(const BinaryRaster& structure, const Skeleton& skeleton, double h);

/// Members drawn with width proportional to sqrt(A). With a result, tension
/// members are red and compression members blue.
std::string svg_frame(const FrameGraph& graph, double width, double height, const FrameResult* result = nullptr);

}  // namespace topoframe
