#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topoframe/topopt.hpp"

namespace topoframe {

/// Binary image, row-major from the top-left, with a set of non-removable
/// (tagged) pixels.
struct BinaryRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  std::vector<int> tags;  // sorted, unique pixel indices

  BinaryRaster() = default;
  BinaryRaster(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  int index(int col, int row) const { return row * width + col; }
  bool inside(int col, int row) const { return col >= 0 && row >= 0 && col < width && row < height; }
  /// Out-of-range reads return 0.
  bool get(int col, int row) const { return inside(col, row) && bits[index(col, row)] != 0; }
  void set(int col, int row, bool v) { bits[index(col, row)] = v ? 1 : 0; }
  bool is_tagged(int pixel) const;
  int count() const;

  friend bool operator==(const BinaryRaster&, const BinaryRaster&) = default;
};

enum class PixelType : std::uint8_t { Void, End, Joint, Regular };

/// Thinned raster plus per-pixel classification.
struct Skeleton {
  BinaryRaster raster;
  std::vector<PixelType> types;

  PixelType type(int col, int row) const { return types[raster.index(col, row)]; }
};

/// bit = 1 iff value >= eta, or the pixel is tagged.
/// Throws Error("empty structure at threshold") if no untagged pixel is set.
BinaryRaster threshold_fixed(std::span<const double> values, int width, int height, double eta,
                             std::span<const int> tags = {});

/// Histogram bin of a density value, 256 bins over [0, 1].
inline int histogram_bin(double v) {
  if (!(v > 0.0)) return 0;
  const int b = static_cast<int>(v * 256.0);
  return b > 255 ? 255 : b;
}

struct OtsuThreshold {
  int cut = 0;       // pixels with bin >= cut are foreground
  double eta = 0.0;  // cut / 256
  BinaryRaster raster;
};

/// Otsu's method on the 256-bin histogram: the cut maximizes the between-class
/// variance of bin indices; ties go to the smallest cut.
/// Throws Error("degenerate histogram") when all values share one bin.
OtsuThreshold threshold_otsu(std::span<const double> values, int width, int height,
                             std::span<const int> tags = {});

/// Level at which the set-pixel fraction matches `fraction` as closely as the
/// data allows (largest values first).
double volume_matching_threshold(std::span<const double> values, double fraction);

/// Binarizes according to the problem's threshold mode; returns the level used.
BinaryRaster binarize(const DensityField& field, const DesignProblem& problem, double* eta_used = nullptr);

BinaryRaster pad(const BinaryRaster& raster);
/// Throws Error if the border holds set pixels.
BinaryRaster unpad(const BinaryRaster& raster);

/// Neighbourhood P2..P9 of (col, row): north first, then clockwise.
std::array<bool, 8> neighborhood(const BinaryRaster& raster, int col, int row);
/// Number of set neighbours B(P).
int neighbor_count(const std::array<bool, 8>& n);
/// Number of 0 -> 1 transitions A(P) in P2..P9,P2.
int crossing_number(const std::array<bool, 8>& n);
/// Removal preserves 8-connected foreground and 4-connected background.
bool is_simple(const std::array<bool, 8>& n);

/// Zhang-Suen thinning with tagged pixels exempt, flagged pixels re-checked
/// before removal, followed by removal of any remaining simple non-end pixel.
/// The input must carry a zero border (see pad).
Skeleton thin(const BinaryRaster& padded);

/// End: one set neighbour. Joint: three or more branches leave the pixel
/// (crossing number >= 3). Regular otherwise.
std::vector<PixelType> classify_pixels(const BinaryRaster& raster);

/// Full pipeline step: pad, thin, unpad and classify.
Skeleton skeletonize(const BinaryRaster& raster);

/// Plain PBM (P1).
void write_pbm(const std::filesystem::path& path, const BinaryRaster& raster);
BinaryRaster read_pbm(const std::filesystem::path& path);

/// Tag sidecar: {"width","height","tags":[...],"eta"}.
void write_tags_json(const std::filesystem::path& path, const BinaryRaster& raster, double eta);
std::vector<int> read_tags_json(const std::filesystem::path& path, int width, int height);

}  // namespace topoframe
