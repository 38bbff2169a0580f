#include "topoframe/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "topoframe/error.hpp"

namespace topoframe {

namespace {

// Offsets of P2..P9 (north, then clockwise); rows grow downward.
constexpr int kDc[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

std::vector<int> clean_tags(std::span<const int> tags, int n) {
  std::vector<int> out(tags.begin(), tags.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (int t : out)
    if (t < 0 || t >= n) throw ValidationError("tagged pixel " + std::to_string(t) + " outside the raster");
  return out;
}

void check_size(std::span<const double> values, int width, int height) {
  if (width <= 0 || height <= 0 || values.size() != static_cast<std::size_t>(width) * height)
    throw ValidationError("density values do not match the raster size");
}

// Sets tagged pixels and rejects rasters with nothing but tags.
void finish_threshold(BinaryRaster& r) {
  int untagged = 0;
  for (std::size_t i = 0; i < r.bits.size(); ++i)
    if (r.bits[i] && !std::binary_search(r.tags.begin(), r.tags.end(), static_cast<int>(i))) ++untagged;
  if (untagged == 0) throw Error("empty structure at threshold");
  for (int t : r.tags) r.bits[t] = 1;
}

}  // namespace

bool BinaryRaster::is_tagged(int pixel) const {
  return std::binary_search(tags.begin(), tags.end(), pixel);
}

int BinaryRaster::count() const {
  return static_cast<int>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

BinaryRaster threshold_fixed(std::span<const double> values, int width, int height, double eta,
                             std::span<const int> tags) {
  check_size(values, width, height);
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("threshold level must lie in (0, 1)");
  BinaryRaster r(width, height);
  r.tags = clean_tags(tags, width * height);
  for (std::size_t i = 0; i < values.size(); ++i) r.bits[i] = values[i] >= eta ? 1 : 0;
  finish_threshold(r);
  return r;
}

OtsuThreshold threshold_otsu(std::span<const double> values, int width, int height,
                             std::span<const int> tags) {
  check_size(values, width, height);
  std::array<double, 256> hist{};
  for (double v : values) hist[histogram_bin(v)] += 1.0;
  const int occupied = static_cast<int>(std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0; }));
  if (occupied < 2) throw Error("degenerate histogram");

  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < 256; ++b) sum_all += b * hist[b];

  int best_cut = 0;
  double best = -1.0;
  double n0 = 0.0, s0 = 0.0;
  for (int k = 1; k < 256; ++k) {
    n0 += hist[k - 1];
    s0 += (k - 1) * hist[k - 1];
    const double n1 = total - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0, mu1 = (sum_all - s0) / n1;
    const double var = (n0 / total) * (n1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best) {
      best = var;
      best_cut = k;
    }
  }

  OtsuThreshold out;
  out.cut = best_cut;
  out.eta = best_cut / 256.0;
  out.raster = BinaryRaster(width, height);
  out.raster.tags = clean_tags(tags, width * height);
  for (std::size_t i = 0; i < values.size(); ++i)
    out.raster.bits[i] = histogram_bin(values[i]) >= best_cut ? 1 : 0;
  finish_threshold(out.raster);
  return out;
}

double volume_matching_threshold(std::span<const double> values, double fraction) {
  if (values.empty()) throw ValidationError("empty density field");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = static_cast<long>(sorted.size());
  const long keep = std::clamp(std::lround(fraction * static_cast<double>(n)), 1L, n);
  return sorted[keep - 1];
}

BinaryRaster binarize(const DensityField& field, const DesignProblem& problem, double* eta_used) {
  const auto tags = problem.tagged_pixels();
  double eta = problem.threshold_mode.eta;
  BinaryRaster r;
  switch (problem.threshold_mode.kind) {
    case ThresholdMode::Kind::Fixed:
      r = threshold_fixed(field.filtered, field.nx, field.ny, eta, tags);
      break;
    case ThresholdMode::Kind::Otsu: {
      auto o = threshold_otsu(field.filtered, field.nx, field.ny, tags);
      eta = o.eta;
      r = std::move(o.raster);
      break;
    }
    case ThresholdMode::Kind::Volume: {
      eta = volume_matching_threshold(field.filtered, problem.volume_fraction);
      BinaryRaster v(field.nx, field.ny);
      v.tags = clean_tags(tags, field.nx * field.ny);
      for (std::size_t i = 0; i < field.filtered.size(); ++i) v.bits[i] = field.filtered[i] >= eta;
      finish_threshold(v);
      r = std::move(v);
      break;
    }
  }
  if (eta_used) *eta_used = eta;
  return r;
}

BinaryRaster pad(const BinaryRaster& raster) {
  BinaryRaster out(raster.width + 2, raster.height + 2);
  for (int r = 0; r < raster.height; ++r)
    for (int c = 0; c < raster.width; ++c) out.set(c + 1, r + 1, raster.get(c, r));
  for (int t : raster.tags) out.tags.push_back(out.index(t % raster.width + 1, t / raster.width + 1));
  return out;
}

BinaryRaster unpad(const BinaryRaster& raster) {
  if (raster.width < 3 || raster.height < 3) throw Error("unpad: raster too small to carry a border");
  for (int c = 0; c < raster.width; ++c)
    if (raster.get(c, 0) || raster.get(c, raster.height - 1)) throw Error("unpad: border row holds set pixels");
  for (int r = 0; r < raster.height; ++r)
    if (raster.get(0, r) || raster.get(raster.width - 1, r)) throw Error("unpad: border column holds set pixels");
  BinaryRaster out(raster.width - 2, raster.height - 2);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) out.set(c, r, raster.get(c + 1, r + 1));
  for (int t : raster.tags) {
    const int c = t % raster.width - 1, r = t / raster.width - 1;
    if (!out.inside(c, r)) throw Error("unpad: tag on the border");
    out.tags.push_back(out.index(c, r));
  }
  return out;
}

std::array<bool, 8> neighborhood(const BinaryRaster& raster, int col, int row) {
  std::array<bool, 8> n{};
  for (int k = 0; k < 8; ++k) n[k] = raster.get(col + kDc[k], row + kDr[k]);
  return n;
}

int neighbor_count(const std::array<bool, 8>& n) {
  return static_cast<int>(std::count(n.begin(), n.end(), true));
}

int crossing_number(const std::array<bool, 8>& n) {
  int a = 0;
  for (int k = 0; k < 8; ++k) a += (!n[k] && n[(k + 1) % 8]) ? 1 : 0;
  return a;
}

bool is_simple(const std::array<bool, 8>& n) {
  // Union-find over the eight neighbour positions.
  const auto components = [&](bool value, bool eight, bool need_edge_neighbor) {
    std::array<int, 8> parent{};
    for (int k = 0; k < 8; ++k) parent[k] = k;
    const auto find = [&](int k) {
      while (parent[k] != k) k = parent[k] = parent[parent[k]];
      return k;
    };
    for (int a = 0; a < 8; ++a) {
      if (n[a] != value) continue;
      for (int b = a + 1; b < 8; ++b) {
        if (n[b] != value) continue;
        const int dc = std::abs(kDc[a] - kDc[b]), dr = std::abs(kDr[a] - kDr[b]);
        const bool adjacent = eight ? std::max(dc, dr) == 1 : dc + dr == 1;
        if (adjacent) parent[find(a)] = find(b);
      }
    }
    std::array<bool, 8> counted{};
    int count = 0;
    for (int k = 0; k < 8; ++k) {
      if (n[k] != value) continue;
      if (need_edge_neighbor && k % 2 != 0) continue;  // odd positions are diagonals
      const int root = find(k);
      if (!counted[root]) {
        counted[root] = true;
        ++count;
      }
    }
    return count;
  };
  return components(true, true, false) == 1 && components(false, false, true) == 1;
}

Skeleton thin(const BinaryRaster& padded) {
  const int w = padded.width, h = padded.height;
  for (int c = 0; c < w; ++c)
    if (padded.get(c, 0) || padded.get(c, h - 1)) throw Error("thin: input is not padded (set pixel on the border)");
  for (int r = 0; r < h; ++r)
    if (padded.get(0, r) || padded.get(w - 1, r)) throw Error("thin: input is not padded (set pixel on the border)");

  BinaryRaster img = padded;
  std::vector<char> tagged(img.bits.size(), 0);
  for (int t : img.tags) {
    tagged[t] = 1;
    img.bits[t] = 1;
  }
  const auto removable = [&](int c, int r) {
    const auto n = neighborhood(img, c, r);
    return neighbor_count(n) >= 2 && is_simple(n);
  };

  std::vector<int> flagged;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      flagged.clear();
      for (int r = 1; r < h - 1; ++r) {
        for (int c = 1; c < w - 1; ++c) {
          const int i = img.index(c, r);
          if (!img.bits[i] || tagged[i]) continue;
          const auto n = neighborhood(img, c, r);
          const int b = neighbor_count(n);
          if (b < 2 || b > 6 || crossing_number(n) != 1) continue;
          // n[0]=P2 (N), n[2]=P4 (E), n[4]=P6 (S), n[6]=P8 (W)
          const bool ok = pass == 0 ? (!(n[0] && n[2] && n[4]) && !(n[2] && n[4] && n[6]))
                                    : (!(n[0] && n[2] && n[6]) && !(n[0] && n[4] && n[6]));
          if (ok) flagged.push_back(i);
        }
      }
      // Re-check each flagged pixel against the partially thinned image so
      // two-pixel-thick strokes are not erased entirely.
      for (int i : flagged) {
        if (removable(i % w, i / w)) {
          img.bits[i] = 0;
          changed = true;
        }
      }
    }
  }

  // Remaining staircase corners are simple but have A(P) = 2.
  changed = true;
  while (changed) {
    changed = false;
    for (int r = 1; r < h - 1; ++r) {
      for (int c = 1; c < w - 1; ++c) {
        const int i = img.index(c, r);
        if (img.bits[i] && !tagged[i] && removable(c, r)) {
          img.bits[i] = 0;
          changed = true;
        }
      }
    }
  }

  Skeleton s;
  s.types = classify_pixels(img);
  s.raster = std::move(img);
  return s;
}

std::vector<PixelType> classify_pixels(const BinaryRaster& raster) {
  std::vector<PixelType> types(raster.bits.size(), PixelType::Void);
  for (int r = 0; r < raster.height; ++r) {
    for (int c = 0; c < raster.width; ++c) {
      if (!raster.get(c, r)) continue;
      const auto n = neighborhood(raster, c, r);
      PixelType t = PixelType::Regular;
      if (neighbor_count(n) == 1) t = PixelType::End;
      else if (crossing_number(n) >= 3) t = PixelType::Joint;
      types[raster.index(c, r)] = t;
    }
  }
  return types;
}

Skeleton skeletonize(const BinaryRaster& raster) {
  Skeleton s = thin(pad(raster));
  s.raster = unpad(s.raster);
  s.types = classify_pixels(s.raster);
  return s;
}

void write_pbm(const std::filesystem::path& path, const BinaryRaster& raster) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "P1\n" << raster.width << ' ' << raster.height << '\n';
  for (int r = 0; r < raster.height; ++r) {
    for (int c = 0; c < raster.width; ++c) {
      if (c) out << ' ';
      out << (raster.get(c, r) ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

BinaryRaster read_pbm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    body << line << '\n';
  }
  std::string magic;
  int w = 0, h = 0;
  body >> magic >> w >> h;
  if (magic != "P1") throw ParseError(path.string() + ": not a plain PBM (P1) file");
  if (!body || w <= 0 || h <= 0) throw ParseError(path.string() + ": bad PBM dimensions");
  BinaryRaster r(w, h);
  for (std::size_t i = 0; i < r.bits.size();) {
    char ch = 0;
    if (!(body >> ch)) throw ParseError(path.string() + ": PBM data ends early");
    if (ch != '0' && ch != '1') throw ParseError(path.string() + ": bad PBM pixel '" + std::string(1, ch) + "'");
    r.bits[i++] = ch == '1';
  }
  return r;
}

void write_tags_json(const std::filesystem::path& path, const BinaryRaster& raster, double eta) {
  nlohmann::json j;
  j["width"] = raster.width;
  j["height"] = raster.height;
  j["tags"] = raster.tags;
  j["eta"] = eta;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<int> read_tags_json(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("width", -1) != width || j.value("height", -1) != height)
    throw ParseError(path.string() + ": tag sidecar does not match the raster size");
  auto tags = j.at("tags").get<std::vector<int>>();
  return clean_tags(tags, width * height);
}

}  // namespace topoframe
