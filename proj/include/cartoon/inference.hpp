#pragma once

// Inference entry points. Images are (1,3,H,W) in [-1,1]; extents that are
// not multiples of 8 are reflect-padded and the output cropped back. The
// reference cartoon is resized so that its shorter side is 256 before its
// statistics are taken.

#include <array>
#include <cstdint>
#include <vector>

#include "cartoon/model.hpp"

namespace cr {

inline constexpr std::int64_t kReferenceSide = 256;

Tensor<float> cartoonize(const Tensor<float>& photo, const Tensor<float>& reference, const CartoonModel& model);
Tensor<float> reconstruct(const Tensor<float>& img, const CartoonModel& model);

/// Input pixels on each side of an output pixel that can change it (encoder
/// plus renderer), from interval propagation over the layer structure.
std::int64_t render_radius();
/// The same for the gate's theta_p responses, which feed the pooled statistics.
std::int64_t statistics_radius();
/// Max of the two radii: the smallest overlap cartoonize_highres accepts.
std::int64_t receptive_radius();
/// receptive_radius() rounded up to a multiple of 8 (the margin actually used).
std::int64_t min_overlap();

struct Tile {
  std::int64_t y0, x0, y1, x1;  // core written to the output
  std::int64_t py0, px0, py1, px1;  // core plus overlap, clamped to the image
};

/// Partition of an H x W image (multiples of 8) into cores of at most
/// tile x tile, each extended by `overlap` on every side.
std::vector<Tile> make_tile_grid(std::int64_t h, std::int64_t w, std::int64_t tile, std::int64_t overlap);

struct StreamedStats {
  std::vector<double> mu, sigma;  // per channel
};

struct HighresReport {
  std::array<StreamedStats, 4> stats;  // per scale, from pass 1
  std::vector<double> omega[4];
  std::size_t tiles = 0;
  std::size_t peak_bytes = 0;  // MemoryTracker peak during the call
};

struct TileOptions {
  std::int64_t tile = 512;
  std::int64_t overlap = 64;
};

/// Two-pass tiled cartoonization. Pass 1 streams tiles to get exact global
/// channel statistics and pooled gate responses, then fixes omega and the
/// blended statistics; pass 2 renders each tile with those frozen affine
/// parameters and keeps only its core. The overlap is rounded up to a
/// multiple of 8. Throws ShapeError if tile is not a positive multiple of 8
/// or overlap is below receptive_radius().
Tensor<float> cartoonize_highres(const Tensor<float>& photo, const Tensor<float>& reference, const CartoonModel& model,
                                 const TileOptions& opts, HighresReport* report = nullptr);

}  // namespace cr
