#pragma once

// Image files <-> (1,3,H,W) float tensors in [-1,1].

#include <cstdint>
#include <string>

#include "cartoon/tensor.hpp"

namespace cr {

struct ImageInfo {
  std::int64_t width = 0;
  std::int64_t height = 0;
};

/// PNG or JPEG (detected from the file signature), 8- or 16-bit, gray or RGB,
/// alpha dropped. Throws DataError for unreadable files.
Tensor<float> load_image(const std::string& path);
/// Header-only size probe; throws DataError like load_image.
ImageInfo probe_image(const std::string& path);

/// 8-bit RGB PNG. Values map [-1,1] -> [0,255] with round-half-to-even;
/// out-of-range values clamp. Throws DataError on I/O failure.
void save_png(const std::string& path, const Tensor<float>& img);

/// One channel value in [-1,1] to an 8-bit code.
std::uint8_t to_byte(float v);

/// Triangle-filter resampling with antialiasing on reduction.
Tensor<float> resize(const Tensor<float>& img, std::int64_t height, std::int64_t width);
/// Scales so that min(h, w) == side, preserving aspect ratio.
Tensor<float> resize_min_side(const Tensor<float>& img, std::int64_t side);

/// Reflect-pads bottom/right so both extents are multiples of `m`.
Tensor<float> pad_to_multiple(const Tensor<float>& img, std::int64_t m);

}  // namespace cr
