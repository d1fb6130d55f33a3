#pragma once

// Unpaired image corpora and the random-crop samplers that feed training.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cartoon/config.hpp"
#include "cartoon/tensor.hpp"

namespace cr {

struct ImageSet {
  std::vector<std::string> paths;     // usable images, sorted
  std::vector<std::string> warnings;  // one per skipped file
  std::int64_t skipped = 0;
};

/// Scans `dir` (non-recursive) for PNG/JPEG files whose shorter side is at
/// least `min_side`. Undecodable or undersized files are skipped with a
/// warning. Throws DataError when the directory is missing or nothing usable
/// remains; `what` names the corpus in messages.
ImageSet scan_image_dir(const std::string& dir, std::int64_t min_side, const std::string& what);

/// Draws images uniformly with replacement and cuts a uniformly placed
/// crop x crop window. The sequence is a pure function of the seed.
class CropSampler {
 public:
  CropSampler(ImageSet set, std::int64_t crop, std::uint64_t seed);

  /// (batch, 3, crop, crop) in [-1,1].
  Tensor<float> next(std::int64_t batch);

  const ImageSet& images() const { return set_; }
  std::string rng_state() const;
  void set_rng_state(const std::string& s);

 private:
  ImageSet set_;
  std::int64_t crop_;
  std::mt19937_64 rng_;
};

struct Datasets {
  CropSampler photos;
  CropSampler cartoons;
};

/// Photo and cartoon samplers with independent streams derived from cfg.seed.
Datasets load_datasets(const TrainingConfig& cfg);

}  // namespace cr
