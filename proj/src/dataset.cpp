#include "cartoon/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "cartoon/image_io.hpp"

namespace cr {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

ImageSet scan_image_dir(const std::string& dir, std::int64_t min_side, const std::string& what) {
  std::error_code ec;
  if (dir.empty() || !fs::is_directory(dir, ec)) throw DataError(what + " directory '" + dir + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  ImageSet set;
  for (const auto& f : files) {
    try {
      const ImageInfo info = probe_image(f.string());
      if (std::min(info.width, info.height) < min_side) {
        set.warnings.push_back(f.string() + ": " + std::to_string(info.width) + "x" + std::to_string(info.height) +
                               " is smaller than the " + std::to_string(min_side) + "px crop, skipped");
        ++set.skipped;
        continue;
      }
      set.paths.push_back(f.string());
    } catch (const DataError& e) {
      set.warnings.push_back(std::string(e.what()) + ", skipped");
      ++set.skipped;
    }
  }
  if (set.paths.empty()) {
    throw DataError(what + " directory '" + dir + "' has no usable images (" + std::to_string(set.skipped) +
                    " skipped)");
  }
  return set;
}

CropSampler::CropSampler(ImageSet set, std::int64_t crop, std::uint64_t seed)
    : set_(std::move(set)), crop_(crop), rng_(seed) {}

Tensor<float> CropSampler::next(std::int64_t batch) {
  Tensor<float> out(batch, 3, crop_, crop_);
  const std::int64_t item = 3 * crop_ * crop_;
  for (std::int64_t b = 0; b < batch; ++b) {
    // Raw engine draws reduced by modulo: the sequence does not depend on the
    // standard library's distribution implementations.
    const auto pick = static_cast<std::size_t>(rng_() % set_.paths.size());
    const Tensor<float> img = load_image(set_.paths[pick]);
    if (std::min(img.h(), img.w()) < crop_) {
      throw DataError(set_.paths[pick] + ": shrank below the crop size after scanning");
    }
    const auto y = static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(img.h() - crop_ + 1));
    const auto x = static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(img.w() - crop_ + 1));
    const Tensor<float> patch = crop(img, y, x, crop_, crop_);
    std::copy(patch.data(), patch.data() + item, out.data() + b * item);
  }
  return out;
}

std::string CropSampler::rng_state() const {
  std::ostringstream os;
  os << rng_;
  return os.str();
}

void CropSampler::set_rng_state(const std::string& s) {
  std::istringstream is(s);
  is >> rng_;
  if (!is) throw DataError("malformed sampler state");
}

Datasets load_datasets(const TrainingConfig& cfg) {
  std::seed_seq photo_seq{cfg.seed, std::uint64_t{1}}, cartoon_seq{cfg.seed, std::uint64_t{2}};
  std::mt19937_64 p(photo_seq), c(cartoon_seq);
  return {CropSampler(scan_image_dir(cfg.photo_dir, cfg.crop, "photo"), cfg.crop, p()),
          CropSampler(scan_image_dir(cfg.cartoon_dir, cfg.crop, "cartoon"), cfg.crop, c())};
}

}  // namespace cr
