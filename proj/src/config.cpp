#include "cartoon/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cartoon/simd/kernels.hpp"

namespace cr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename I>
I to_int(const std::string& key, const std::string& v) {
  I out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument(key + ": not an integer: '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": not a number: '" + v + "'");
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainingConfig::validate() const {
  if (crop < 8 || crop % 8 != 0) throw std::invalid_argument("crop must be a positive multiple of 8");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1 && max_steps < 1) throw std::invalid_argument("epochs or max_steps must be positive");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (!(lr_g > 0) || !(lr_d > 0)) throw std::invalid_argument("learning rates must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("betas must be in [0,1)");
  if (!(adam_eps > 0)) throw std::invalid_argument("adam_eps must be positive");
  if (disc_width < 1) throw std::invalid_argument("disc_width must be >= 1");
  weights.validate();
}

std::string TrainingConfig::serialize() const {
  std::ostringstream os;
  os << "photo_dir = " << photo_dir << "\n"
     << "cartoon_dir = " << cartoon_dir << "\n"
     << "crop = " << crop << "\n"
     << "batch_size = " << batch_size << "\n"
     << "epochs = " << epochs << "\n"
     << "max_steps = " << max_steps << "\n"
     << "lr_g = " << fmt(lr_g) << "\n"
     << "lr_d = " << fmt(lr_d) << "\n"
     << "beta1 = " << fmt(beta1) << "\n"
     << "beta2 = " << fmt(beta2) << "\n"
     << "adam_eps = " << fmt(adam_eps) << "\n"
     << "seed = " << seed << "\n"
     << "w_style = " << fmt(weights.style) << "\n"
     << "w_content = " << fmt(weights.content) << "\n"
     << "w_recon = " << fmt(weights.recon) << "\n"
     << "w_adv = " << fmt(weights.adv) << "\n"
     << "mode = " << (mode == TrainMode::Full ? "full" : "reconstruction") << "\n"
     << "checkpoint_every = " << checkpoint_every << "\n"
     << "out_dir = " << out_dir << "\n"
     << "vgg_weights = " << vgg_weights << "\n"
     << "vgg_seed = " << vgg_seed << "\n"
     << "disc_width = " << disc_width << "\n"
     << "device = " << device << "\n";
  return os.str();
}

void TrainingConfig::set(const std::string& key, const std::string& value) {
  if (key == "photo_dir") photo_dir = value;
  else if (key == "cartoon_dir") cartoon_dir = value;
  else if (key == "crop") crop = to_int<std::int64_t>(key, value);
  else if (key == "batch_size") batch_size = to_int<std::int64_t>(key, value);
  else if (key == "epochs") epochs = to_int<std::int64_t>(key, value);
  else if (key == "max_steps") max_steps = to_int<std::int64_t>(key, value);
  else if (key == "lr_g") lr_g = to_double(key, value);
  else if (key == "lr_d") lr_d = to_double(key, value);
  else if (key == "beta1") beta1 = to_double(key, value);
  else if (key == "beta2") beta2 = to_double(key, value);
  else if (key == "adam_eps") adam_eps = to_double(key, value);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, value);
  else if (key == "w_style") weights.style = to_double(key, value);
  else if (key == "w_content") weights.content = to_double(key, value);
  else if (key == "w_recon") weights.recon = to_double(key, value);
  else if (key == "w_adv") weights.adv = to_double(key, value);
  else if (key == "mode") {
    if (value == "full") mode = TrainMode::Full;
    else if (value == "reconstruction") mode = TrainMode::Reconstruction;
    else throw std::invalid_argument("mode must be 'full' or 'reconstruction', got '" + value + "'");
  }
  else if (key == "checkpoint_every") checkpoint_every = to_int<std::int64_t>(key, value);
  else if (key == "out_dir") out_dir = value;
  else if (key == "vgg_weights") vgg_weights = value;
  else if (key == "vgg_seed") vgg_seed = to_int<std::uint64_t>(key, value);
  else if (key == "disc_width") disc_width = to_int<std::int64_t>(key, value);
  else if (key == "device") device = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

TrainingConfig TrainingConfig::parse(const std::string& text, const std::string& origin) {
  TrainingConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw DataError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

TrainingConfig TrainingConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void TrainingConfig::apply_env_overrides() {
  if (const char* v = std::getenv("CR_PHOTO_DIR")) photo_dir = v;
  if (const char* v = std::getenv("CR_CARTOON_DIR")) cartoon_dir = v;
  if (const char* v = std::getenv("CR_DEVICE")) device = v;
}

void apply_device(const std::string& device) {
  if (device == "cpu") {
    simd::set_active_isa(simd::default_isa());
    return;
  }
  if (device.rfind("cpu:", 0) == 0) {
    const auto isa = simd::parse_isa(device.substr(4));
    if (!isa) throw std::invalid_argument("unknown device '" + device + "'");
    simd::set_active_isa(*isa);
    return;
  }
  throw std::invalid_argument("unsupported device '" + device + "' (only cpu targets are built)");
}

}  // namespace cr
