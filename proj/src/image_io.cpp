#include "cartoon/image_io.hpp"

#include <png.h>
#include <setjmp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "cartoon/ops.hpp"

namespace cr {

namespace {

enum class Format { Png, Jpeg };

Format sniff(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::Png;
  if (in.gcount() >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return Format::Jpeg;
  throw DataError(path + ": not a PNG or JPEG file");
}

Tensor<float> from_rgb8(const unsigned char* rgb, std::int64_t h, std::int64_t w) {
  Tensor<float> t(1, 3, h, w);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c)
        t.at(0, c, y, x) = static_cast<float>(rgb[(y * w + x) * 3 + c]) / 127.5f - 1.f;
  return t;
}

Tensor<float> load_png(const std::string& path, ImageInfo* info_only) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError(path + ": " + image.message);
  }
  if (info_only) {
    info_only->width = image.width;
    info_only->height = image.height;
    png_image_free(&image);
    return {};
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path + ": " + msg);
  }
  return from_rgb8(buf.data(), image.height, image.width);
}

struct JpegErr {
  jpeg_error_mgr mgr;
  jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  longjmp(err->jump, 1);
}

// Kept free of C++ objects with destructors between setjmp and longjmp.
bool decode_jpeg(FILE* f, std::vector<unsigned char>& out, ImageInfo& info, bool header_only, char* msg) {
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  if (setjmp(err.jump)) {
    std::strncpy(msg, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  info.width = cinfo.image_width;
  info.height = cinfo.image_height;
  if (!header_only) {
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
    out.resize(stride * cinfo.output_height);
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = out.data() + stride * cinfo.output_scanline;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Tensor<float> load_jpeg(const std::string& path, ImageInfo* info_only) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw DataError("cannot open image " + path);
  std::vector<unsigned char> rgb;
  ImageInfo info;
  char msg[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg(f.get(), rgb, info, info_only != nullptr, msg)) throw DataError(path + ": " + msg);
  if (info_only) {
    *info_only = info;
    return {};
  }
  return from_rgb8(rgb.data(), info.height, info.width);
}

void check_image(const Tensor<float>& img, const char* what) {
  if (img.shape().n != 1 || img.shape().c != 3) {
    throw ShapeError(std::string(what) + ": expected a (1,3,H,W) image, got " + img.shape().str());
  }
}

// Separable resampling weights for one axis.
struct Taps {
  std::vector<std::int64_t> start;
  std::vector<std::vector<double>> weights;
};

Taps triangle_taps(std::int64_t in, std::int64_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double fscale = std::max(1.0, scale);
  const double support = fscale;  // triangle radius 1, widened on reduction
  Taps taps;
  for (std::int64_t i = 0; i < out; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(center - support)));
    const auto hi = std::min<std::int64_t>(in, static_cast<std::int64_t>(std::ceil(center + support)));
    std::vector<double> w;
    double total = 0;
    for (std::int64_t j = lo; j < hi; ++j) {
      const double d = std::abs((static_cast<double>(j) + 0.5 - center) / fscale);
      const double v = d < 1.0 ? 1.0 - d : 0.0;
      w.push_back(v);
      total += v;
    }
    for (auto& v : w) v /= total;
    taps.start.push_back(lo);
    taps.weights.push_back(std::move(w));
  }
  return taps;
}

}  // namespace

Tensor<float> load_image(const std::string& path) {
  return sniff(path) == Format::Png ? load_png(path, nullptr) : load_jpeg(path, nullptr);
}

ImageInfo probe_image(const std::string& path) {
  ImageInfo info;
  if (sniff(path) == Format::Png) load_png(path, &info);
  else load_jpeg(path, &info);
  return info;
}

std::uint8_t to_byte(float v) {
  const double x = (static_cast<double>(v) + 1.0) * 127.5;
  const double r = std::nearbyint(std::clamp(x, 0.0, 255.0));  // default rounding: half to even
  return static_cast<std::uint8_t>(r);
}

void save_png(const std::string& path, const Tensor<float>& img) {
  check_image(img, "save_png");
  const std::int64_t h = img.shape().h, w = img.shape().w;
  std::vector<unsigned char> rgb(static_cast<std::size_t>(h * w * 3));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c) rgb[(y * w + x) * 3 + c] = to_byte(img.at(0, c, y, x));
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw DataError("cannot write " + path + ": " + image.message);
  }
}

Tensor<float> resize(const Tensor<float>& img, std::int64_t height, std::int64_t width) {
  if (height < 1 || width < 1) throw ShapeError("resize: target extent must be positive");
  const Shape s = img.shape();
  if (s.h == height && s.w == width) return img;
  const Taps th = triangle_taps(s.h, height), tw = triangle_taps(s.w, width);
  Tensor<float> mid(s.n, s.c, s.h, width), out(s.n, s.c, height, width);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const float* src = img.plane(n, c);
      float* m = mid.plane(n, c);
      for (std::int64_t y = 0; y < s.h; ++y)
        for (std::int64_t x = 0; x < width; ++x) {
          double acc = 0;
          const auto& wv = tw.weights[static_cast<std::size_t>(x)];
          for (std::size_t k = 0; k < wv.size(); ++k) acc += wv[k] * src[y * s.w + tw.start[x] + static_cast<std::int64_t>(k)];
          m[y * width + x] = static_cast<float>(acc);
        }
      float* o = out.plane(n, c);
      for (std::int64_t y = 0; y < height; ++y) {
        const auto& wv = th.weights[static_cast<std::size_t>(y)];
        for (std::int64_t x = 0; x < width; ++x) {
          double acc = 0;
          for (std::size_t k = 0; k < wv.size(); ++k) acc += wv[k] * m[(th.start[y] + static_cast<std::int64_t>(k)) * width + x];
          o[y * width + x] = static_cast<float>(acc);
        }
      }
    }
  return out;
}

Tensor<float> resize_min_side(const Tensor<float>& img, std::int64_t side) {
  const std::int64_t h = img.shape().h, w = img.shape().w;
  if (h <= w) {
    return resize(img, side, std::max<std::int64_t>(1, std::llround(static_cast<double>(w) * side / h)));
  }
  return resize(img, std::max<std::int64_t>(1, std::llround(static_cast<double>(h) * side / w)), side);
}

Tensor<float> pad_to_multiple(const Tensor<float>& img, std::int64_t m) {
  const Shape s = img.shape();
  const std::int64_t h = (s.h + m - 1) / m * m, w = (s.w + m - 1) / m * m;
  if (h == s.h && w == s.w) return img;
  if (h - s.h >= s.h || w - s.w >= s.w) throw ShapeError("pad_to_multiple: image " + s.str() + " too small to reflect");
  Tensor<float> out(s.n, s.c, h, w);
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          out.at(n, c, y, x) = img.at(n, c, ops::reflect_index(y, s.h), ops::reflect_index(x, s.w));
  return out;
}

}  // namespace cr
