#include "idv/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "idv/error.hpp"
#include "idv/file_util.hpp"

namespace idv {
namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::string_view bytes, std::size_t& pos, const std::string& source) {
  while (pos < bytes.size()) {
    const unsigned char c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw FormatError(source + ": truncated PPM header");
  return std::string(bytes.substr(start, pos - start));
}

std::size_t header_number(std::string_view bytes, std::size_t& pos, const std::string& source,
                          const char* what) {
  const std::string tok = header_token(bytes, pos, source);
  if (tok.empty() || tok.size() > 9 ||
      !std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw FormatError(source + ": bad PPM " + std::string(what) + " '" + tok + "'");
  }
  return static_cast<std::size_t>(std::stoul(tok));
}

unsigned char to_byte(double v) {
  const double r = std::round(v);
  return static_cast<unsigned char>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

Tensor decode_ppm(std::string_view bytes, const std::string& source) {
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos, source);
  if (magic != "P6") throw FormatError(source + ": not a binary PPM (magic '" + magic + "')");
  const std::size_t w = header_number(bytes, pos, source, "width");
  const std::size_t h = header_number(bytes, pos, source, "height");
  const std::size_t maxval = header_number(bytes, pos, source, "maxval");
  if (maxval != 255) {
    throw FormatError(source + ": unsupported maxval " + std::to_string(maxval) + " (need 255)");
  }
  if (w == 0 || h == 0) throw FormatError(source + ": zero image dimension");
  if (pos >= bytes.size()) throw FormatError(source + ": truncated PPM header");
  ++pos;  // single whitespace byte after maxval
  const std::size_t need = 3 * w * h;
  if (bytes.size() - pos < need) {
    throw FormatError(source + ": truncated pixel data (" + std::to_string(bytes.size() - pos) +
                      " of " + std::to_string(need) + " bytes)");
  }
  Tensor img({3, h, w}, 0.0);
  const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = px[(y * w + x) * 3 + c];
    }
  }
  return img;
}

Tensor read_ppm(const std::filesystem::path& path) {
  return decode_ppm(read_file(path), path.string());
}

std::string encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidArgument("encode_ppm: expected [3,H,W], got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(image.at(c, y, x))));
    }
  }
  return out;
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_ppm(image));
}

std::string encode_pgm(const Tensor& map) {
  if (map.rank() != 2) throw InvalidArgument("encode_pgm: expected [H,W], got " + shape_string(map.shape()));
  const std::size_t h = map.dim(0), w = map.dim(1);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) out.push_back(static_cast<char>(to_byte(map[i])));
  return out;
}

void write_pgm(const Tensor& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(map));
}

Tensor minmax_to_byte_range(const Tensor& map) {
  Tensor out(map.shape(), 0.0);
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = 255.0 * (map[i] - *lo) / span;
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw InvalidArgument("resize: expected [C,H,W], got " + shape_string(image.shape()));
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize: zero output size");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == out_h && w == out_w) return image;
  Tensor out({c, out_h, out_w}, 0.0);
  const double sy = out_h > 1 ? static_cast<double>(h - 1) / static_cast<double>(out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(w - 1) / static_cast<double>(out_w - 1) : 0.0;
  for (std::size_t i = 0; i < out_h; ++i) {
    const double fy = static_cast<double>(i) * sy;
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ay = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_w; ++j) {
      const double fx = static_cast<double>(j) * sx;
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double ax = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = image.at(ch, y0, x0) * (1.0 - ax) + image.at(ch, y0, x1) * ax;
        const double bot = image.at(ch, y1, x0) * (1.0 - ax) + image.at(ch, y1, x1) * ax;
        out.at(ch, i, j) = top * (1.0 - ay) + bot * ay;
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width) {
  if (image.rank() != 3) throw InvalidArgument("crop: expected [C,H,W], got " + shape_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (height == 0 || width == 0 || top + height > h || left + width > w) {
    throw InvalidArgument("crop window exceeds image " + shape_string(image.shape()));
  }
  Tensor out({c, height, width}, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) out.at(ch, y, x) = image.at(ch, top + y, left + x);
    }
  }
  return out;
}

Tensor center_crop(const Tensor& image, std::size_t size) {
  if (image.rank() != 3) throw InvalidArgument("center_crop: expected [C,H,W]");
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (size > h || size > w) throw InvalidArgument("center_crop: crop larger than image");
  return crop(image, (h - size) / 2, (w - size) / 2, size, size);
}

Tensor mirror_horizontal(const Tensor& image) {
  if (image.rank() != 3) throw InvalidArgument("mirror: expected [C,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(ch, y, x) = image.at(ch, y, w - 1 - x);
    }
  }
  return out;
}

}  // namespace idv
