#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "idv/tensor.hpp"

namespace idv {

/// Binary P6 with maxval 255 -> [3,H,W] tensor of values in [0, 255].
Tensor decode_ppm(std::string_view bytes, const std::string& source = "<memory>");
Tensor read_ppm(const std::filesystem::path& path);

/// [3,H,W] -> binary P6. Values are rounded and clamped to [0, 255].
std::string encode_ppm(const Tensor& image);
void write_ppm(const Tensor& image, const std::filesystem::path& path);

/// [H,W] -> binary P5 (maxval 255). Values are rounded and clamped.
std::string encode_pgm(const Tensor& map);
void write_pgm(const Tensor& map, const std::filesystem::path& path);

/// Linear rescale so the minimum maps to 0 and the maximum to 255. A
/// constant map becomes all zeros.
Tensor minmax_to_byte_range(const Tensor& map);

/// Bilinear resize of [C,H,W] with corner-aligned sampling: output pixel
/// (i, j) samples source (i*(H-1)/(outH-1), j*(W-1)/(outW-1)).
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t height,
            std::size_t width);
Tensor center_crop(const Tensor& image, std::size_t size);
Tensor mirror_horizontal(const Tensor& image);

}  // namespace idv
