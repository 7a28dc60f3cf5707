#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dicti/image.hpp"

namespace dicti {

class ImageDecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

enum class ImageFormat { Png, Jpeg, Unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);
std::string media_type(ImageFormat format);

/// Decodes PNG or JPEG bytes to RGB. Grayscale and alpha inputs are converted.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);

/// Reads only the header to report dimensions.
Size probe_size(std::span<const std::uint8_t> bytes);

/// Decodes a single-channel 8-bit PNG where each pixel value is a label index.
LabelMap decode_label_map(std::span<const std::uint8_t> bytes);

Bytes encode_png(const RgbImage& image);
Bytes encode_png(const LabelMap& labels);
/// Mask pixels are written as 0 / 255.
Bytes encode_png(const BinaryMask& mask);

Bytes read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

RgbImage load_rgb(const std::filesystem::path& path);
LabelMap load_label_map(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const RgbImage& image);
void save_png(const std::filesystem::path& path, const LabelMap& labels);
void save_png(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace dicti
