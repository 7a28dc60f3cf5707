#include "dicti/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

// jpeglib.h expects stdio declarations first.
#include <jpeglib.h>

namespace dicti {

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= sizeof(kPng) && std::memcmp(bytes.data(), kPng, sizeof(kPng)) == 0) {
        return ImageFormat::Png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return ImageFormat::Jpeg;
    }
    return ImageFormat::Unknown;
}

std::string media_type(ImageFormat format) {
    switch (format) {
        case ImageFormat::Png: return "image/png";
        case ImageFormat::Jpeg: return "image/jpeg";
        case ImageFormat::Unknown: break;
    }
    return "application/octet-stream";
}

namespace {

struct PngReader {
    png_image image{};

    explicit PngReader(std::span<const std::uint8_t> bytes) {
        image.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
            std::string msg = image.message;
            png_image_free(&image);
            throw ImageDecodeError("png: " + msg);
        }
    }
    ~PngReader() { png_image_free(&image); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;

    std::vector<std::uint8_t> finish(std::uint32_t format) {
        image.format = format;
        std::vector<std::uint8_t> out(PNG_IMAGE_SIZE(image));
        if (!png_image_finish_read(&image, nullptr, out.data(), 0, nullptr)) {
            throw ImageDecodeError(std::string("png: ") + image.message);
        }
        return out;
    }
};

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (truncation, bad Huffman codes) are fatal; trace messages are dropped.
void jpeg_emit_message(j_common_ptr cinfo, int msg_level) {
    if (msg_level < 0) jpeg_error_exit(cinfo);
}

// Decodes into `out` or returns false with `message` set. Kept free of
// non-trivial locals so longjmp does not skip destructors.
bool jpeg_decode_raw(const std::uint8_t* data, std::size_t len, bool header_only,
                     std::uint8_t* out, std::size_t out_len, int* width, int* height,
                     char* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_emit_message;
    if (setjmp(err.jump)) {
        std::strncpy(message, err.message, JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(len));
    jpeg_read_header(&cinfo, TRUE);
    *width = static_cast<int>(cinfo.image_width);
    *height = static_cast<int>(cinfo.image_height);
    if (header_only) {
        jpeg_destroy_decompress(&cinfo);
        return true;
    }
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t stride = static_cast<std::size_t>(cinfo.output_width) * 3;
    if (out == nullptr || out_len < stride * cinfo.output_height) {
        std::strncpy(message, "output buffer too small", JMSG_LENGTH_MAX);
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

Size jpeg_probe(std::span<const std::uint8_t> bytes) {
    int w = 0;
    int h = 0;
    char message[JMSG_LENGTH_MAX] = {};
    if (!jpeg_decode_raw(bytes.data(), bytes.size(), true, nullptr, 0, &w, &h, message)) {
        throw ImageDecodeError(std::string("jpeg: ") + message);
    }
    return {w, h};
}

RgbImage jpeg_decode(std::span<const std::uint8_t> bytes) {
    const Size size = jpeg_probe(bytes);
    if (size.width <= 0 || size.height <= 0) throw ImageDecodeError("jpeg: empty image");
    std::vector<std::uint8_t> pixels(size.area() * 3);
    int w = 0;
    int h = 0;
    char message[JMSG_LENGTH_MAX] = {};
    if (!jpeg_decode_raw(bytes.data(), bytes.size(), false, pixels.data(), pixels.size(), &w, &h,
                         message)) {
        throw ImageDecodeError(std::string("jpeg: ") + message);
    }
    return RgbImage(w, h, std::move(pixels));
}

Bytes png_encode(int width, int height, std::uint32_t format, const std::uint8_t* pixels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error(std::string("png encode: ") + image.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw std::runtime_error(std::string("png encode: ") + image.message);
    }
    out.resize(size);
    return out;
}

}  // namespace

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) {
    switch (sniff_format(bytes)) {
        case ImageFormat::Png: {
            PngReader reader(bytes);
            const int w = static_cast<int>(reader.image.width);
            const int h = static_cast<int>(reader.image.height);
            return RgbImage(w, h, reader.finish(PNG_FORMAT_RGB));
        }
        case ImageFormat::Jpeg: return jpeg_decode(bytes);
        case ImageFormat::Unknown: break;
    }
    throw ImageDecodeError("unrecognized image format (expected PNG or JPEG)");
}

Size probe_size(std::span<const std::uint8_t> bytes) {
    switch (sniff_format(bytes)) {
        case ImageFormat::Png: {
            PngReader reader(bytes);
            return {static_cast<int>(reader.image.width), static_cast<int>(reader.image.height)};
        }
        case ImageFormat::Jpeg: return jpeg_probe(bytes);
        case ImageFormat::Unknown: break;
    }
    throw ImageDecodeError("unrecognized image format (expected PNG or JPEG)");
}

LabelMap decode_label_map(std::span<const std::uint8_t> bytes) {
    if (sniff_format(bytes) != ImageFormat::Png) {
        throw ImageDecodeError("label map must be a single-channel PNG");
    }
    PngReader reader(bytes);
    if ((reader.image.format & PNG_FORMAT_FLAG_COLOR) != 0) {
        throw ImageDecodeError("label map must be a single-channel PNG");
    }
    const int w = static_cast<int>(reader.image.width);
    const int h = static_cast<int>(reader.image.height);
    auto labels = reader.finish(PNG_FORMAT_GRAY);
    try {
        return LabelMap(w, h, std::move(labels));
    } catch (const ContractViolation& e) {
        throw ImageDecodeError(e.what());
    }
}

Bytes encode_png(const RgbImage& image) {
    return png_encode(image.width(), image.height(), PNG_FORMAT_RGB, image.bytes().data());
}

Bytes encode_png(const LabelMap& labels) {
    return png_encode(labels.width(), labels.height(), PNG_FORMAT_GRAY, labels.raw().data());
}

Bytes encode_png(const BinaryMask& mask) {
    std::vector<std::uint8_t> gray(mask.raw().size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.raw()[i] ? 255 : 0;
    return png_encode(mask.width(), mask.height(), PNG_FORMAT_GRAY, gray.data());
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

RgbImage load_rgb(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return decode_rgb(bytes);
    } catch (const ImageDecodeError& e) {
        throw ImageDecodeError(path.string() + ": " + e.what());
    }
}

LabelMap load_label_map(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return decode_label_map(bytes);
    } catch (const ImageDecodeError& e) {
        throw ImageDecodeError(path.string() + ": " + e.what());
    }
}

void save_png(const std::filesystem::path& path, const RgbImage& image) {
    write_file_atomic(path, encode_png(image));
}

void save_png(const std::filesystem::path& path, const LabelMap& labels) {
    write_file_atomic(path, encode_png(labels));
}

void save_png(const std::filesystem::path& path, const BinaryMask& mask) {
    write_file_atomic(path, encode_png(mask));
}

}  // namespace dicti
