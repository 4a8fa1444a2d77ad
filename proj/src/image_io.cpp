#include "bevcal/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace bevcal {

namespace {

int channels_for_format(png_uint_32 format) {
    return static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(format));
}

png_uint_32 format_for_channels(int channels) {
    switch (channels) {
        case 1: return PNG_FORMAT_GRAY;
        case 2: return PNG_FORMAT_GA;
        case 3: return PNG_FORMAT_RGB;
        default: return PNG_FORMAT_RGBA;
    }
}

}  // namespace

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::IoFailure, std::string("png: ") + image.message);
    }
    // Keep the stored channel layout, dropping colormaps and 16-bit depth.
    image.format = format_for_channels(channels_for_format(image.format & ~PNG_FORMAT_FLAG_COLORMAP));
    RasterImage img = RasterImage::make_u8(static_cast<int>(image.width), static_cast<int>(image.height),
                                           channels_for_format(image.format));
    if (!png_image_finish_read(&image, nullptr, img.u8().data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw Error(ErrorCode::IoFailure, "png: " + msg);
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    img.validate();
    if (img.type() != SampleType::U8) throw Error(ErrorCode::IoFailure, "PNG output needs 8-bit samples");
    if (img.width == 0 || img.height == 0) throw Error(ErrorCode::IoFailure, "PNG output needs a non-empty image");

    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = format_for_channels(img.channels);

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.u8().data(), 0, nullptr)) {
        throw Error(ErrorCode::IoFailure, std::string("png: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.u8().data(), 0, nullptr)) {
        throw Error(ErrorCode::IoFailure, std::string("png: ") + image.message);
    }
    out.resize(size);
    return out;
}

RasterImage decode_pfm(std::span<const std::uint8_t> bytes) {
    const std::string text(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 256)));
    std::istringstream header(text);
    std::string magic;
    int width = 0;
    int height = 0;
    double scale = 0.0;
    header >> magic >> width >> height >> scale;
    if (!header || (magic != "Pf" && magic != "PF") || width <= 0 || height <= 0 || scale == 0.0) {
        throw Error(ErrorCode::IoFailure, "malformed PFM header");
    }
    // Exactly one whitespace byte separates the scale from the raster.
    const auto data_start = static_cast<std::size_t>(header.tellg()) + 1;
    const int channels = magic == "PF" ? 3 : 1;
    RasterImage img = RasterImage::make_f32(width, height, channels);
    auto& data = img.f32();
    if (bytes.size() < data_start + data.size() * sizeof(float)) {
        throw Error(ErrorCode::IoFailure, "truncated PFM raster");
    }
    const bool little = scale < 0.0;
    const std::size_t row = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    for (int y = 0; y < height; ++y) {
        const std::size_t src_row = static_cast<std::size_t>(height - 1 - y);
        for (std::size_t i = 0; i < row; ++i) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, bytes.data() + data_start + (src_row * row + i) * sizeof(float), sizeof(bits));
            if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
            data[static_cast<std::size_t>(y) * row + i] = std::bit_cast<float>(bits);
        }
    }
    return img;
}

std::vector<std::uint8_t> encode_pfm(const RasterImage& img) {
    img.validate();
    if (img.type() != SampleType::F32) throw Error(ErrorCode::IoFailure, "PFM output needs float samples");
    if (img.channels != 1 && img.channels != 3) throw Error(ErrorCode::IoFailure, "PFM supports 1 or 3 channels");
    const std::string header = std::string(img.channels == 3 ? "PF" : "Pf") + "\n" + std::to_string(img.width) +
                               " " + std::to_string(img.height) + "\n" +
                               (std::endian::native == std::endian::little ? "-1.0" : "1.0") + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto& data = img.f32();
    const std::size_t row = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(data.data() + static_cast<std::size_t>(y) * row);
        out.insert(out.end(), p, p + row * sizeof(float));
    }
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

RasterImage read_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (path.extension() == ".pfm") return decode_pfm(bytes);
    return decode_png(bytes);
}

void write_image(const std::filesystem::path& path, const RasterImage& img) {
    write_file_bytes(path, path.extension() == ".pfm" ? encode_pfm(img) : encode_png(img));
}

}  // namespace bevcal
