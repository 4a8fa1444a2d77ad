#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "bevcal/error.hpp"

namespace bevcal {

enum class SampleType { U8, F32 };

/// Row-major interleaved raster with 1-4 channels of 8-bit or float samples.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::variant<std::vector<std::uint8_t>, std::vector<float>> data;

    static RasterImage make_u8(int width, int height, int channels, std::uint8_t value = 0) {
        check_shape(width, height, channels);
        return {width, height, channels,
                std::vector<std::uint8_t>(element_count(width, height, channels), value)};
    }

    static RasterImage make_f32(int width, int height, int channels, float value = 0.0f) {
        check_shape(width, height, channels);
        return {width, height, channels, std::vector<float>(element_count(width, height, channels), value)};
    }

    SampleType type() const noexcept {
        return std::holds_alternative<std::vector<float>>(data) ? SampleType::F32 : SampleType::U8;
    }

    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }

    std::vector<std::uint8_t>& u8() { return std::get<std::vector<std::uint8_t>>(data); }
    const std::vector<std::uint8_t>& u8() const { return std::get<std::vector<std::uint8_t>>(data); }
    std::vector<float>& f32() { return std::get<std::vector<float>>(data); }
    const std::vector<float>& f32() const { return std::get<std::vector<float>>(data); }

    /// Throws InvalidArgument unless data length equals width*height*channels.
    void validate() const {
        check_shape(width, height, channels);
        const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data);
        if (n != element_count(width, height, channels)) {
            throw Error(ErrorCode::InvalidArgument, "raster data length does not match its shape");
        }
    }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    static void check_shape(int width, int height, int channels) {
        if (width < 0 || height < 0 || channels < 1 || channels > 4) {
            throw Error(ErrorCode::InvalidArgument, "raster needs non-negative size and 1-4 channels");
        }
    }
    static std::size_t element_count(int width, int height, int channels) {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(channels);
    }
};

}  // namespace bevcal
