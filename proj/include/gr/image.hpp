#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gr/common.hpp"

namespace gr {

// 8-bit single-channel raster, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw DimensionError("GrayImage: dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

// Interleaved 8-bit RGB.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // r,g,b per pixel

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw DimensionError("RgbImage: dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * h * 3, 0);
    }
};

// Per-pixel {0,1} labels; 1 = foreground.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw DimensionError("BinaryMask: dimensions must be positive");
        if (fill > 1) throw ParameterError("BinaryMask: fill must be 0 or 1");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (auto v : data) n += v;
        return n;
    }
};

// Dense real-valued map aligned with an image grid (distance fields etc).
struct RealMap {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    RealMap() = default;
    RealMap(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw DimensionError("RealMap: dimensions must be positive");
        data.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

inline bool same_dims(int w1, int h1, int w2, int h2) { return w1 == w2 && h1 == h2; }

}  // namespace gr
