#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "gr/common.hpp"
#include "gr/image.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 1000; ++i) {
            auto candidate = base / (tag + "-" + std::to_string(::rand()) + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directories(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("cannot create temp dir");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// O(N^2) nearest-background search; the border ring outside the image is
// background. Returns squared distances.
inline std::vector<std::int64_t> brute_force_edt_squared(const gr::BinaryMask& mask) {
    std::vector<std::int64_t> out(mask.size(), 0);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            // nearest border cell just outside the image
            long nearest = std::min(std::min(x + 1, y + 1),
                                    std::min(mask.width - x, mask.height - y));
            std::int64_t best = static_cast<std::int64_t>(nearest) * nearest;
            for (int by = 0; by < mask.height; ++by) {
                for (int bx = 0; bx < mask.width; ++bx) {
                    if (mask.at(bx, by)) continue;
                    const std::int64_t d = static_cast<std::int64_t>(bx - x) * (bx - x) +
                                           static_cast<std::int64_t>(by - y) * (by - y);
                    if (d < best) best = d;
                }
            }
            out[static_cast<std::size_t>(y) * mask.width + x] = best;
        }
    }
    return out;
}

// 8-connected component sizes by flood fill, in discovery (scan) order.
inline std::vector<long> flood_fill_component_sizes(const gr::BinaryMask& mask) {
    std::vector<char> seen(mask.size(), 0);
    std::vector<long> sizes;
    const int w = mask.width, h = mask.height;
    std::vector<std::size_t> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!mask.data[idx] || seen[idx]) continue;
            long size = 0;
            stack.assign(1, idx);
            seen[idx] = 1;
            while (!stack.empty()) {
                std::size_t cur = stack.back();
                stack.pop_back();
                ++size;
                int cx = static_cast<int>(cur % w), cy = static_cast<int>(cur / w);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.data[nidx] && !seen[nidx]) {
                            seen[nidx] = 1;
                            stack.push_back(nidx);
                        }
                    }
                }
            }
            sizes.push_back(size);
        }
    }
    return sizes;
}

// Median by fully sorting the replicated-edge window.
template <typename Img>
Img sort_median_oracle(const Img& img, int k) {
    const int r = k / 2;
    Img out(img.width, img.height);
    std::vector<std::uint8_t> window;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            window.clear();
            for (int wy = -r; wy <= r; ++wy) {
                for (int wx = -r; wx <= r; ++wx) {
                    int sx = std::clamp(x + wx, 0, img.width - 1);
                    int sy = std::clamp(y + wy, 0, img.height - 1);
                    window.push_back(img.at(sx, sy));
                }
            }
            std::sort(window.begin(), window.end());
            out.at(x, y) = window[window.size() / 2];
        }
    }
    return out;
}

inline gr::BinaryMask random_mask(gr::Rng& rng, int max_side, double fg_prob = 0.5) {
    const int w = 1 + static_cast<int>(gr::uniform_below(rng, max_side));
    const int h = 1 + static_cast<int>(gr::uniform_below(rng, max_side));
    gr::BinaryMask m(w, h);
    for (auto& v : m.data) v = gr::uniform_unit(rng) < fg_prob ? 1 : 0;
    return m;
}

inline gr::GrayImage random_gray(gr::Rng& rng, int max_side) {
    const int w = 1 + static_cast<int>(gr::uniform_below(rng, max_side));
    const int h = 1 + static_cast<int>(gr::uniform_below(rng, max_side));
    gr::GrayImage img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(gr::uniform_below(rng, 256));
    return img;
}

}  // namespace testsupport
