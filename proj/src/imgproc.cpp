#include "gr/imgproc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace gr::imgproc {
namespace {

constexpr std::int64_t kFar = std::numeric_limits<std::int32_t>::max();

void check_dims(int w, int h, const char* what) {
    if (w <= 0 || h <= 0) throw DimensionError(std::string(what) + ": empty input");
}

// 1D squared-distance transform (lower envelope of parabolas).
// f holds per-cell seed costs; out receives min over i of (x-i)^2 + f[i].
void edt_1d(const std::int64_t* f, std::int64_t* out, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        if (f[q] >= kFar) continue;
        double s;
        for (;;) {
            int p = v[k];
            s = (static_cast<double>(f[q] + static_cast<std::int64_t>(q) * q) -
                 static_cast<double>(f[p] + static_cast<std::int64_t>(p) * p)) /
                (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        std::int64_t d = static_cast<std::int64_t>(q - v[k]) * (q - v[k]);
        out[q] = f[v[k]] >= kFar ? kFar : d + f[v[k]];
    }
}

}  // namespace

GrayImage to_grayscale(const RgbImage& rgb) {
    check_dims(rgb.width, rgb.height, "to_grayscale");
    GrayImage out(rgb.width, rgb.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = 0.299 * rgb.data[i * 3] + 0.587 * rgb.data[i * 3 + 1] +
                   0.114 * rgb.data[i * 3 + 2];
        out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return out;
}

int otsu_threshold(const GrayImage& img) {
    check_dims(img.width, img.height, "otsu_threshold");
    std::array<std::int64_t, 256> hist{};
    for (auto v : img.data) ++hist[v];
    const double total = static_cast<double>(img.size());

    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];

    double best = -1.0;
    int lo = 0, hi = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < 256; ++t) {
        w0 += hist[t];
        sum0 += static_cast<double>(t) * hist[t];
        double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        double mu0 = sum0 / w0;
        double mu1 = (sum_all - sum0) / w1;
        double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best + 1e-9 * std::max(1.0, best)) {
            best = between;
            lo = hi = t;
        } else if (best >= 0.0 && between >= best - 1e-9 * std::max(1.0, best)) {
            hi = t;
        }
    }
    if (best < 0.0) return 127;  // constant image: any threshold is equivalent
    return (lo + hi) / 2;        // midpoint of the maximizing plateau
}

BinaryMask threshold_binary(const GrayImage& img, std::optional<int> threshold) {
    check_dims(img.width, img.height, "threshold_binary");
    int t = threshold ? *threshold : otsu_threshold(img);
    if (t < 0 || t > 255) throw ParameterError("threshold must be in [0,255]");
    BinaryMask out(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = img.data[i] > t ? 1 : 0;
    return out;
}

void update_background(BackgroundModel& model, const GrayImage& frame) {
    check_dims(frame.width, frame.height, "update_background");
    if (model.learning_rate <= 0.0 || model.learning_rate > 1.0)
        throw ParameterError("learning_rate must be in (0,1]");
    if (!model.initialized()) {
        model.width = frame.width;
        model.height = frame.height;
        model.accumulator.assign(frame.data.begin(), frame.data.end());
        return;
    }
    if (!same_dims(model.width, model.height, frame.width, frame.height))
        throw DimensionError("update_background: frame dimensions changed");
    const double a = model.learning_rate;
    for (std::size_t i = 0; i < model.accumulator.size(); ++i)
        model.accumulator[i] = (1.0 - a) * model.accumulator[i] + a * frame.data[i];
}

BinaryMask subtract_background(const BackgroundModel& model, const GrayImage& frame) {
    if (!model.initialized()) throw ParameterError("subtract_background: model uninitialized");
    if (!same_dims(model.width, model.height, frame.width, frame.height))
        throw DimensionError("subtract_background: dimension mismatch");
    BinaryMask out(frame.width, frame.height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = std::abs(frame.data[i] - model.accumulator[i]) > model.diff_threshold ? 1 : 0;
    return out;
}

std::vector<Contour> extract_contours(const BinaryMask& mask) {
    check_dims(mask.width, mask.height, "extract_contours");
    const int w = mask.width, h = mask.height;
    std::vector<int> label(mask.size(), 0);
    std::vector<Contour> contours;

    auto fg = [&](int x, int y) {
        return x >= 0 && x < w && y >= 0 && y < h && mask.at(x, y) != 0;
    };

    // Moore neighborhood in clockwise order starting east.
    static constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    static constexpr int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

    std::vector<std::size_t> stack;
    int next_label = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y) || label[static_cast<std::size_t>(y) * w + x]) continue;
            ++next_label;

            // flood fill the component for its area and labels
            Contour c;
            c.bbox = {x, y, x, y};
            stack.clear();
            stack.push_back(static_cast<std::size_t>(y) * w + x);
            label[stack[0]] = next_label;
            while (!stack.empty()) {
                std::size_t idx = stack.back();
                stack.pop_back();
                ++c.area;
                int cx = static_cast<int>(idx % w), cy = static_cast<int>(idx / w);
                c.bbox.x_min = std::min(c.bbox.x_min, cx);
                c.bbox.x_max = std::max(c.bbox.x_max, cx);
                c.bbox.y_min = std::min(c.bbox.y_min, cy);
                c.bbox.y_max = std::max(c.bbox.y_max, cy);
                for (int d = 0; d < 8; ++d) {
                    int nx = cx + dx[d], ny = cy + dy[d];
                    if (!fg(nx, ny)) continue;
                    std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (!label[nidx]) {
                        label[nidx] = next_label;
                        stack.push_back(nidx);
                    }
                }
            }

            // Border following from the component's first pixel in scan order;
            // the scan guarantees the pixel to its west is background. The
            // trace ends when leaving the start pixel would repeat the very
            // first move (the walk state would cycle from there on).
            Point start{x, y};
            c.boundary.push_back(start);
            Point cur = start;
            int backtrack = 4;  // behind us: west
            int first_move = -1;
            const std::size_t cap = 8 * static_cast<std::size_t>(c.area) + 8;
            while (c.boundary.size() < cap) {
                int found = -1;
                for (int step = 0; step < 8; ++step) {
                    int dd = (backtrack + 1 + step) % 8;
                    if (fg(cur.x + dx[dd], cur.y + dy[dd])) {
                        found = dd;
                        break;
                    }
                }
                if (found < 0) break;  // isolated pixel
                if (cur == start) {
                    if (first_move < 0) {
                        first_move = found;
                    } else if (found == first_move) {
                        break;  // full cycle complete
                    } else {
                        // passing back through the start (pinch point)
                        c.boundary.push_back(cur);
                    }
                }
                cur = {cur.x + dx[found], cur.y + dy[found]};
                backtrack = (found + 4) % 8;
                if (cur != start) c.boundary.push_back(cur);
            }
            contours.push_back(std::move(c));
        }
    }
    return contours;
}

const Contour& largest_contour(const std::vector<Contour>& contours) {
    if (contours.empty()) throw NoHandError("no contours: no gesture detected");
    const Contour* best = &contours[0];
    for (const auto& c : contours) {
        if (c.area > best->area ||
            (c.area == best->area &&
             (c.bbox.x_min < best->bbox.x_min ||
              (c.bbox.x_min == best->bbox.x_min && c.bbox.y_min < best->bbox.y_min)))) {
            best = &c;
        }
    }
    return *best;
}

BinaryMask component_mask(const BinaryMask& mask, const Contour& contour) {
    check_dims(mask.width, mask.height, "component_mask");
    if (contour.boundary.empty()) throw ParameterError("component_mask: empty contour");
    const int w = mask.width, h = mask.height;
    BinaryMask out(w, h);
    Point seed = contour.boundary.front();
    if (seed.x < 0 || seed.x >= w || seed.y < 0 || seed.y >= h || !mask.at(seed.x, seed.y))
        throw ParameterError("component_mask: contour does not lie on the mask");
    std::vector<std::size_t> stack{static_cast<std::size_t>(seed.y) * w + seed.x};
    out.data[stack[0]] = 1;
    static constexpr int dx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
    static constexpr int dy[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    while (!stack.empty()) {
        std::size_t idx = stack.back();
        stack.pop_back();
        int cx = static_cast<int>(idx % w), cy = static_cast<int>(idx / w);
        for (int d = 0; d < 8; ++d) {
            int nx = cx + dx[d], ny = cy + dy[d];
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (mask.data[nidx] && !out.data[nidx]) {
                out.data[nidx] = 1;
                stack.push_back(nidx);
            }
        }
    }
    return out;
}

std::vector<std::int64_t> distance_transform_squared(const BinaryMask& mask, kern::Exec exec) {
    check_dims(mask.width, mask.height, "distance_transform");
    // Work on a grid padded by one background ring so the border acts as
    // background, then run the two-pass parabola transform.
    const int w = mask.width + 2, h = mask.height + 2;
    std::vector<std::int64_t> grid(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            grid[static_cast<std::size_t>(y + 1) * w + (x + 1)] = mask.at(x, y) ? kFar : 0;

    // pass 1: columns
    std::vector<std::int64_t> tmp(grid.size());
    kern::for_each_index(w, exec, [&](long x) {
        std::vector<std::int64_t> f(h), d(h);
        std::vector<int> v(h);
        std::vector<double> z(h + 1);
        for (int y = 0; y < h; ++y) f[y] = grid[static_cast<std::size_t>(y) * w + x];
        edt_1d(f.data(), d.data(), h, v.data(), z.data());
        for (int y = 0; y < h; ++y) tmp[static_cast<std::size_t>(y) * w + x] = d[y];
    });
    // pass 2: rows
    kern::for_each_index(h, exec, [&](long y) {
        std::vector<std::int64_t> d(w);
        std::vector<int> v(w);
        std::vector<double> z(w + 1);
        edt_1d(&tmp[static_cast<std::size_t>(y) * w], d.data(), w, v.data(), z.data());
        std::copy(d.begin(), d.end(), tmp.begin() + static_cast<std::size_t>(y) * w);
    });

    std::vector<std::int64_t> out(mask.size());
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            out[static_cast<std::size_t>(y) * mask.width + x] =
                tmp[static_cast<std::size_t>(y + 1) * w + (x + 1)];
    return out;
}

RealMap distance_transform(const BinaryMask& mask, kern::Exec exec) {
    auto sq = distance_transform_squared(mask, exec);
    RealMap out(mask.width, mask.height);
    for (std::size_t i = 0; i < sq.size(); ++i)
        out.data[i] = std::sqrt(static_cast<double>(sq[i]));
    return out;
}

PalmGeometry palm_geometry(const BinaryMask& mask) {
    auto sq = distance_transform_squared(mask);
    std::int64_t best = 0;
    int bx = -1, by = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::int64_t v = sq[static_cast<std::size_t>(y) * mask.width + x];
            if (v > best) {
                best = v;
                bx = x;
                by = y;
            }
        }
    }
    if (bx < 0) throw NoHandError("palm_geometry: mask has no foreground");
    return {{bx, by}, std::sqrt(static_cast<double>(best))};
}

BinaryMask crop_hand(const BinaryMask& mask, const PalmGeometry& palm, double expand) {
    check_dims(mask.width, mask.height, "crop_hand");
    if (expand <= 0.0) throw ParameterError("crop_hand: expand must be positive");
    int side = static_cast<int>(std::lround(2.0 * expand * palm.radius));
    side = std::max(side, 1);
    BinaryMask out(side, side);
    const int x0 = palm.center.x - side / 2;
    const int y0 = palm.center.y - side / 2;
    for (int y = 0; y < side; ++y) {
        int sy = y0 + y;
        if (sy < 0 || sy >= mask.height) continue;
        for (int x = 0; x < side; ++x) {
            int sx = x0 + x;
            if (sx < 0 || sx >= mask.width) continue;
            out.at(x, y) = mask.at(sx, sy);
        }
    }
    return out;
}

namespace {

template <typename Img>
Img median_filter_impl(const Img& img, int k, kern::Exec exec) {
    check_dims(img.width, img.height, "median_filter");
    if (k < 3 || k % 2 == 0) throw ParameterError("median_filter: k must be odd and >= 3");
    const int w = img.width, h = img.height, r = k / 2;
    Img out(w, h);
    kern::for_each_index(h, exec, [&](long y) {
        std::vector<std::uint8_t> window(static_cast<std::size_t>(k) * k);
        for (int x = 0; x < w; ++x) {
            std::size_t n = 0;
            for (int wy = -r; wy <= r; ++wy) {
                int sy = std::clamp(static_cast<int>(y) + wy, 0, h - 1);
                for (int wx = -r; wx <= r; ++wx) {
                    int sx = std::clamp(x + wx, 0, w - 1);
                    window[n++] = img.at(sx, sy);
                }
            }
            auto mid = window.begin() + static_cast<long>(n / 2);
            std::nth_element(window.begin(), mid, window.begin() + static_cast<long>(n));
            out.at(x, static_cast<int>(y)) = *mid;
        }
    });
    return out;
}

// Half-pixel center mapping; exact pass-through when scale is 1.
template <typename Fetch>
double bilinear_sample(Fetch&& fetch, int w, int h, double sx, double sy) {
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    int x0 = static_cast<int>(sx);
    int y0 = static_cast<int>(sy);
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double fx = sx - x0, fy = sy - y0;
    double top = fetch(x0, y0) * (1.0 - fx) + fetch(x1, y0) * fx;
    double bot = fetch(x0, y1) * (1.0 - fx) + fetch(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace

GrayImage median_filter(const GrayImage& img, int k, kern::Exec exec) {
    return median_filter_impl(img, k, exec);
}

BinaryMask median_filter(const BinaryMask& mask, int k, kern::Exec exec) {
    return median_filter_impl(mask, k, exec);
}

GrayImage resize(const GrayImage& img, int w, int h, kern::Exec exec) {
    check_dims(img.width, img.height, "resize");
    if (w <= 0 || h <= 0) throw DimensionError("resize: target dimensions must be positive");
    GrayImage out(w, h);
    const double sx = static_cast<double>(img.width) / w;
    const double sy = static_cast<double>(img.height) / h;
    kern::for_each_index(h, exec, [&](long y) {
        for (int x = 0; x < w; ++x) {
            double v = bilinear_sample([&](int ix, int iy) { return double(img.at(ix, iy)); },
                                       img.width, img.height, (x + 0.5) * sx - 0.5,
                                       (y + 0.5) * sy - 0.5);
            out.at(x, static_cast<int>(y)) =
                static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    });
    return out;
}

BinaryMask resize(const BinaryMask& mask, int w, int h, kern::Exec exec) {
    check_dims(mask.width, mask.height, "resize");
    if (w <= 0 || h <= 0) throw DimensionError("resize: target dimensions must be positive");
    BinaryMask out(w, h);
    const double sx = static_cast<double>(mask.width) / w;
    const double sy = static_cast<double>(mask.height) / h;
    kern::for_each_index(h, exec, [&](long y) {
        for (int x = 0; x < w; ++x) {
            double v = bilinear_sample(
                [&](int ix, int iy) { return mask.at(ix, iy) ? 255.0 : 0.0; }, mask.width,
                mask.height, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
            out.at(x, static_cast<int>(y)) = v > 127.0 ? 1 : 0;
        }
    });
    return out;
}

}  // namespace gr::imgproc
