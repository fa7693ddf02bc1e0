#include "gr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gr/imageio.hpp"

namespace gr::dataset {

long DatasetManifest::total_samples() const {
    long n = 0;
    for (const auto& f : files) n += static_cast<long>(f.size());
    return n;
}

int DatasetManifest::label_of(long index) const {
    long off = index;
    for (std::size_t c = 0; c < files.size(); ++c) {
        if (off < static_cast<long>(files[c].size())) return static_cast<int>(c);
        off -= static_cast<long>(files[c].size());
    }
    throw ParameterError("sample index out of range");
}

std::filesystem::path DatasetManifest::path_of(long index) const {
    long off = index;
    for (std::size_t c = 0; c < files.size(); ++c) {
        if (off < static_cast<long>(files[c].size()))
            return std::filesystem::path(root) / classes[c] / files[c][off];
        off -= static_cast<long>(files[c].size());
    }
    throw ParameterError("sample index out of range");
}

DatasetManifest ingest(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw InputError("dataset root does not exist: " + root.string());

    DatasetManifest m;
    m.root = root.string();
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_directory()) m.classes.push_back(entry.path().filename().string());
    }
    if (m.classes.empty()) throw InputError("dataset root has no class directories");
    std::sort(m.classes.begin(), m.classes.end());

    for (const auto& cls : m.classes) {
        std::vector<std::string> names;
        for (const auto& entry : std::filesystem::directory_iterator(root / cls)) {
            if (entry.is_regular_file() && io::is_image_file(entry.path()))
                names.push_back(entry.path().filename().string());
        }
        if (names.empty()) throw InputError("class directory has no readable images: " + cls);
        std::sort(names.begin(), names.end());
        m.files.push_back(std::move(names));
    }
    return m;
}

Split split(const DatasetManifest& manifest, std::uint64_t seed) {
    Split s;
    s.seed = seed;
    Rng rng(seed);
    long base = 0;
    for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
        const long n = static_cast<long>(manifest.files[c].size());
        if (n < 5)
            throw InputError("class too small to stratify (< 5 samples): " + manifest.classes[c]);
        std::vector<long> idx(n);
        for (long i = 0; i < n; ++i) idx[i] = base + i;
        portable_shuffle(idx, rng);

        const long n80 = std::lround(0.8 * n);
        const long n_train = std::lround(0.75 * n80);
        for (long i = 0; i < n_train; ++i) s.train.push_back(idx[i]);
        for (long i = n_train; i < n80; ++i) s.val.push_back(idx[i]);
        for (long i = n80; i < n; ++i) s.test.push_back(idx[i]);
        base += n;
    }
    return s;
}

namespace {

double sample_zero_fill(const GrayImage& img, double sx, double sy) {
    // tolerance keeps border pixels alive under rotation round-off
    constexpr double eps = 1e-9;
    if (sx < -eps || sy < -eps || sx > img.width - 1 + eps || sy > img.height - 1 + eps)
        return 0.0;
    sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
    int x0 = static_cast<int>(sx);
    int y0 = static_cast<int>(sy);
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = sx - x0, fy = sy - y0;
    double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace

GrayImage warp(const GrayImage& image, double rotation_deg, double zoom, double shift_x_frac,
               double shift_y_frac, bool hflip, bool vflip) {
    if (zoom <= 0.0) throw ParameterError("warp: zoom factor must be positive");
    const int w = image.width, h = image.height;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double theta = rotation_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double tx = shift_x_frac * w, ty = shift_y_frac * h;

    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double ox = hflip ? (w - 1 - x) : x;
            double oy = vflip ? (h - 1 - y) : y;
            double du = ox - tx - cx;
            double dv = oy - ty - cy;
            double rx = (ct * du + st * dv) / zoom;
            double ry = (-st * du + ct * dv) / zoom;
            double v = sample_zero_fill(image, cx + rx, cy + ry);
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return out;
}

GrayImage augment(const GrayImage& image, const AugmentConfig& cfg, Rng& rng) {
    if (cfg.rotation_deg < 0 || cfg.zoom < 0 || cfg.zoom >= 1.0 || cfg.shift_frac < 0)
        throw ParameterError("augment: magnitudes must be >= 0 and zoom < 1");
    const double rot = uniform_range(rng, -cfg.rotation_deg, cfg.rotation_deg);
    const double zoom = uniform_range(rng, 1.0 - cfg.zoom, 1.0 + cfg.zoom);
    const double sx = uniform_range(rng, -cfg.shift_frac, cfg.shift_frac);
    const double sy = uniform_range(rng, -cfg.shift_frac, cfg.shift_frac);
    const bool hf = cfg.hflip && uniform_unit(rng) < 0.5;
    const bool vf = cfg.vflip && uniform_unit(rng) < 0.5;
    return warp(image, rot, zoom, sx, sy, hf, vf);
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["root"] = m.root;
    j["classes"] = m.classes;
    std::vector<long> counts;
    for (const auto& f : m.files) counts.push_back(static_cast<long>(f.size()));
    j["counts"] = counts;
    nlohmann::json files = nlohmann::json::object();
    for (std::size_t c = 0; c < m.classes.size(); ++c) files[m.classes[c]] = m.files[c];
    j["files"] = files;
    j["image_size"] = {m.image_width, m.image_height};
    return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.root = j.at("root").get<std::string>();
    m.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& cls : m.classes)
        m.files.push_back(j.at("files").at(cls).get<std::vector<std::string>>());
    if (j.contains("image_size")) {
        m.image_width = j["image_size"].at(0).get<int>();
        m.image_height = j["image_size"].at(1).get<int>();
    }
    return m;
}

nlohmann::json split_to_json(const Split& s) {
    return nlohmann::json{{"seed", s.seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

Split split_from_json(const nlohmann::json& j) {
    Split s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<long>>();
    s.val = j.at("val").get<std::vector<long>>();
    s.test = j.at("test").get<std::vector<long>>();
    return s;
}

}  // namespace gr::dataset
