#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gr/common.hpp"
#include "gr/image.hpp"

namespace gr::dataset {

// Directory-of-directories dataset snapshot. Class order is lexicographic and
// defines the integer labels; the global sample index runs class-major.
struct DatasetManifest {
    std::string root;
    std::vector<std::string> classes;
    std::vector<std::vector<std::string>> files;  // per class, sorted names
    int image_width = 0;                          // 0 = unconstrained
    int image_height = 0;

    long total_samples() const;
    int label_of(long index) const;
    std::filesystem::path path_of(long index) const;
    long class_count(int label) const { return static_cast<long>(files[label].size()); }
};

struct Split {
    std::uint64_t seed = 0;
    std::vector<long> train;
    std::vector<long> val;
    std::vector<long> test;
};

struct AugmentConfig {
    double rotation_deg = 15.0;
    double zoom = 0.1;
    double shift_frac = 0.1;
    bool hflip = true;
    bool vflip = false;
    std::uint64_t seed = 0;

    static AugmentConfig off() { return {0.0, 0.0, 0.0, false, false, 0}; }
    bool is_identity() const {
        return rotation_deg == 0.0 && zoom == 0.0 && shift_frac == 0.0 && !hflip && !vflip;
    }
};

// Scans root for one subdirectory per class holding .png/.pgm files.
DatasetManifest ingest(const std::filesystem::path& root);

// Stratified per class: seeded shuffle, first 80% -> (75% train, 25% val),
// last 20% -> test. Every class needs at least 5 samples.
Split split(const DatasetManifest& manifest, std::uint64_t seed);

// Random rotation/zoom/shift/flip; output dims equal input dims and pixels
// leaving the frame become background. Draw order per image: rotation, zoom,
// shift x, shift y, then one draw per enabled flip.
GrayImage augment(const GrayImage& image, const AugmentConfig& cfg, Rng& rng);

// Deterministic core used by augment once parameters are drawn.
GrayImage warp(const GrayImage& image, double rotation_deg, double zoom, double shift_x_frac,
               double shift_y_frac, bool hflip, bool vflip);

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json split_to_json(const Split& s);
Split split_from_json(const nlohmann::json& j);

}  // namespace gr::dataset
