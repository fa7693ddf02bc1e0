#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gr/common.hpp"
#include "gr/image.hpp"

namespace gr::synthetic {

// Filled white shapes on black, jittered in position and size. Serves as the
// self-contained demo dataset: trivially separable, so any member should
// classify it almost perfectly after a few epochs.
enum class Shape { disk, square, triangle };

const std::vector<std::string>& shape_class_names();

GrayImage render_shape(Shape shape, int size, double cx, double cy, double radius);

GrayImage random_shape_image(Shape shape, int size, Rng& rng);

// Writes per-class subdirectories of PGM files under root.
void write_shape_dataset(const std::filesystem::path& root, int per_class, int size,
                         std::uint64_t seed);

}  // namespace gr::synthetic
