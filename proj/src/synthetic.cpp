#include "gr/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "gr/imageio.hpp"

namespace gr::synthetic {

const std::vector<std::string>& shape_class_names() {
    static const std::vector<std::string> names = {"disk", "square", "triangle"};
    return names;
}

GrayImage render_shape(Shape shape, int size, double cx, double cy, double radius) {
    GrayImage img(size, size, 0);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x - cx, dy = y - cy;
            bool inside = false;
            switch (shape) {
                case Shape::disk:
                    inside = dx * dx + dy * dy <= radius * radius;
                    break;
                case Shape::square:
                    inside = std::abs(dx) <= radius && std::abs(dy) <= radius;
                    break;
                case Shape::triangle:
                    // apex up at (cx, cy - radius)
                    inside = dy >= -radius && dy <= radius &&
                             std::abs(dx) <= (dy + radius) * 0.6;
                    break;
            }
            if (inside) img.at(x, y) = 255;
        }
    }
    return img;
}

GrayImage random_shape_image(Shape shape, int size, Rng& rng) {
    // jitter and size ranges keep the classes separable even for a plain
    // nearest-centroid rule, while still giving the models real variation
    const double jitter = size / 16.0;
    const double cx = size / 2.0 + uniform_range(rng, -jitter, jitter);
    const double cy = size / 2.0 + uniform_range(rng, -jitter, jitter);
    const double radius = uniform_range(rng, size * 0.26, size * 0.32);
    return render_shape(shape, size, cx, cy, radius);
}

void write_shape_dataset(const std::filesystem::path& root, int per_class, int size,
                         std::uint64_t seed) {
    static const Shape shapes[] = {Shape::disk, Shape::square, Shape::triangle};
    Rng rng(seed);
    char name[32];
    for (int c = 0; c < 3; ++c) {
        const auto dir = root / shape_class_names()[c];
        std::filesystem::create_directories(dir);
        for (int i = 0; i < per_class; ++i) {
            std::snprintf(name, sizeof(name), "img_%04d.pgm", i);
            io::write_gray(dir / name, random_shape_image(shapes[c], size, rng));
        }
    }
}

}  // namespace gr::synthetic
