#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gr/image.hpp"
#include "gr/kernels.hpp"

namespace gr::imgproc {

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;
};

// Closed boundary chain of one 8-connected foreground component.
// area counts the component's pixels, not the polygon enclosed by the chain.
struct Contour {
    std::vector<Point> boundary;
    long area = 0;
    BBox bbox;
};

struct PalmGeometry {
    Point center;
    double radius = 0.0;  // distance-transform value at center
};

// Running-average background estimate for motion gating.
struct BackgroundModel {
    std::vector<double> accumulator;
    int width = 0;
    int height = 0;
    double learning_rate = 0.05;
    double diff_threshold = 25.0;

    bool initialized() const { return !accumulator.empty(); }
};

// luma = round(0.299 R + 0.587 G + 0.114 B), clamped to [0,255]
GrayImage to_grayscale(const RgbImage& rgb);

// Foreground = intensity strictly above the threshold. Without an explicit
// threshold, Otsu's between-class-variance criterion picks one; ties across a
// plateau of maximizers resolve to the plateau midpoint.
BinaryMask threshold_binary(const GrayImage& img, std::optional<int> threshold = std::nullopt);
int otsu_threshold(const GrayImage& img);

// accumulator <- (1-rate)*accumulator + rate*frame; first frame is adopted.
void update_background(BackgroundModel& model, const GrayImage& frame);
// foreground where |frame - accumulator| > diff_threshold
BinaryMask subtract_background(const BackgroundModel& model, const GrayImage& frame);

// One contour per 8-connected component, discovered in row-major order of the
// component's first pixel. Boundary traced clockwise from that pixel.
std::vector<Contour> extract_contours(const BinaryMask& mask);

// Max area; ties broken by smaller bbox.x_min, then bbox.y_min.
const Contour& largest_contour(const std::vector<Contour>& contours);

// Filled mask of the single component the contour was traced from.
BinaryMask component_mask(const BinaryMask& mask, const Contour& contour);

// Exact Euclidean distance to the nearest background pixel; the image border
// counts as background. Background pixels map to 0.
RealMap distance_transform(const BinaryMask& mask, kern::Exec exec = kern::Exec::parallel);
// Same field as squared integers, for exact comparisons.
std::vector<std::int64_t> distance_transform_squared(const BinaryMask& mask,
                                                     kern::Exec exec = kern::Exec::parallel);

// center = argmax of the distance transform (ties: smallest y, then x);
// radius = the value there.
PalmGeometry palm_geometry(const BinaryMask& mask);

// Square crop of side round(2*expand*radius) centered on the palm; regions
// outside the source stay background so the output is always that square.
BinaryMask crop_hand(const BinaryMask& mask, const PalmGeometry& palm, double expand = 1.4);

// k x k median with edge replication; k must be odd and >= 3.
GrayImage median_filter(const GrayImage& img, int k, kern::Exec exec = kern::Exec::parallel);
BinaryMask median_filter(const BinaryMask& mask, int k, kern::Exec exec = kern::Exec::parallel);

// Bilinear resampling with half-pixel centers. Masks are interpolated on
// {0,255} and re-thresholded at 127 so the result stays binary.
GrayImage resize(const GrayImage& img, int w, int h, kern::Exec exec = kern::Exec::parallel);
BinaryMask resize(const BinaryMask& mask, int w, int h, kern::Exec exec = kern::Exec::parallel);

}  // namespace gr::imgproc
