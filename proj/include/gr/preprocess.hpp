#pragma once

#include <optional>

#include "gr/imgproc.hpp"

namespace gr::pipeline {

// Parameters of the hand-extraction chain. The same struct drives offline
// dataset preprocessing and the live loop so both produce identical inputs.
struct PreprocessConfig {
    std::optional<int> threshold;  // empty = Otsu
    double expand_ratio = 1.4;
    int median_k = 3;
    int out_w = 64;
    int out_h = 64;
    bool filter_before_resize = true;
    kern::Exec exec = kern::Exec::parallel;
};

struct PreprocessResult {
    BinaryMask input;  // out_w x out_h binary model input
    imgproc::Contour hand;
    imgproc::PalmGeometry palm;
};

// threshold -> largest contour -> palm-centered crop -> median -> resize.
// Throws NoHandError when the frame has no foreground component.
PreprocessResult preprocess_frame(const GrayImage& gray, const PreprocessConfig& cfg);

}  // namespace gr::pipeline
