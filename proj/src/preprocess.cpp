#include "gr/preprocess.hpp"

namespace gr::pipeline {

PreprocessResult preprocess_frame(const GrayImage& gray, const PreprocessConfig& cfg) {
    namespace ip = gr::imgproc;

    BinaryMask bin = ip::threshold_binary(gray, cfg.threshold);
    auto contours = ip::extract_contours(bin);
    const ip::Contour& hand = ip::largest_contour(contours);  // throws NoHandError when empty

    BinaryMask hand_mask = ip::component_mask(bin, hand);
    ip::PalmGeometry palm = ip::palm_geometry(hand_mask);
    BinaryMask crop = ip::crop_hand(hand_mask, palm, cfg.expand_ratio);

    BinaryMask input;
    if (cfg.filter_before_resize) {
        crop = ip::median_filter(crop, cfg.median_k, cfg.exec);
        input = ip::resize(crop, cfg.out_w, cfg.out_h, cfg.exec);
    } else {
        input = ip::resize(crop, cfg.out_w, cfg.out_h, cfg.exec);
        input = ip::median_filter(input, cfg.median_k, cfg.exec);
    }

    PreprocessResult r;
    r.input = std::move(input);
    r.hand = hand;
    r.palm = palm;
    return r;
}

}  // namespace gr::pipeline
