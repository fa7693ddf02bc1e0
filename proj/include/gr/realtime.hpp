#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gr/ensemble.hpp"
#include "gr/preprocess.hpp"

namespace gr::realtime {

inline constexpr const char* kNoHand = "NO_HAND";

struct Frame {
    GrayImage image;
    double timestamp_ms = 0.0;  // capture time on the steady clock
};

class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<Frame> next() = 0;
};

// Recorded frames: image files in a directory, consumed in name order.
class DirectoryFrameSource final : public FrameSource {
public:
    explicit DirectoryFrameSource(const std::filesystem::path& dir);
    std::optional<Frame> next() override;

private:
    std::vector<std::filesystem::path> files_;
    std::size_t pos_ = 0;
};

// In-memory frames for tests and synthetic clips.
class MemoryFrameSource final : public FrameSource {
public:
    explicit MemoryFrameSource(std::vector<GrayImage> frames) : frames_(std::move(frames)) {}
    std::optional<Frame> next() override;

private:
    std::vector<GrayImage> frames_;
    std::size_t pos_ = 0;
};

// V4L2 capture (Linux). Frames are the Y plane of the YUYV stream.
class CameraFrameSource final : public FrameSource {
public:
    explicit CameraFrameSource(int device_index, int width = 640, int height = 480);
    ~CameraFrameSource() override;
    std::optional<Frame> next() override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "0", "1", ... opens that camera; anything else is a frame directory.
std::unique_ptr<FrameSource> open_source(const std::string& spec);

struct RealtimeConfig {
    pipeline::PreprocessConfig preprocess;
    double bg_learning_rate = 0.05;
    double bg_diff_threshold = 25.0;
    long min_motion_pixels = 50;
    int resume_after_no_hand = 30;  // background updates resume after this many misses
    bool use_motion_gate = true;
    bool capture_inputs = false;  // keep per-frame model inputs (tests, debugging)
    long max_frames = 0;          // 0 = run until the source is exhausted
};

struct FrameResult {
    long frame_index = 0;
    double timestamp_ms = 0.0;
    std::string label;  // class name or NO_HAND
    float confidence = 0.0f;
    double latency_ms = 0.0;    // capture to classification-complete
    std::string diagnostic;     // set when a per-frame failure forced NO_HAND
};

struct LatencyReport {
    std::map<std::string, double> per_class_avg_ms;
    double overall_avg_ms = 0.0;
    double fps = 0.0;
    long frames = 0;
};

struct LiveResult {
    std::vector<FrameResult> frames;
    LatencyReport report;
    std::vector<BinaryMask> model_inputs;  // aligned with frames when captured
};

using FrameCallback = std::function<void(const FrameResult&, const GrayImage&)>;

// The six-stage loop: background update/subtract, threshold, largest contour,
// median filter, crop+resize, ensemble prediction. Per-frame failures emit
// NO_HAND; the loop only ends on source exhaustion, frame budget or stop flag.
LiveResult run_live(FrameSource& source, ensemble::EnsembleModel& model,
                    const RealtimeConfig& cfg, const std::vector<std::string>& class_names,
                    const FrameCallback& on_frame = {},
                    const std::atomic<bool>* stop = nullptr);

// Per-label latency means plus throughput over the given window (seconds).
LatencyReport summarize_latency(const std::vector<FrameResult>& results, double window_s);

double now_ms();

}  // namespace gr::realtime
