#include "gr/realtime.hpp"

#include <algorithm>
#include <chrono>

#include "gr/imageio.hpp"

namespace gr::realtime {

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

DirectoryFrameSource::DirectoryFrameSource(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw InputError("frame directory does not exist: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && io::is_image_file(entry.path()))
            files_.push_back(entry.path());
    }
    if (files_.empty()) throw InputError("no frames in " + dir.string());
    std::sort(files_.begin(), files_.end());
}

std::optional<Frame> DirectoryFrameSource::next() {
    if (pos_ >= files_.size()) return std::nullopt;
    Frame f;
    f.image = io::read_gray(files_[pos_++]);
    f.timestamp_ms = now_ms();
    return f;
}

std::optional<Frame> MemoryFrameSource::next() {
    if (pos_ >= frames_.size()) return std::nullopt;
    Frame f;
    f.image = frames_[pos_++];
    f.timestamp_ms = now_ms();
    return f;
}

std::unique_ptr<FrameSource> open_source(const std::string& spec) {
    if (!spec.empty() && std::all_of(spec.begin(), spec.end(),
                                     [](unsigned char c) { return std::isdigit(c); })) {
        return std::make_unique<CameraFrameSource>(std::stoi(spec));
    }
    return std::make_unique<DirectoryFrameSource>(spec);
}

LiveResult run_live(FrameSource& source, ensemble::EnsembleModel& model,
                    const RealtimeConfig& cfg, const std::vector<std::string>& class_names,
                    const FrameCallback& on_frame, const std::atomic<bool>* stop) {
    if (static_cast<int>(class_names.size()) != model.class_count())
        throw ParameterError("run_live: class name list does not match the model");
    if (cfg.preprocess.median_k < 3 || cfg.preprocess.median_k % 2 == 0)
        throw ParameterError("run_live: median window must be odd and >= 3");
    if (cfg.preprocess.expand_ratio <= 0.0 || cfg.preprocess.out_w <= 0 ||
        cfg.preprocess.out_h <= 0)
        throw ParameterError("run_live: bad crop/resize configuration");

    imgproc::BackgroundModel bg;
    bg.learning_rate = cfg.bg_learning_rate;
    bg.diff_threshold = cfg.bg_diff_threshold;

    LiveResult out;
    long frame_index = 0;
    // starts at the resume threshold: updates run freely until a hand shows up
    int consecutive_no_hand = cfg.resume_after_no_hand;
    double first_capture_ms = 0.0;

    while (!(stop && stop->load())) {
        if (cfg.max_frames > 0 && frame_index >= cfg.max_frames) break;
        std::optional<Frame> frame;
        std::string frame_error;
        try {
            frame = source.next();
        } catch (const Error& e) {
            frame_error = e.what();  // unreadable frame: keep the loop alive
        }
        if (!frame && frame_error.empty()) break;
        if (!frame) {
            FrameResult r;
            r.frame_index = frame_index++;
            r.timestamp_ms = now_ms();
            r.label = kNoHand;
            r.diagnostic = frame_error;
            r.latency_ms = now_ms() - r.timestamp_ms + 1e-6;
            if (r.frame_index == 0) first_capture_ms = r.timestamp_ms;
            if (on_frame) on_frame(r, GrayImage(1, 1));
            out.frames.push_back(std::move(r));
            if (cfg.capture_inputs) out.model_inputs.emplace_back();
            continue;
        }
        if (frame_index == 0) first_capture_ms = frame->timestamp_ms;

        bool gate_open = !cfg.use_motion_gate;
        bool bg_ready = true;
        if (cfg.use_motion_gate) {
            if (!bg.initialized()) {
                imgproc::update_background(bg, frame->image);
                bg_ready = false;
            } else {
                BinaryMask motion = imgproc::subtract_background(bg, frame->image);
                gate_open =
                    static_cast<long>(motion.foreground_count()) >= cfg.min_motion_pixels;
            }
        }

        FrameResult r;
        r.frame_index = frame_index;
        r.timestamp_ms = frame->timestamp_ms;
        r.label = kNoHand;
        BinaryMask model_input;

        if (bg_ready && gate_open) {
            try {
                pipeline::PreprocessResult pre =
                    pipeline::preprocess_frame(frame->image, cfg.preprocess);
                nn::Tensor<float> x(1, cfg.preprocess.out_h, cfg.preprocess.out_w, 1);
                for (long i = 0; i < x.size(); ++i)
                    x.data()[i] = static_cast<float>(pre.input.data[i]);
                ensemble::Prediction p = model.predict(x);
                r.label = class_names[p.label];
                r.confidence = p.confidence;
                model_input = std::move(pre.input);
            } catch (const NoHandError&) {
                // empty frame: the ordinary no-gesture outcome
            } catch (const Error& e) {
                r.diagnostic = e.what();
            }
        }

        // Freeze the estimate while a hand is visible so it is not absorbed;
        // resume once the scene has been hand-free long enough.
        if (cfg.use_motion_gate && bg.initialized()) {
            if (r.label == kNoHand) {
                if (consecutive_no_hand < cfg.resume_after_no_hand) ++consecutive_no_hand;
                if (consecutive_no_hand >= cfg.resume_after_no_hand)
                    imgproc::update_background(bg, frame->image);
            } else {
                consecutive_no_hand = 0;
            }
        }

        r.latency_ms = now_ms() - frame->timestamp_ms;
        if (on_frame) on_frame(r, frame->image);
        out.frames.push_back(r);
        if (cfg.capture_inputs) out.model_inputs.push_back(std::move(model_input));
        ++frame_index;
    }

    if (!out.frames.empty()) {
        const double window_s = std::max((now_ms() - first_capture_ms) / 1000.0, 1e-9);
        out.report = summarize_latency(out.frames, window_s);
    }
    return out;
}

LatencyReport summarize_latency(const std::vector<FrameResult>& results, double window_s) {
    if (results.empty()) throw ParameterError("summarize_latency: no frames");
    if (window_s <= 0.0) throw ParameterError("summarize_latency: window must be positive");

    LatencyReport rep;
    rep.frames = static_cast<long>(results.size());
    std::map<std::string, std::pair<double, long>> acc;
    double total = 0.0;
    for (const auto& r : results) {
        auto& slot = acc[r.label];
        slot.first += r.latency_ms;
        slot.second += 1;
        total += r.latency_ms;
    }
    for (const auto& [label, slot] : acc)
        rep.per_class_avg_ms[label] = slot.first / static_cast<double>(slot.second);
    rep.overall_avg_ms = total / static_cast<double>(results.size());
    rep.fps = static_cast<double>(results.size()) / window_s;
    return rep;
}

}  // namespace gr::realtime
