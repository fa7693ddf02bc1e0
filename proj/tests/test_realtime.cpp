#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "gr/eval.hpp"
#include "gr/realtime.hpp"
#include "gr/serialize.hpp"
#include "shape_dataset.hpp"
#include "support.hpp"

using namespace gr;
namespace rt = gr::realtime;

namespace {

trainer::TrainedModel stub_member(const std::string& name, int predicted_class,
                                  int num_classes, int input_side) {
    modelzoo::ModelSpec m;
    m.name = name;
    m.input = {input_side, input_side, 1, false};
    m.num_classes = num_classes;
    m.layers = {modelzoo::LayerSpec::Flatten(), modelzoo::LayerSpec::Dense(num_classes),
                modelzoo::LayerSpec::Softmax()};
    trainer::TrainedModel model;
    model.spec = m;
    model.weights["l01/kernel"] =
        std::vector<float>(static_cast<std::size_t>(input_side) * input_side * num_classes,
                           0.0f);
    std::vector<float> bias(num_classes, 0.0f);
    bias[predicted_class] = 4.0f;
    model.weights["l01/bias"] = bias;
    return model;
}

GrayImage blob_frame(int w, int h, int x0, int y0, int side) {
    GrayImage img(w, h, 0);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x)
            if (x >= 0 && x < w && y >= 0 && y < h) img.at(x, y) = 230;
    return img;
}

}  // namespace

TEST_CASE("static background yields NO_HAND on every frame") {
    std::vector<GrayImage> frames(5, GrayImage(80, 60, 10));
    rt::MemoryFrameSource source(std::move(frames));

    ensemble::EnsembleModel model({stub_member("stub", 1, 3, 64)});
    rt::RealtimeConfig cfg;
    auto result = rt::run_live(source, model, cfg, {"a", "b", "c"});

    REQUIRE(result.frames.size() == 5);
    for (const auto& f : result.frames) {
        CHECK(f.label == rt::kNoHand);
        CHECK(f.latency_ms > 0.0);
    }
    CHECK(result.report.frames == 5);
}

TEST_CASE("a moving blob is classified with the stub label on every active frame") {
    std::vector<GrayImage> frames;
    frames.push_back(GrayImage(120, 90, 0));  // background priming frame
    for (int i = 0; i < 6; ++i) frames.push_back(blob_frame(120, 90, 20 + 6 * i, 25, 30));
    rt::MemoryFrameSource source(std::move(frames));

    ensemble::EnsembleModel model({stub_member("stub", 2, 3, 64)});
    rt::RealtimeConfig cfg;
    auto result = rt::run_live(source, model, cfg, {"a", "b", "c"});

    REQUIRE(result.frames.size() == 7);
    CHECK(result.frames[0].label == rt::kNoHand);  // model adoption frame
    for (std::size_t i = 1; i < result.frames.size(); ++i) {
        CHECK(result.frames[i].label == "c");
        CHECK(result.frames[i].confidence > 0.5f);
        CHECK(result.frames[i].latency_ms > 0.0);
    }

    // results arrive in capture order
    for (std::size_t i = 0; i < result.frames.size(); ++i)
        CHECK(result.frames[i].frame_index == static_cast<long>(i));

    // per-class averages recomputed independently
    double sum_c = 0.0;
    long n_c = 0;
    for (const auto& f : result.frames)
        if (f.label == "c") {
            sum_c += f.latency_ms;
            ++n_c;
        }
    CHECK(result.report.per_class_avg_ms.at("c") ==
          doctest::Approx(sum_c / n_c).epsilon(1e-9));
}

TEST_CASE("live model input is bit-identical to the offline chain") {
    GrayImage frame = blob_frame(100, 80, 30, 20, 26);
    pipeline::PreprocessConfig pcfg;  // auto threshold, expand 1.4, median 3, 64x64
    auto offline = pipeline::preprocess_frame(frame, pcfg);

    std::vector<GrayImage> frames;
    frames.push_back(GrayImage(100, 80, 0));
    frames.push_back(frame);
    rt::MemoryFrameSource source(std::move(frames));

    ensemble::EnsembleModel model({stub_member("stub", 0, 3, 64)});
    rt::RealtimeConfig cfg;
    cfg.preprocess = pcfg;
    cfg.capture_inputs = true;
    auto result = rt::run_live(source, model, cfg, {"a", "b", "c"});

    REQUIRE(result.model_inputs.size() == 2);
    CHECK(result.frames[1].label == "a");
    CHECK(result.model_inputs[1].width == offline.input.width);
    CHECK(result.model_inputs[1].data == offline.input.data);
}

TEST_CASE("background updates run before any hand, freeze while one is present") {
    // scene brightness drifts; the model must keep absorbing it while no
    // hand is detected, so drift alone never becomes foreground
    std::vector<GrayImage> frames;
    for (int i = 0; i < 8; ++i) frames.push_back(GrayImage(90, 70, 100 + 2 * i));
    // hand enters and stays
    for (int i = 0; i < 4; ++i) frames.push_back(blob_frame(90, 70, 20 + 4 * i, 20, 28));
    rt::MemoryFrameSource source(std::move(frames));

    ensemble::EnsembleModel model({stub_member("stub", 1, 3, 64)});
    rt::RealtimeConfig cfg;
    cfg.bg_diff_threshold = 25.0;
    cfg.resume_after_no_hand = 30;  // never reached in this clip
    auto result = rt::run_live(source, model, cfg, {"a", "b", "c"});

    REQUIRE(result.frames.size() == 12);
    for (int i = 0; i < 8; ++i) CHECK(result.frames[i].label == rt::kNoHand);
    // hand frames all classified: the background kept tracking the drift
    // beforehand and froze afterwards instead of absorbing the hand
    for (int i = 8; i < 12; ++i) CHECK(result.frames[i].label == "b");
}

TEST_CASE("summarize_latency groups by label and reports fps") {
    std::vector<rt::FrameResult> frames;
    auto mk = [&](const std::string& label, double latency) {
        rt::FrameResult f;
        f.frame_index = static_cast<long>(frames.size());
        f.label = label;
        f.latency_ms = latency;
        frames.push_back(f);
    };
    mk("ok", 0.106);
    mk("ok", 0.098);
    mk("ok", 0.091);
    auto rep = rt::summarize_latency(frames, 5.0);
    CHECK(rep.per_class_avg_ms.at("ok") == doctest::Approx((0.106 + 0.098 + 0.091) / 3.0));
    CHECK(rep.per_class_avg_ms.at("ok") == doctest::Approx(0.0983).epsilon(1e-3));
    CHECK(rep.overall_avg_ms == doctest::Approx(0.098333).epsilon(1e-4));

    // 100 frames over 5 seconds: 20 fps
    std::vector<rt::FrameResult> hundred;
    for (int i = 0; i < 100; ++i) {
        rt::FrameResult f;
        f.label = i % 2 ? "x" : "y";
        f.latency_ms = 1.0 + i;
        hundred.push_back(f);
    }
    auto rep2 = rt::summarize_latency(hundred, 5.0);
    CHECK(rep2.fps == doctest::Approx(20.0));

    // single frame: the report collapses to that frame
    auto rep3 = rt::summarize_latency({frames[0]}, 1.0);
    CHECK(rep3.overall_avg_ms == doctest::Approx(0.106));
    CHECK(rep3.frames == 1);

    CHECK_THROWS_AS(rt::summarize_latency({}, 5.0), ParameterError);
}

TEST_CASE("overall average equals the mean of per-frame latencies") {
    Rng rng(66);
    std::vector<rt::FrameResult> frames;
    double total = 0.0;
    for (int i = 0; i < 40; ++i) {
        rt::FrameResult f;
        f.label = "g" + std::to_string(uniform_below(rng, 4));
        f.latency_ms = uniform_range(rng, 0.05, 3.0);
        total += f.latency_ms;
        frames.push_back(f);
    }
    auto rep = rt::summarize_latency(frames, 2.0);
    CHECK(rep.overall_avg_ms == doctest::Approx(total / 40.0).epsilon(1e-12));
}

TEST_CASE("an unreadable frame yields NO_HAND with a diagnostic, not an abort") {
    testsupport::TempDir tmp("corrupt");
    io::write_gray(tmp.path() / "a.pgm", GrayImage(90, 70, 0));
    {
        std::ofstream bad(tmp.path() / "b.png", std::ios::binary);
        bad << "not a png at all";
    }
    io::write_gray(tmp.path() / "c.pgm", blob_frame(90, 70, 25, 20, 30));

    rt::DirectoryFrameSource source(tmp.path());
    ensemble::EnsembleModel model({stub_member("stub", 0, 3, 64)});
    rt::RealtimeConfig cfg;
    auto result = rt::run_live(source, model, cfg, {"a", "b", "c"});

    REQUIRE(result.frames.size() == 3);
    CHECK(result.frames[1].label == rt::kNoHand);
    CHECK(!result.frames[1].diagnostic.empty());
    CHECK(result.frames[2].label == "a");  // loop survived the bad frame
}

TEST_CASE("run_live rejects a bad preprocess configuration up front") {
    rt::MemoryFrameSource source({GrayImage(32, 32, 0)});
    ensemble::EnsembleModel model({stub_member("stub", 0, 3, 64)});
    rt::RealtimeConfig cfg;
    cfg.preprocess.median_k = 4;
    CHECK_THROWS_AS(rt::run_live(source, model, cfg, {"a", "b", "c"}), ParameterError);
}

TEST_CASE("directory frame source reads frames in name order") {
    testsupport::TempDir tmp("frames");
    for (int i = 0; i < 3; ++i) {
        GrayImage img(16, 16, static_cast<std::uint8_t>(40 * i));
        io::write_gray(tmp.path() / ("f" + std::to_string(i) + ".pgm"), img);
    }
    rt::DirectoryFrameSource source(tmp.path());
    for (int i = 0; i < 3; ++i) {
        auto f = source.next();
        REQUIRE(f.has_value());
        CHECK(f->image.data[0] == 40 * i);
        CHECK(f->timestamp_ms > 0.0);
    }
    CHECK(!source.next().has_value());

    CHECK_THROWS_AS(rt::DirectoryFrameSource(tmp.path() / "missing"), InputError);
}

TEST_CASE("k-fold accuracy parts are disjoint, exhaustive and average to the whole") {
    testsupport::TempDir tmp("kfold");
    testsupport::write_shape_dataset(tmp.path(), 20, 16, 12);
    auto manifest = dataset::ingest(tmp.path());

    ensemble::EnsembleModel model({stub_member("stub", 0, 3, 16)});

    std::vector<long> test_indices;
    for (long i = 0; i < manifest.total_samples(); ++i) test_indices.push_back(i);

    // 60 samples, k=6 -> parts of 10
    auto parts_acc = eval::kfold_accuracy_samples(model, manifest, test_indices, 6, 99);
    REQUIRE(parts_acc.size() == 6);

    // equal part sizes: mean of part accuracies equals the overall accuracy
    auto overall = ensemble::evaluate(model, manifest, test_indices);
    double mean = 0.0;
    for (double a : parts_acc) mean += a;
    mean /= 6.0;
    CHECK(mean == doctest::Approx(overall.accuracy).epsilon(1e-9));

    // determinism
    auto again = eval::kfold_accuracy_samples(model, manifest, test_indices, 6, 99);
    CHECK(again == parts_acc);

    CHECK_THROWS_AS(eval::kfold_accuracy_samples(model, manifest, test_indices, 1, 0),
                    ParameterError);
    CHECK_THROWS_AS(eval::kfold_accuracy_samples(model, manifest, test_indices, 61, 0),
                    ParameterError);
}
