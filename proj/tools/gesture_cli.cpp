// Command-line entry point: ingest, preprocess, train, eval, ttest, live.
// Exit codes: 0 success, 2 input error, 3 missing artifact, 4 training
// divergence.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "gr/dataset.hpp"
#include "gr/ensemble.hpp"
#include "gr/eval.hpp"
#include "gr/imageio.hpp"
#include "gr/preprocess.hpp"
#include "gr/realtime.hpp"
#include "gr/serialize.hpp"
#include "gr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

// Flags override config-file values; this holds the merged result.
struct RunConfig {
    std::string data;
    std::string manifest_file;
    std::string split_file;
    std::string out = "out";
    std::uint64_t seed = 0;
    int input_size = 64;
    int epochs = 30;
    int batch_size = 160;
    double learning_rate = 1e-4;
    std::string members = "vgg,alex,goog";
    std::string threshold = "auto";
    double expand_ratio = 1.4;
    int median = 3;
    bool resize_before_filter = false;
    double rotation = 15.0;
    double zoom = 0.1;
    double shift = 0.1;
    bool hflip = true;
    bool vflip = false;
    bool augment_off = false;
    int k = 10;
    double mu = 99.0;
    std::string source;
    std::string ensemble_file;
    std::string models;
    bool display = false;
    bool serial_kernels = false;
    bool parallel_members = false;
    long max_frames = 0;

    gr::kern::Exec exec() const {
        return serial_kernels ? gr::kern::Exec::serial : gr::kern::Exec::parallel;
    }

    std::optional<int> threshold_value() const {
        if (threshold == "auto" || threshold.empty()) return std::nullopt;
        try {
            return std::stoi(threshold);
        } catch (const std::exception&) {
            throw gr::ParameterError("--threshold must be 'auto' or an integer in [0,255]");
        }
    }

    gr::pipeline::PreprocessConfig preprocess_config() const {
        gr::pipeline::PreprocessConfig p;
        p.threshold = threshold_value();
        p.expand_ratio = expand_ratio;
        p.median_k = median;
        p.out_w = input_size;
        p.out_h = input_size;
        p.filter_before_resize = !resize_before_filter;
        p.exec = exec();
        return p;
    }

    gr::trainer::TrainConfig train_config() const {
        gr::trainer::TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.learning_rate = learning_rate;
        t.seed = seed;
        t.exec = exec();
        return t;
    }

    gr::dataset::AugmentConfig augment_config() const {
        if (augment_off) return gr::dataset::AugmentConfig::off();
        gr::dataset::AugmentConfig a;
        a.rotation_deg = rotation;
        a.zoom = zoom;
        a.shift_frac = shift;
        a.hflip = hflip;
        a.vflip = vflip;
        a.seed = seed;
        return a;
    }

    json effective() const {
        return json{{"data", data},
                    {"manifest", manifest_file},
                    {"split", split_file},
                    {"out", out},
                    {"seed", seed},
                    {"input_size", input_size},
                    {"epochs", epochs},
                    {"batch_size", batch_size},
                    {"learning_rate", learning_rate},
                    {"members", members},
                    {"threshold", threshold},
                    {"expand_ratio", expand_ratio},
                    {"median", median},
                    {"resize_before_filter", resize_before_filter},
                    {"rotation", rotation},
                    {"zoom", zoom},
                    {"shift", shift},
                    {"hflip", hflip},
                    {"vflip", vflip},
                    {"augment_off", augment_off},
                    {"k", k},
                    {"mu", mu},
                    {"source", source},
                    {"ensemble", ensemble_file},
                    {"models", models},
                    {"serial_kernels", serial_kernels},
                    {"parallel_members", parallel_members}};
    }
};

void echo_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    gr::serialize::write_json(fs::path(cfg.out) / "effective_config.json", cfg.effective());
}

// Config-file values fill in whatever the user did not pass as a flag;
// explicitly passed flags always win.
void apply_config_file(CLI::App* cmd, RunConfig& cfg, const std::string& file) {
    auto j = gr::serialize::read_json(file);
    auto passed = [&](const char* flag) {
        auto* opt = cmd->get_option_no_throw(flag);
        return opt && opt->count() > 0;
    };
    auto set_if = [&](const char* key, const char* flag, auto& target) {
        if (j.contains(key) && !passed(flag))
            target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    set_if("data", "--data", cfg.data);
    set_if("manifest", "--manifest", cfg.manifest_file);
    set_if("split", "--split", cfg.split_file);
    set_if("out", "--out", cfg.out);
    set_if("seed", "--seed", cfg.seed);
    set_if("input_size", "--size", cfg.input_size);
    set_if("epochs", "--epochs", cfg.epochs);
    set_if("batch_size", "--batch-size", cfg.batch_size);
    set_if("learning_rate", "--lr", cfg.learning_rate);
    set_if("members", "--members", cfg.members);
    set_if("threshold", "--threshold", cfg.threshold);
    set_if("expand_ratio", "--expand-ratio", cfg.expand_ratio);
    set_if("median", "--median", cfg.median);
    set_if("resize_before_filter", "--resize-before-filter", cfg.resize_before_filter);
    set_if("rotation", "--rotation", cfg.rotation);
    set_if("zoom", "--zoom", cfg.zoom);
    set_if("shift", "--shift", cfg.shift);
    set_if("hflip", "--no-hflip", cfg.hflip);
    set_if("vflip", "--vflip", cfg.vflip);
    set_if("augment_off", "--no-augment", cfg.augment_off);
    set_if("k", "--k", cfg.k);
    set_if("mu", "--mu", cfg.mu);
    set_if("source", "--source", cfg.source);
    set_if("ensemble", "--ensemble", cfg.ensemble_file);
    set_if("models", "--models", cfg.models);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        if (comma > pos) out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

gr::modelzoo::ModelSpec member_spec(const std::string& tag, int num_classes) {
    if (tag == "vgg" || tag == "vggnet_like") return gr::modelzoo::vggnet_like(num_classes);
    if (tag == "alex" || tag == "alexnet_like") return gr::modelzoo::alexnet_like(num_classes);
    if (tag == "goog" || tag == "googlenet_like")
        return gr::modelzoo::googlenet_like(num_classes);
    if (tag == "basic" || tag == "basic_cnn") return gr::modelzoo::basic_cnn(num_classes);
    throw gr::InputError("unknown member tag: " + tag +
                         " (expected vgg, alex, goog or basic)");
}

gr::dataset::DatasetManifest load_manifest(const RunConfig& cfg) {
    if (cfg.manifest_file.empty()) throw gr::InputError("--manifest is required");
    return gr::dataset::manifest_from_json(gr::serialize::read_json(cfg.manifest_file));
}

gr::dataset::Split load_or_make_split(const RunConfig& cfg,
                                      const gr::dataset::DatasetManifest& manifest) {
    if (!cfg.split_file.empty())
        return gr::dataset::split_from_json(gr::serialize::read_json(cfg.split_file));
    return gr::dataset::split(manifest, cfg.seed);
}

gr::ensemble::EnsembleModel load_ensemble(const RunConfig& cfg) {
    if (cfg.ensemble_file.empty()) throw gr::InputError("--ensemble is required");
    std::vector<gr::trainer::TrainedModel> members;
    for (const auto& dir : gr::serialize::read_ensemble_manifest(cfg.ensemble_file))
        members.push_back(gr::serialize::load_model(dir));
    return gr::ensemble::EnsembleModel(std::move(members), cfg.exec());
}

// ---- subcommands ----

int cmd_ingest(const RunConfig& cfg) {
    if (cfg.data.empty()) throw gr::InputError("--data is required");
    auto manifest = gr::dataset::ingest(cfg.data);
    echo_config(cfg);
    gr::serialize::write_json(fs::path(cfg.out) / "manifest.json",
                              gr::dataset::manifest_to_json(manifest));
    std::printf("ingested %ld samples across %zu classes -> %s/manifest.json\n",
                manifest.total_samples(), manifest.classes.size(), cfg.out.c_str());
    return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
    auto manifest = load_manifest(cfg);
    const auto pcfg = cfg.preprocess_config();
    echo_config(cfg);

    gr::dataset::DatasetManifest processed;
    processed.root = cfg.out;
    processed.classes = manifest.classes;
    processed.files.resize(manifest.classes.size());
    processed.image_width = pcfg.out_w;
    processed.image_height = pcfg.out_h;
    json skipped = json::array();

    for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
        const fs::path out_dir = fs::path(cfg.out) / manifest.classes[c];
        fs::create_directories(out_dir);
        for (const auto& name : manifest.files[c]) {
            const fs::path src = fs::path(manifest.root) / manifest.classes[c] / name;
            try {
                auto gray = gr::io::read_gray(src);
                auto result = gr::pipeline::preprocess_frame(gray, pcfg);
                fs::path dst_name = fs::path(name).stem();
                dst_name += ".png";
                gr::io::write_mask(out_dir / dst_name, result.input);
                processed.files[c].push_back(dst_name.string());
            } catch (const gr::NoHandError& e) {
                skipped.push_back({{"file", src.string()}, {"reason", e.what()}});
            }
        }
    }

    gr::serialize::write_json(fs::path(cfg.out) / "skipped.json", skipped);
    gr::serialize::write_json(fs::path(cfg.out) / "manifest.json",
                              gr::dataset::manifest_to_json(processed));
    std::printf("preprocessed %ld samples (%zu skipped) -> %s\n", processed.total_samples(),
                skipped.size(), cfg.out.c_str());
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    auto manifest = load_manifest(cfg);
    auto split = load_or_make_split(cfg, manifest);
    echo_config(cfg);
    gr::serialize::write_json(fs::path(cfg.out) / "split.json",
                              gr::dataset::split_to_json(split));

    const int num_classes = static_cast<int>(manifest.classes.size());
    std::vector<gr::modelzoo::ModelSpec> specs;
    for (const auto& tag : split_csv(cfg.members)) specs.push_back(member_spec(tag, num_classes));

    auto results = gr::trainer::train_members(specs, manifest, split, cfg.train_config(),
                                              cfg.augment_config(), cfg.parallel_members);

    std::vector<fs::path> member_dirs;
    bool diverged = false;
    bool failed = false;
    for (const auto& r : results) {
        if (r.model) {
            const fs::path dir = fs::path(cfg.out) / r.name;
            gr::serialize::save_model(dir, *r.model);
            gr::serialize::write_history_csv(dir / "history.csv", r.model->history);
            member_dirs.push_back(dir);
            std::printf("%-16s best val accuracy %.2f%%\n", r.name.c_str(),
                        r.model->best_val_accuracy);
        } else {
            std::fprintf(stderr, "%-16s FAILED: %s\n", r.name.c_str(), r.error.c_str());
            failed = true;
            if (r.error.find("NaN loss") != std::string::npos) diverged = true;
        }
    }
    if (!member_dirs.empty())
        gr::serialize::write_ensemble_manifest(fs::path(cfg.out) / "ensemble.json", member_dirs);
    if (diverged) return 4;
    return failed ? 2 : 0;
}

int cmd_eval(const RunConfig& cfg) {
    auto manifest = load_manifest(cfg);
    auto split = load_or_make_split(cfg, manifest);
    echo_config(cfg);

    std::vector<int> actuals;
    actuals.reserve(split.test.size());
    for (long idx : split.test) actuals.push_back(manifest.label_of(idx));

    json metrics;
    auto report = [&](const std::string& name, double accuracy,
                      const std::vector<int>& predictions) {
        auto cm = gr::eval::confusion(predictions, actuals, manifest.classes);
        gr::serialize::write_text(fs::path(cfg.out) / ("confusion_" + name + ".csv"),
                                  gr::eval::confusion_to_csv(cm));
        auto rates = gr::eval::per_class_rate(cm);
        std::string rates_csv = "class,recognition_rate\n";
        char buf[64];
        for (std::size_t i = 0; i < rates.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s,%.1f\n", manifest.classes[i].c_str(), rates[i]);
            rates_csv += buf;
        }
        gr::serialize::write_text(fs::path(cfg.out) / ("rates_" + name + ".csv"), rates_csv);
        metrics[name] = {{"accuracy", accuracy}};
        std::printf("%-16s test accuracy %.2f%%\n", name.c_str(), accuracy);
    };

    std::vector<gr::trainer::TrainedModel> members;
    if (!cfg.models.empty()) {
        for (const auto& dir : split_csv(cfg.models))
            members.push_back(gr::serialize::load_model(dir));
    } else if (!cfg.ensemble_file.empty()) {
        for (const auto& dir : gr::serialize::read_ensemble_manifest(cfg.ensemble_file))
            members.push_back(gr::serialize::load_model(dir));
    } else {
        throw gr::InputError("--models or --ensemble is required");
    }

    for (const auto& m : members) {
        auto ev = gr::trainer::evaluate(m, manifest, split.test, cfg.exec());
        report(m.name(), ev.accuracy, ev.predictions);
    }
    if (!members.empty()) {
        gr::ensemble::EnsembleModel e(members, cfg.exec());
        auto ev = gr::ensemble::evaluate(e, manifest, split.test);
        report("ensemble", ev.accuracy, ev.predictions);
        metrics["ensemble"]["parameter_count"] = e.parameter_count();
    }
    gr::serialize::write_json(fs::path(cfg.out) / "metrics.json", metrics);
    return 0;
}

int cmd_ttest(const RunConfig& cfg) {
    auto manifest = load_manifest(cfg);
    auto split = load_or_make_split(cfg, manifest);
    auto ensemble = load_ensemble(cfg);
    echo_config(cfg);

    auto accuracies =
        gr::eval::kfold_accuracy_samples(ensemble, manifest, split.test, cfg.k, cfg.seed);
    auto report = gr::eval::one_sample_ttest(accuracies, cfg.mu);

    json j = gr::serialize::ttest_to_json(report);
    j["part_accuracies"] = accuracies;
    gr::serialize::write_json(fs::path(cfg.out) / "ttest.json", j);
    std::printf("n=%ld mean=%.4f sd=%.4f t=%.3f df=%ld p(two-sided)=%.6g\n", report.n,
                report.mean, report.sd, report.t, report.df, report.p_two_sided);
    return 0;
}

void ascii_preview(const gr::GrayImage& frame, const gr::realtime::FrameResult& r) {
    static const char* ramp = " .:-=+*#%@";
    const int cols = 48, rows = 18;
    std::string canvas;
    canvas.reserve((cols + 1) * rows);
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) {
            const int sx = x * frame.width / cols;
            const int sy = y * frame.height / rows;
            canvas += ramp[frame.at(sx, sy) * 9 / 255];
        }
        canvas += '\n';
    }
    std::printf("\033[2J\033[H%sframe %ld: %s (%.2f) %.1f ms\n", canvas.c_str(), r.frame_index,
                r.label.c_str(), r.confidence, r.latency_ms);
}

int cmd_live(const RunConfig& cfg) {
    if (cfg.source.empty()) throw gr::InputError("--source is required");
    auto ensemble = load_ensemble(cfg);

    std::vector<std::string> class_names;
    if (!cfg.manifest_file.empty()) {
        class_names = load_manifest(cfg).classes;
    } else {
        for (int i = 0; i < ensemble.class_count(); ++i)
            class_names.push_back("class_" + std::to_string(i));
    }
    echo_config(cfg);

    gr::realtime::RealtimeConfig rt;
    rt.preprocess = cfg.preprocess_config();
    rt.max_frames = cfg.max_frames;

    auto source = gr::realtime::open_source(cfg.source);
    std::signal(SIGINT, handle_sigint);

    gr::realtime::FrameCallback sink;
    if (cfg.display) {
        sink = [](const gr::realtime::FrameResult& r, const gr::GrayImage& frame) {
            ascii_preview(frame, r);
        };
    }

    auto result = gr::realtime::run_live(*source, ensemble, rt, class_names, sink,
                                         &g_interrupted);

    gr::serialize::write_session_csv(fs::path(cfg.out) / "session.csv", result.frames);
    gr::serialize::write_json(fs::path(cfg.out) / "latency.json",
                              gr::serialize::latency_to_json(result.report));
    std::printf("%ld frames, overall avg latency %.3f ms, %.1f fps -> %s\n",
                result.report.frames, result.report.overall_avg_ms, result.report.fps,
                cfg.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gesture: hand-gesture recognition pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file; flags override its values");
        cmd->add_option("--out", cfg.out, "output directory");
        cmd->add_option("--seed", cfg.seed, "RNG seed");
        cmd->add_flag("--serial-kernels", cfg.serial_kernels,
                      "run compute kernels without OpenMP");
        return cmd;
    };

    auto* ingest = add_common(app.add_subcommand("ingest", "scan a dataset directory"));
    ingest->add_option("--data", cfg.data, "dataset root (one directory per class)");

    auto* preprocess =
        add_common(app.add_subcommand("preprocess", "run the hand-extraction chain"));
    preprocess->add_option("--manifest", cfg.manifest_file, "manifest JSON");
    preprocess->add_option("--threshold", cfg.threshold, "binary threshold: auto or 0..255");
    preprocess->add_option("--expand-ratio", cfg.expand_ratio, "palm crop expansion");
    preprocess->add_option("--median", cfg.median, "median filter window (odd)");
    preprocess->add_option("--size", cfg.input_size, "output image side");
    preprocess->add_flag("--resize-before-filter", cfg.resize_before_filter,
                         "resize first, then median-filter");

    auto* train = add_common(app.add_subcommand("train", "train the ensemble members"));
    train->add_option("--manifest", cfg.manifest_file, "processed manifest JSON");
    train->add_option("--split", cfg.split_file, "reuse an existing split JSON");
    train->add_option("--epochs", cfg.epochs, "training epochs");
    train->add_option("--batch-size", cfg.batch_size, "batch size");
    train->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    train->add_option("--members", cfg.members, "comma list: vgg,alex,goog,basic");
    train->add_option("--rotation", cfg.rotation, "max augment rotation (deg)");
    train->add_option("--zoom", cfg.zoom, "max augment zoom fraction");
    train->add_option("--shift", cfg.shift, "max augment shift fraction");
    train->add_flag("--no-hflip{false}", cfg.hflip, "disable horizontal flips");
    train->add_flag("--vflip", cfg.vflip, "enable vertical flips");
    train->add_flag("--no-augment", cfg.augment_off, "disable augmentation entirely");
    train->add_flag("--parallel-members", cfg.parallel_members,
                    "train members on concurrent threads");

    auto* eval_cmd = add_common(app.add_subcommand("eval", "accuracy and confusion matrices"));
    eval_cmd->add_option("--manifest", cfg.manifest_file, "processed manifest JSON");
    eval_cmd->add_option("--split", cfg.split_file, "split JSON");
    eval_cmd->add_option("--models", cfg.models, "comma list of model artifact dirs");
    eval_cmd->add_option("--ensemble", cfg.ensemble_file, "ensemble manifest JSON");

    auto* ttest = add_common(app.add_subcommand("ttest", "k-part accuracy t-test"));
    ttest->add_option("--manifest", cfg.manifest_file, "processed manifest JSON");
    ttest->add_option("--split", cfg.split_file, "split JSON");
    ttest->add_option("--ensemble", cfg.ensemble_file, "ensemble manifest JSON");
    ttest->add_option("--k", cfg.k, "number of parts");
    ttest->add_option("--mu", cfg.mu, "test value");

    auto* live = add_common(app.add_subcommand("live", "run the realtime loop"));
    live->add_option("--source", cfg.source, "camera index or frame directory");
    live->add_option("--ensemble", cfg.ensemble_file, "ensemble manifest JSON");
    live->add_option("--manifest", cfg.manifest_file, "manifest JSON for class names");
    live->add_option("--threshold", cfg.threshold, "binary threshold: auto or 0..255");
    live->add_option("--expand-ratio", cfg.expand_ratio, "palm crop expansion");
    live->add_option("--median", cfg.median, "median filter window (odd)");
    live->add_option("--size", cfg.input_size, "model input side");
    live->add_option("--max-frames", cfg.max_frames, "stop after N frames (0 = all)");
    live->add_flag("--display,!--no-display", cfg.display, "terminal preview");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* cmd = app.get_subcommands().front();
        if (!config_file.empty()) apply_config_file(cmd, cfg, config_file);
        if (cmd == ingest) return cmd_ingest(cfg);
        if (cmd == preprocess) return cmd_preprocess(cfg);
        if (cmd == train) return cmd_train(cfg);
        if (cmd == eval_cmd) return cmd_eval(cfg);
        if (cmd == ttest) return cmd_ttest(cfg);
        if (cmd == live) return cmd_live(cfg);
        return 1;
    } catch (const gr::MissingArtifactError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const gr::TrainingDivergedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const gr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
