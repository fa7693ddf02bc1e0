#include "gr/serialize.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace gr::serialize {
namespace {

constexpr char kMagic[4] = {'G', 'R', 'W', 'B'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::ifstream& in) {
    std::uint8_t b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw InputError("truncated weights file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t lo = get_u32(in);
    std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

}  // namespace

void write_weights(const std::filesystem::path& file,
                   const std::map<std::string, std::vector<float>>& weights,
                   std::uint64_t spec_hash) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, spec_hash);
    put_u32(out, static_cast<std::uint32_t>(weights.size()));
    for (const auto& [name, values] : weights) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(out, values.size());
        static_assert(sizeof(float) == 4);
        // values are written little-endian; this code assumes an LE host
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
    if (!out) throw InputError("short write to " + file.string());
}

std::map<std::string, std::vector<float>> read_weights(const std::filesystem::path& file,
                                                       std::uint64_t expect_spec_hash) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open weights file " + file.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw InputError(file.string() + ": not a weights file");
    if (get_u32(in) != kVersion) throw InputError(file.string() + ": unsupported version");
    const std::uint64_t hash = get_u64(in);
    if (hash != expect_spec_hash)
        throw InputError(file.string() + ": weights do not match the model spec");
    const std::uint32_t count = get_u32(in);
    std::map<std::string, std::vector<float>> weights;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint64_t n = get_u64(in);
        std::vector<float> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw InputError(file.string() + ": truncated tensor " + name);
        weights.emplace(std::move(name), std::move(values));
    }
    return weights;
}

void write_history_csv(const std::filesystem::path& file,
                       const std::vector<trainer::EpochStats>& history) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.6f,%.4f\n", e.epoch, e.train_loss,
                      e.train_acc, e.val_loss, e.val_acc);
        out << buf;
    }
}

void save_model(const std::filesystem::path& dir, const trainer::TrainedModel& model) {
    std::filesystem::create_directories(dir);
    write_json(dir / "spec.json", modelzoo::to_json(model.spec));
    write_weights(dir / "weights.bin", model.weights, modelzoo::content_hash(model.spec));
    write_history_csv(dir / "history.csv", model.history);
    nlohmann::json meta;
    meta["best_val_accuracy"] = model.best_val_accuracy;
    write_json(dir / "meta.json", meta);
}

trainer::TrainedModel load_model(const std::filesystem::path& dir) {
    if (!std::filesystem::is_regular_file(dir / "spec.json"))
        throw MissingArtifactError("model artifact missing: " + (dir / "spec.json").string());
    trainer::TrainedModel model;
    model.spec = modelzoo::model_from_json(read_json(dir / "spec.json"));
    model.weights = read_weights(dir / "weights.bin", modelzoo::content_hash(model.spec));
    if (std::filesystem::is_regular_file(dir / "meta.json"))
        model.best_val_accuracy = read_json(dir / "meta.json").value("best_val_accuracy", 0.0);
    return model;
}

void write_ensemble_manifest(const std::filesystem::path& file,
                             const std::vector<std::filesystem::path>& member_dirs) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& dir : member_dirs) {
        auto spec = modelzoo::model_from_json(read_json(dir / "spec.json"));
        nlohmann::json m;
        m["path"] = dir.string();
        m["name"] = spec.name;
        m["spec_hash"] = modelzoo::content_hash(spec);
        members.push_back(m);
    }
    write_json(file, nlohmann::json{{"members", members}});
}

std::vector<std::filesystem::path> read_ensemble_manifest(const std::filesystem::path& file) {
    auto j = read_json(file);
    std::vector<std::filesystem::path> dirs;
    for (const auto& m : j.at("members")) dirs.emplace_back(m.at("path").get<std::string>());
    if (dirs.empty()) throw InputError("ensemble manifest lists no members");
    return dirs;
}

nlohmann::json ttest_to_json(const eval::TTestReport& r) {
    return nlohmann::json{{"n", r.n},
                          {"mean", r.mean},
                          {"sd", r.sd},
                          {"sem", r.sem},
                          {"mu", r.mu},
                          {"t", r.t},
                          {"df", r.df},
                          {"p_one_sided", r.p_one_sided},
                          {"p_two_sided", r.p_two_sided}};
}

nlohmann::json latency_to_json(const realtime::LatencyReport& r) {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [label, ms] : r.per_class_avg_ms) per_class[label] = ms;
    return nlohmann::json{{"per_class_avg_ms", per_class},
                          {"overall_avg_ms", r.overall_avg_ms},
                          {"fps", r.fps},
                          {"frames", r.frames}};
}

void write_session_csv(const std::filesystem::path& file,
                       const std::vector<realtime::FrameResult>& frames) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out << "frame_index,timestamp_ms,label,confidence,latency_ms\n";
    char buf[64];
    for (const auto& f : frames) {
        out << f.frame_index << ',';
        std::snprintf(buf, sizeof(buf), "%.3f", f.timestamp_ms);
        out << buf << ',' << f.label << ',';
        std::snprintf(buf, sizeof(buf), "%.4f,%.3f\n", f.confidence, f.latency_ms);
        out << buf;
    }
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out << text;
}

nlohmann::json read_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw MissingArtifactError("cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(file.string() + ": " + e.what());
    }
    return j;
}

void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

}  // namespace gr::serialize
