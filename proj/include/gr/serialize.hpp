#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gr/ensemble.hpp"
#include "gr/eval.hpp"
#include "gr/realtime.hpp"
#include "gr/trainer.hpp"

namespace gr::serialize {

// Layer-keyed little-endian float32 tensors, prefixed with the spec's
// content hash so weights cannot be loaded against a different architecture.
void write_weights(const std::filesystem::path& file,
                   const std::map<std::string, std::vector<float>>& weights,
                   std::uint64_t spec_hash);
std::map<std::string, std::vector<float>> read_weights(const std::filesystem::path& file,
                                                       std::uint64_t expect_spec_hash);

// epoch, train_loss, train_acc, val_loss, val_acc
void write_history_csv(const std::filesystem::path& file,
                       const std::vector<trainer::EpochStats>& history);

// Model artifact directory: spec.json + weights.bin + history.csv
void save_model(const std::filesystem::path& dir, const trainer::TrainedModel& model);
trainer::TrainedModel load_model(const std::filesystem::path& dir);

// Ensemble manifest: ordered member artifact paths with content hashes.
void write_ensemble_manifest(const std::filesystem::path& file,
                             const std::vector<std::filesystem::path>& member_dirs);
std::vector<std::filesystem::path> read_ensemble_manifest(const std::filesystem::path& file);

nlohmann::json ttest_to_json(const eval::TTestReport& r);

nlohmann::json latency_to_json(const realtime::LatencyReport& r);

// frame_index, timestamp_ms, label, confidence, latency_ms
void write_session_csv(const std::filesystem::path& file,
                       const std::vector<realtime::FrameResult>& frames);

void write_text(const std::filesystem::path& file, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& file);
void write_json(const std::filesystem::path& file, const nlohmann::json& j);

}  // namespace gr::serialize
