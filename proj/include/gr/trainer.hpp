#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gr/dataset.hpp"
#include "gr/modelzoo.hpp"
#include "gr/nn.hpp"

namespace gr::trainer {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 160;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    kern::Exec exec = kern::Exec::parallel;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;  // percent
    double val_loss = 0.0;
    double val_acc = 0.0;  // percent
};

// Spec + weights of the best-validation epoch + per-epoch history.
struct TrainedModel {
    modelzoo::ModelSpec spec;
    std::map<std::string, std::vector<float>> weights;
    std::vector<EpochStats> history;
    double best_val_accuracy = 0.0;

    const std::string& name() const { return spec.name; }
};

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
};

// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
// param <- param - lr * mhat / (sqrt(vhat) + eps)   with bias-corrected mhat, vhat.
// step is 1-based.
void adam_update(std::span<float> param, std::span<const float> grad, AdamState& state,
                 long step, const TrainConfig& cfg);

// Minimizes categorical cross-entropy with Adam; keeps the weights of the
// best validation-accuracy epoch. Fully seeded: init, shuffling, augmentation
// and dropout all derive from cfg.seed.
TrainedModel train(const modelzoo::ModelSpec& spec, const dataset::DatasetManifest& manifest,
                   const dataset::Split& split, const TrainConfig& cfg,
                   const dataset::AugmentConfig& augment_cfg);

// accuracy = correct / total * 100; predictions are per-sample argmax.
struct Evaluation {
    double accuracy = 0.0;
    std::vector<int> predictions;
};
Evaluation evaluate(const TrainedModel& model, const dataset::DatasetManifest& manifest,
                    const std::vector<long>& indices,
                    kern::Exec exec = kern::Exec::parallel);

struct MemberResult {
    std::string name;
    std::optional<TrainedModel> model;
    std::string error;  // empty on success
};

// Trains each member with a seed derived from (cfg.seed, member index), so
// results do not depend on execution order. concurrent=true runs members on
// separate threads; outputs are identical either way.
std::vector<MemberResult> train_members(const std::vector<modelzoo::ModelSpec>& specs,
                                        const dataset::DatasetManifest& manifest,
                                        const dataset::Split& split, const TrainConfig& cfg,
                                        const dataset::AugmentConfig& augment_cfg,
                                        bool concurrent = false);

// Loads a sample as the float tensor row the networks consume ([0,1] scale).
void load_sample_into(const dataset::DatasetManifest& manifest, long index, int expect_h,
                      int expect_w, float* dst);

}  // namespace gr::trainer
