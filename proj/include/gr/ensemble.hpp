#pragma once

#include <memory>
#include <vector>

#include "gr/trainer.hpp"

namespace gr::ensemble {

// Arithmetic mean of probability vectors, accumulated in member order.
std::vector<float> average_scores(const std::vector<std::vector<float>>& member_scores);

// argmax of a probability vector; ties resolve to the lowest class index.
struct Prediction {
    int label = 0;
    float confidence = 0.0f;
};
Prediction argmax_prediction(const std::vector<float>& scores);

// Score-averaging combination of trained members. Members are ordered by
// name at construction so the averaging order (and thus the float result)
// is independent of the order they were supplied in.
class EnsembleModel {
public:
    explicit EnsembleModel(std::vector<trainer::TrainedModel> members,
                           kern::Exec exec = kern::Exec::parallel);

    int class_count() const { return class_count_; }
    std::size_t member_count() const { return members_.size(); }
    const trainer::TrainedModel& member(std::size_t i) const { return members_[i]; }

    long parameter_count() const;

    // Mean of member softmax outputs for one image; sums to 1 within 1e-6.
    std::vector<float> scores(const nn::Tensor<float>& image);
    Prediction predict(const nn::Tensor<float>& image);

    // Batched member evaluation: per-sample averaged scores.
    std::vector<std::vector<float>> scores_batch(const nn::Tensor<float>& batch);

private:
    std::vector<trainer::TrainedModel> members_;
    std::vector<std::unique_ptr<nn::Network<float>>> nets_;
    int class_count_ = 0;
};

trainer::Evaluation evaluate(EnsembleModel& model, const dataset::DatasetManifest& manifest,
                             const std::vector<long>& indices);

}  // namespace gr::ensemble
