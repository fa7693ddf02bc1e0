#include "gr/ensemble.hpp"

#include <algorithm>

#include "gr/imageio.hpp"

namespace gr::ensemble {

std::vector<float> average_scores(const std::vector<std::vector<float>>& member_scores) {
    if (member_scores.empty()) throw ParameterError("average_scores: no members");
    const std::size_t classes = member_scores.front().size();
    for (const auto& s : member_scores)
        if (s.size() != classes) throw ShapeError("average_scores: member class counts differ");

    std::vector<float> out(classes);
    for (std::size_t j = 0; j < classes; ++j) {
        double acc = 0.0;
        for (const auto& s : member_scores) acc += s[j];
        out[j] = static_cast<float>(acc / static_cast<double>(member_scores.size()));
    }
    return out;
}

Prediction argmax_prediction(const std::vector<float>& scores) {
    if (scores.empty()) throw ParameterError("argmax_prediction: empty scores");
    int best = nn::argmax_row(scores.data(), static_cast<long>(scores.size()));
    return {best, scores[best]};
}

EnsembleModel::EnsembleModel(std::vector<trainer::TrainedModel> members, kern::Exec exec)
    : members_(std::move(members)) {
    if (members_.empty()) throw ParameterError("ensemble needs at least one member");
    std::stable_sort(members_.begin(), members_.end(),
                     [](const auto& a, const auto& b) { return a.name() < b.name(); });
    class_count_ = members_.front().spec.num_classes;
    const auto& in = members_.front().spec.input;
    for (const auto& m : members_) {
        if (m.spec.num_classes != class_count_)
            throw ShapeError("ensemble members disagree on class count");
        if (!(m.spec.input == in))
            throw ShapeError("ensemble members disagree on input shape");
    }
    for (auto& m : members_) {
        nets_.push_back(std::make_unique<nn::Network<float>>(m.spec, exec));
        nets_.back()->import_weights(m.weights);
    }
}

long EnsembleModel::parameter_count() const {
    long total = 0;
    for (const auto& m : members_) total += modelzoo::count_parameters(m.spec);
    return total;
}

std::vector<std::vector<float>> EnsembleModel::scores_batch(const nn::Tensor<float>& batch) {
    const int n = batch.n;
    std::vector<std::vector<std::vector<float>>> per_sample(
        n, std::vector<std::vector<float>>(members_.size()));
    for (std::size_t k = 0; k < nets_.size(); ++k) {
        nn::Tensor<float> copy = batch;
        nn::Tensor<float> probs = nets_[k]->forward(std::move(copy), false);
        const long classes = probs.row_elems();
        for (int r = 0; r < n; ++r) {
            const float* row = probs.data() + static_cast<long>(r) * classes;
            per_sample[r][k].assign(row, row + classes);
        }
    }
    std::vector<std::vector<float>> out;
    out.reserve(n);
    for (int r = 0; r < n; ++r) out.push_back(average_scores(per_sample[r]));
    return out;
}

std::vector<float> EnsembleModel::scores(const nn::Tensor<float>& image) {
    if (image.n != 1) throw ShapeError("scores: expected a single-image tensor");
    return scores_batch(image).front();
}

Prediction EnsembleModel::predict(const nn::Tensor<float>& image) {
    return argmax_prediction(scores(image));
}

trainer::Evaluation evaluate(EnsembleModel& model, const dataset::DatasetManifest& manifest,
                             const std::vector<long>& indices) {
    if (indices.empty()) throw ParameterError("evaluate: empty index list");
    const auto& spec = model.member(0).spec;
    const int h = spec.input.h, w = spec.input.w;

    trainer::Evaluation out;
    long correct = 0;
    constexpr int kBatch = 64;
    for (std::size_t pos = 0; pos < indices.size(); pos += kBatch) {
        const int n = static_cast<int>(std::min<std::size_t>(kBatch, indices.size() - pos));
        nn::Tensor<float> batch(n, h, w, 1);
        std::vector<int> labels(n);
        for (int r = 0; r < n; ++r) {
            const long idx = indices[pos + r];
            labels[r] = manifest.label_of(idx);
            trainer::load_sample_into(manifest, idx, h, w,
                                      batch.data() + static_cast<long>(r) * h * w);
        }
        auto scores = model.scores_batch(batch);
        for (int r = 0; r < n; ++r) {
            int pred = argmax_prediction(scores[r]).label;
            out.predictions.push_back(pred);
            if (pred == labels[r]) ++correct;
        }
    }
    out.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
    return out;
}

}  // namespace gr::ensemble
