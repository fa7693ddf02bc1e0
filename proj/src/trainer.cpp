#include "gr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "gr/imageio.hpp"

namespace gr::trainer {

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ParameterError("learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ParameterError("beta1 and beta2 must be in [0,1)");
    if (epsilon <= 0.0) throw ParameterError("epsilon must be positive");
}

void adam_update(std::span<float> param, std::span<const float> grad, AdamState& state,
                 long step, const TrainConfig& cfg) {
    if (param.size() != grad.size()) throw ShapeError("adam_update: param/grad size mismatch");
    if (state.m.empty()) {
        state.m.assign(param.size(), 0.0f);
        state.v.assign(param.size(), 0.0f);
    }
    if (state.m.size() != param.size()) throw ShapeError("adam_update: stale optimizer state");
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    const double lr = cfg.learning_rate;
    const double eps = cfg.epsilon;
    float* m = state.m.data();
    float* v = state.v.data();
    float* p = param.data();
    const float* g = grad.data();
    const long n = static_cast<long>(param.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

void load_sample_into(const dataset::DatasetManifest& manifest, long index, int expect_h,
                      int expect_w, float* dst) {
    GrayImage img = io::read_gray(manifest.path_of(index));
    if (img.height != expect_h || img.width != expect_w)
        throw ShapeError("sample " + manifest.path_of(index).string() +
                         " does not match the model input size");
    for (std::size_t i = 0; i < img.size(); ++i) dst[i] = static_cast<float>(img.data[i]) / 255.0f;
}

namespace {

// All referenced samples resident as 8-bit pixels; converted per batch.
struct SampleCache {
    int h = 0, w = 0;
    std::vector<GrayImage> images;   // slot per manifest index; empty if unused
    std::vector<int> labels;

    SampleCache(const dataset::DatasetManifest& manifest, const std::vector<long>& indices,
                int expect_h, int expect_w)
        : h(expect_h), w(expect_w), images(manifest.total_samples()),
          labels(manifest.total_samples(), -1) {
        for (long idx : indices) {
            if (idx < 0 || idx >= manifest.total_samples())
                throw ParameterError("split index out of range");
            if (labels[idx] >= 0) continue;
            GrayImage img = io::read_gray(manifest.path_of(idx));
            if (img.height != expect_h || img.width != expect_w)
                throw ShapeError("sample " + manifest.path_of(idx).string() +
                                 " does not match the model input size " +
                                 std::to_string(expect_w) + "x" + std::to_string(expect_h));
            images[idx] = std::move(img);
            labels[idx] = manifest.label_of(idx);
        }
    }
};

void fill_row(const GrayImage& img, float* dst) {
    for (std::size_t i = 0; i < img.size(); ++i) dst[i] = static_cast<float>(img.data[i]) / 255.0f;
}

struct EvalPass {
    double loss = 0.0;
    double accuracy = 0.0;  // percent
    std::vector<int> predictions;
};

EvalPass eval_pass(nn::Network<float>& net, const SampleCache& cache,
                   const std::vector<long>& indices, int batch_size) {
    EvalPass out;
    const int h = cache.h, w = cache.w;
    double loss_sum = 0.0;
    long correct = 0;
    for (std::size_t pos = 0; pos < indices.size(); pos += batch_size) {
        const int n = static_cast<int>(std::min<std::size_t>(batch_size, indices.size() - pos));
        nn::Tensor<float> batch(n, h, w, 1);
        for (int r = 0; r < n; ++r)
            fill_row(cache.images[indices[pos + r]], batch.data() + static_cast<long>(r) * h * w);
        nn::Tensor<float> probs = net.forward(std::move(batch), false);
        const long classes = probs.row_elems();
        for (int r = 0; r < n; ++r) {
            const float* row = probs.data() + static_cast<long>(r) * classes;
            const int label = cache.labels[indices[pos + r]];
            loss_sum -= std::log(std::max(static_cast<double>(row[label]), 1e-30));
            int pred = nn::argmax_row(row, classes);
            out.predictions.push_back(pred);
            if (pred == label) ++correct;
        }
    }
    out.loss = loss_sum / static_cast<double>(indices.size());
    out.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
    return out;
}

}  // namespace

TrainedModel train(const modelzoo::ModelSpec& spec, const dataset::DatasetManifest& manifest,
                   const dataset::Split& split, const TrainConfig& cfg,
                   const dataset::AugmentConfig& augment_cfg) {
    cfg.validate();
    if (split.train.empty() || split.val.empty())
        throw ParameterError("train: split has empty train or val partition");
    if (spec.input.c != 1) throw ShapeError("train: expected single-channel input spec");

    std::vector<long> wanted = split.train;
    wanted.insert(wanted.end(), split.val.begin(), split.val.end());
    SampleCache cache(manifest, wanted, spec.input.h, spec.input.w);

    nn::Network<float> net(spec, cfg.exec);
    Rng rng(cfg.seed);
    net.init_params(rng);

    auto params = net.parameters();
    std::vector<AdamState> states(params.size());
    long step = 0;

    TrainedModel result;
    result.spec = spec;

    const int h = spec.input.h, w = spec.input.w;
    std::vector<long> order = split.train;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        portable_shuffle(order, rng);
        double loss_sum = 0.0;
        long train_correct = 0;

        for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            const int n =
                static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - pos));
            nn::Tensor<float> batch(n, h, w, 1);
            std::vector<int> labels(n);
            for (int r = 0; r < n; ++r) {
                const long idx = order[pos + r];
                labels[r] = cache.labels[idx];
                float* dst = batch.data() + static_cast<long>(r) * h * w;
                if (augment_cfg.is_identity()) {
                    fill_row(cache.images[idx], dst);
                } else {
                    fill_row(dataset::augment(cache.images[idx], augment_cfg, rng), dst);
                }
            }

            std::vector<int> preds;
            preds.reserve(n);
            const double loss = net.loss_and_gradients(std::move(batch), labels, rng, &preds);
            if (!std::isfinite(loss))
                throw TrainingDivergedError("NaN loss for " + spec.name + " at epoch " +
                                            std::to_string(epoch) + ", batch " +
                                            std::to_string(pos / cfg.batch_size));
            loss_sum += loss * n;
            for (int r = 0; r < n; ++r)
                if (preds[r] == labels[r]) ++train_correct;

            ++step;
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!params[i].grad) continue;  // running statistics update themselves
                adam_update(std::span<float>(*params[i].value),
                            std::span<const float>(*params[i].grad), states[i], step, cfg);
            }
        }

        EvalPass val = eval_pass(net, cache, split.val, std::min(cfg.batch_size, 32));
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_acc =
            100.0 * static_cast<double>(train_correct) / static_cast<double>(order.size());
        stats.val_loss = val.loss;
        stats.val_acc = val.accuracy;
        result.history.push_back(stats);

        if (result.weights.empty() || val.accuracy > result.best_val_accuracy) {
            result.best_val_accuracy = val.accuracy;
            result.weights = net.export_weights();
        }
    }
    net.release_caches();
    return result;
}

Evaluation evaluate(const TrainedModel& model, const dataset::DatasetManifest& manifest,
                    const std::vector<long>& indices, kern::Exec exec) {
    if (indices.empty()) throw ParameterError("evaluate: empty index list");
    SampleCache cache(manifest, indices, model.spec.input.h, model.spec.input.w);
    nn::Network<float> net(model.spec, exec);
    net.import_weights(model.weights);
    EvalPass pass = eval_pass(net, cache, indices, 64);
    return {pass.accuracy, std::move(pass.predictions)};
}

std::vector<MemberResult> train_members(const std::vector<modelzoo::ModelSpec>& specs,
                                        const dataset::DatasetManifest& manifest,
                                        const dataset::Split& split, const TrainConfig& cfg,
                                        const dataset::AugmentConfig& augment_cfg,
                                        bool concurrent) {
    if (specs.empty()) throw ParameterError("train_members: no member specs");

    auto run_one = [&](std::size_t i) -> MemberResult {
        MemberResult r;
        r.name = specs[i].name;
        try {
            TrainConfig member_cfg = cfg;
            member_cfg.seed = derive_seed(cfg.seed, i);
            r.model = train(specs[i], manifest, split, member_cfg, augment_cfg);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        return r;
    };

    std::vector<MemberResult> results(specs.size());
    if (concurrent) {
        std::vector<std::future<MemberResult>> futures;
        futures.reserve(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i)
            futures.push_back(std::async(std::launch::async, run_one, i));
        for (std::size_t i = 0; i < specs.size(); ++i) results[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < specs.size(); ++i) results[i] = run_one(i);
    }
    return results;
}

}  // namespace gr::trainer
