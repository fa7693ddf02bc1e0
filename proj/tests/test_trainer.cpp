#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gr/eval.hpp"
#include "gr/serialize.hpp"
#include "gr/trainer.hpp"
#include "shape_dataset.hpp"

using namespace gr;
namespace mz = gr::modelzoo;
namespace tr = gr::trainer;
namespace ds = gr::dataset;

namespace {

// small stack for 16x16 synthetic data; trains in well under a second
mz::ModelSpec tiny_cnn(int num_classes) {
    mz::ModelSpec m;
    m.name = "tiny_cnn";
    m.input = {16, 16, 1, false};
    m.num_classes = num_classes;
    m.layers = {
        mz::LayerSpec::Conv2D(8, 3),  mz::LayerSpec::ReLU(),  mz::LayerSpec::MaxPool(2, 2),
        mz::LayerSpec::Conv2D(16, 3), mz::LayerSpec::ReLU(),  mz::LayerSpec::MaxPool(2, 2),
        mz::LayerSpec::Flatten(),     mz::LayerSpec::Dense(32), mz::LayerSpec::ReLU(),
        mz::LayerSpec::Dense(num_classes), mz::LayerSpec::Softmax(),
    };
    return m;
}

// constant-prediction model: zero dense kernel, bias selects the class
tr::TrainedModel constant_model(int predicted_class, int num_classes) {
    mz::ModelSpec m;
    m.name = "stub";
    m.input = {16, 16, 1, false};
    m.num_classes = num_classes;
    m.layers = {mz::LayerSpec::Flatten(), mz::LayerSpec::Dense(num_classes),
                mz::LayerSpec::Softmax()};
    tr::TrainedModel model;
    model.spec = m;
    model.weights["l01/kernel"] = std::vector<float>(256UL * num_classes, 0.0f);
    std::vector<float> bias(num_classes, 0.0f);
    bias[predicted_class] = 5.0f;
    model.weights["l01/bias"] = bias;
    return model;
}

struct ShapeData {
    testsupport::TempDir dir{"train"};
    ds::DatasetManifest manifest;
    ds::Split split;

    ShapeData(int per_class, int size, std::uint64_t seed) {
        testsupport::write_shape_dataset(dir.path(), per_class, size, seed);
        manifest = ds::ingest(dir.path());
        split = ds::split(manifest, seed + 1);
    }
};

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradient") {
    tr::TrainConfig cfg;
    std::vector<float> p = {1.0f, -2.5f, 0.25f};
    std::vector<float> g = {0.0f, 0.0f, 0.0f};
    tr::AdamState st;
    tr::adam_update(p, g, st, 1, cfg);
    CHECK(p == std::vector<float>{1.0f, -2.5f, 0.25f});
}

TEST_CASE("adam first step moves by about the learning rate") {
    tr::TrainConfig cfg;  // lr 1e-4, beta defaults
    std::vector<float> p = {1.0f};
    std::vector<float> g = {1.0f};
    tr::AdamState st;
    tr::adam_update(p, g, st, 1, cfg);
    // mhat = g, vhat = g^2 -> step = lr * 1/(1+eps)
    CHECK(p[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-6));
}

TEST_CASE("adam matches a scalar reference over several steps") {
    tr::TrainConfig cfg;
    cfg.learning_rate = 0.01;

    std::vector<float> p = {0.7f};
    tr::AdamState st;

    double rp = 0.7, rm = 0.0, rv = 0.0;
    const double g = -0.3;
    for (long step = 1; step <= 7; ++step) {
        std::vector<float> grad = {static_cast<float>(g)};
        tr::adam_update(p, grad, st, step, cfg);

        rm = cfg.beta1 * rm + (1.0 - cfg.beta1) * g;
        rv = cfg.beta2 * rv + (1.0 - cfg.beta2) * g * g;
        const double mhat = rm / (1.0 - std::pow(cfg.beta1, step));
        const double vhat = rv / (1.0 - std::pow(cfg.beta2, step));
        rp -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        CHECK(p[0] == doctest::Approx(rp).epsilon(1e-5));
    }
}

TEST_CASE("train config validation") {
    tr::TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.learning_rate = 1e-4;
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("training learns a separable synthetic set and is seed-deterministic") {
    ShapeData data(30, 16, 5);
    tr::TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 16;
    cfg.learning_rate = 2e-3;
    cfg.seed = 11;

    auto run = [&] { return tr::train(tiny_cnn(3), data.manifest, data.split,
                                      cfg, ds::AugmentConfig::off()); };
    auto a = run();
    CHECK(a.history.size() == 6);
    CHECK(a.best_val_accuracy >= 80.0);

    double max_val = 0.0;
    for (const auto& e : a.history) max_val = std::max(max_val, e.val_acc);
    CHECK(a.best_val_accuracy == doctest::Approx(max_val));

    auto b = run();
    REQUIRE(b.history.size() == a.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(std::abs(a.history[i].train_loss - b.history[i].train_loss) < 1e-6);
        CHECK(a.history[i].val_acc == doctest::Approx(b.history[i].val_acc));
    }
}

TEST_CASE("training diverges loudly on an absurd learning rate") {
    ShapeData data(10, 16, 6);
    tr::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e18;
    cfg.seed = 1;
    CHECK_THROWS_AS(tr::train(tiny_cnn(3), data.manifest, data.split, cfg,
                              ds::AugmentConfig::off()),
                    TrainingDivergedError);
}

TEST_CASE("evaluate computes correct / total x 100 with argmax predictions") {
    ShapeData data(10, 16, 7);
    // all-disk prediction: accuracy over disk samples only is 100
    auto disk_model = constant_model(0, 3);

    std::vector<long> disk_indices;
    for (long i = 0; i < data.manifest.total_samples(); ++i)
        if (data.manifest.label_of(i) == 0) disk_indices.push_back(i);
    auto all = tr::evaluate(disk_model, data.manifest, disk_indices);
    CHECK(all.accuracy == doctest::Approx(100.0));

    // 3 disks + 1 square -> 75%
    std::vector<long> mixed(disk_indices.begin(), disk_indices.begin() + 3);
    for (long i = 0; i < data.manifest.total_samples(); ++i)
        if (data.manifest.label_of(i) == 1) {
            mixed.push_back(i);
            break;
        }
    auto part = tr::evaluate(disk_model, data.manifest, mixed);
    CHECK(part.accuracy == doctest::Approx(75.0));

    // recount from the returned predictions
    long correct = 0;
    for (std::size_t i = 0; i < mixed.size(); ++i)
        if (part.predictions[i] == data.manifest.label_of(mixed[i])) ++correct;
    CHECK(part.accuracy ==
          doctest::Approx(100.0 * correct / static_cast<double>(mixed.size())));

    CHECK_THROWS_AS(tr::evaluate(disk_model, data.manifest, {}), ParameterError);
}

TEST_CASE("train_members derives per-member seeds and is order-independent") {
    ShapeData data(12, 16, 8);
    tr::TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e-3;
    cfg.seed = 99;

    auto one = tiny_cnn(3);
    one.name = "member_a";
    auto two = tiny_cnn(3);
    two.name = "member_b";

    auto serial = tr::train_members({one, two}, data.manifest, data.split, cfg,
                                    ds::AugmentConfig::off(), false);
    REQUIRE(serial.size() == 2);
    REQUIRE(serial[0].model.has_value());
    REQUIRE(serial[1].model.has_value());

    // single member equals train() under the derived seed
    tr::TrainConfig derived = cfg;
    derived.seed = derive_seed(cfg.seed, 0);
    auto direct = tr::train(one, data.manifest, data.split, derived, ds::AugmentConfig::off());
    CHECK(direct.history.back().train_loss ==
          doctest::Approx(serial[0].model->history.back().train_loss).epsilon(1e-12));

    // concurrent execution produces identical member histories
    auto conc = tr::train_members({one, two}, data.manifest, data.split, cfg,
                                  ds::AugmentConfig::off(), true);
    for (int m = 0; m < 2; ++m) {
        REQUIRE(conc[m].model.has_value());
        for (std::size_t e = 0; e < serial[m].model->history.size(); ++e) {
            CHECK(conc[m].model->history[e].train_loss ==
                  doctest::Approx(serial[m].model->history[e].train_loss).epsilon(1e-12));
        }
    }

    // different derived seeds produce different initial weights
    CHECK(serial[0].model->weights.at("l00/kernel") !=
          serial[1].model->weights.at("l00/kernel"));

    // a failing member reports its error without sinking the others
    auto broken = tiny_cnn(3);
    broken.name = "broken";
    broken.input = {32, 32, 1, false};  // mismatched input size
    auto mixed = tr::train_members({one, broken}, data.manifest, data.split, cfg,
                                   ds::AugmentConfig::off(), false);
    CHECK(mixed[0].model.has_value());
    CHECK(!mixed[1].model.has_value());
    CHECK(!mixed[1].error.empty());
}

TEST_CASE("training loss decreases from first to last epoch (median over 3 seeds)") {
    ShapeData data(20, 16, 21);
    std::vector<double> first, last;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        tr::TrainConfig cfg;
        cfg.epochs = 8;
        cfg.batch_size = 12;
        cfg.learning_rate = 1e-3;
        cfg.seed = seed;
        auto model =
            tr::train(tiny_cnn(3), data.manifest, data.split, cfg, ds::AugmentConfig::off());
        first.push_back(model.history.front().train_loss);
        last.push_back(model.history.back().train_loss);
    }
    std::sort(first.begin(), first.end());
    std::sort(last.begin(), last.end());
    CHECK(last[1] < first[1]);  // median comparison
}

TEST_CASE("evaluate accuracy equals the confusion-matrix diagonal recount") {
    ShapeData data(10, 16, 31);
    auto model = constant_model(1, 3);
    std::vector<long> all;
    for (long i = 0; i < data.manifest.total_samples(); ++i) all.push_back(i);
    auto ev = tr::evaluate(model, data.manifest, all);

    std::vector<int> actuals;
    for (long i : all) actuals.push_back(data.manifest.label_of(i));
    auto cm = gr::eval::confusion(ev.predictions, actuals, data.manifest.classes);
    long diag = 0;
    for (std::size_t c = 0; c < cm.classes.size(); ++c) diag += cm.counts[c][c];
    CHECK(ev.accuracy ==
          doctest::Approx(100.0 * diag / static_cast<double>(cm.total())).epsilon(1e-12));
}

TEST_CASE("model artifacts round trip through disk") {
    ShapeData data(10, 16, 9);
    tr::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 3;
    auto model =
        tr::train(tiny_cnn(3), data.manifest, data.split, cfg, ds::AugmentConfig::off());

    testsupport::TempDir out("artifact");
    serialize::save_model(out.path() / "m", model);
    auto loaded = serialize::load_model(out.path() / "m");
    CHECK(loaded.spec.name == model.spec.name);
    CHECK(loaded.weights == model.weights);
    CHECK(loaded.best_val_accuracy == doctest::Approx(model.best_val_accuracy));

    auto e1 = tr::evaluate(model, data.manifest, data.split.test);
    auto e2 = tr::evaluate(loaded, data.manifest, data.split.test);
    CHECK(e1.accuracy == doctest::Approx(e2.accuracy));
    CHECK(e1.predictions == e2.predictions);

    CHECK_THROWS_AS(serialize::load_model(out.path() / "missing"), MissingArtifactError);
}
