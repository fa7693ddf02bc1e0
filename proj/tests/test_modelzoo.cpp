#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gr/modelzoo.hpp"

using namespace gr;
namespace mz = gr::modelzoo;

namespace {

struct Row {
    std::string kind;
    int h, w, c;
    long params;
};

// Published configuration of the deep member: shape and parameter count per
// layer. The flatten width is 4*4*512 = 8192.
const std::vector<Row> kVggRows = {
    {"conv2d", 64, 64, 64, 640},        {"batch_norm", 64, 64, 64, 256},
    {"conv2d", 64, 64, 64, 36928},      {"batch_norm", 64, 64, 64, 256},
    {"max_pool", 32, 32, 64, 0},        {"conv2d", 32, 32, 128, 73856},
    {"batch_norm", 32, 32, 128, 512},   {"conv2d", 32, 32, 128, 147584},
    {"batch_norm", 32, 32, 128, 512},   {"max_pool", 16, 16, 128, 0},
    {"conv2d", 16, 16, 256, 295168},    {"batch_norm", 16, 16, 256, 1024},
    {"conv2d", 16, 16, 256, 590080},    {"batch_norm", 16, 16, 256, 1024},
    {"conv2d", 16, 16, 256, 590080},    {"batch_norm", 16, 16, 256, 1024},
    {"max_pool", 8, 8, 256, 0},         {"conv2d", 8, 8, 512, 1180160},
    {"batch_norm", 8, 8, 512, 2048},    {"conv2d", 8, 8, 512, 2359808},
    {"batch_norm", 8, 8, 512, 2048},    {"conv2d", 8, 8, 512, 2359808},
    {"batch_norm", 8, 8, 512, 2048},    {"max_pool", 4, 4, 512, 0},
    {"flatten", 1, 1, 8192, 0},         {"dense", 1, 1, 512, 4194816},
    {"dense", 1, 1, 512, 262656},       {"dense", 1, 1, 10, 5130},
};

}  // namespace

TEST_CASE("vggnet_like reproduces every published row and the exact total") {
    auto spec = mz::vggnet_like(10);
    CHECK(mz::count_parameters(spec) == 12107466);

    auto rows = mz::summarize(spec);
    // activation/dropout/softmax rows carry no parameters; skip them when
    // lining up against the published table
    std::vector<Row> substantive;
    for (const auto& r : rows) {
        if (r.kind == "relu" || r.kind == "dropout" || r.kind == "softmax") {
            CHECK(r.parameters == 0);
            continue;
        }
        substantive.push_back({r.kind, r.output.h, r.output.w, r.output.c, r.parameters});
    }
    REQUIRE(substantive.size() == kVggRows.size());
    for (std::size_t i = 0; i < kVggRows.size(); ++i) {
        CAPTURE(i);
        CHECK(substantive[i].kind == kVggRows[i].kind);
        CHECK(substantive[i].h == kVggRows[i].h);
        CHECK(substantive[i].w == kVggRows[i].w);
        CHECK(substantive[i].c == kVggRows[i].c);
        CHECK(substantive[i].params == kVggRows[i].params);
    }
}

TEST_CASE("vggnet_like final dense scales with num_classes") {
    auto spec10 = mz::vggnet_like(10);
    auto rows10 = mz::summarize(spec10);
    long final_dense10 = 0;
    for (const auto& r : rows10)
        if (r.kind == "dense") final_dense10 = r.parameters;
    CHECK(final_dense10 == 5130);

    auto rows16 = mz::summarize(mz::vggnet_like(16));
    long final_dense16 = 0;
    for (const auto& r : rows16)
        if (r.kind == "dense") final_dense16 = r.parameters;
    CHECK(final_dense16 == 512 * 16 + 16);  // (in + 1) * units
}

TEST_CASE("alexnet_like lands near the published total") {
    auto spec = mz::alexnet_like(10);
    CHECK_NOTHROW(mz::infer_shapes(spec));
    const long total = mz::count_parameters(spec);
    const long reported = 2464842;
    CHECK(std::abs(total - reported) <= reported / 10);  // within 10%

    // growing the head from 10 to 16 classes adds 6*(in_features+1)
    const long total16 = mz::count_parameters(mz::alexnet_like(16));
    CHECK(total16 - total == 6 * (256 + 1));
}

TEST_CASE("googlenet_like structure and totals") {
    auto spec = mz::googlenet_like(10);
    auto shapes = mz::infer_shapes(spec);
    CHECK(shapes.back().c == 10);

    const long total = mz::count_parameters(spec);
    const long reported = 5670392;
    CHECK(std::abs(total - reported) <= reported / 10);

    // concat output channels are the sum of branch outputs
    mz::TensorShape in{16, 16, 192, false};
    int inception_blocks = 0;
    mz::TensorShape cur = spec.input;
    for (const auto& l : spec.layers) {
        if (l.kind == mz::LayerKind::concat) {
            ++inception_blocks;
            long branch_c = 0;
            for (const auto& branch : l.branches) {
                mz::TensorShape s = cur;
                for (const auto& bl : branch) s = mz::layer_output_shape(bl, s);
                branch_c += s.c;
            }
            CHECK(mz::layer_output_shape(l, cur).c == branch_c);
        }
        cur = mz::layer_output_shape(l, cur);
    }
    CHECK(inception_blocks >= 2);
    (void)in;
}

TEST_CASE("inception block parameters are the sum over its branches") {
    auto spec = mz::googlenet_like(10);
    mz::TensorShape cur = spec.input;
    int blocks = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == mz::LayerKind::concat) {
            long branch_sum = 0;
            for (const auto& branch : l.branches) {
                mz::TensorShape s = cur;
                for (const auto& bl : branch) {
                    branch_sum += mz::layer_parameter_count(bl, s);
                    s = mz::layer_output_shape(bl, s);
                }
            }
            CHECK(mz::layer_parameter_count(l, cur) == branch_sum);
            ++blocks;
        }
        cur = mz::layer_output_shape(l, cur);
    }
    CHECK(blocks == 8);
}

TEST_CASE("1x1 reduction lowers the 3x3 branch parameter cost") {
    // direct 3x3: (9*C_in + 1)*F vs reduced: (C_in+1)*r + (9*r+1)*F
    const long c_in = 192, f = 128, r = 96;
    const long direct = (9 * c_in + 1) * f;
    const long reduced = (c_in + 1) * r + (9 * r + 1) * f;
    CHECK(reduced < direct);

    mz::TensorShape in{16, 16, static_cast<int>(c_in), false};
    auto direct_spec = mz::LayerSpec::Conv2D(static_cast<int>(f), 3);
    CHECK(mz::layer_parameter_count(direct_spec, in) == direct);

    auto reduce = mz::LayerSpec::Conv2D(static_cast<int>(r), 1);
    auto conv3 = mz::LayerSpec::Conv2D(static_cast<int>(f), 3);
    long two_step = mz::layer_parameter_count(reduce, in) +
                    mz::layer_parameter_count(conv3, mz::layer_output_shape(reduce, in));
    CHECK(two_step == reduced);
}

TEST_CASE("basic_cnn baseline") {
    auto spec = mz::basic_cnn(10);
    CHECK_NOTHROW(mz::infer_shapes(spec));
    const long total = mz::count_parameters(spec);
    CHECK(total >= 100000);
    CHECK(total < 1000000);  // same order of magnitude as the reported 198,474
    CHECK(mz::count_parameters(mz::basic_cnn(2)) < total);
}

TEST_CASE("member totals sum to the ensemble total") {
    const long vgg = mz::count_parameters(mz::vggnet_like(10));
    const long alex = mz::count_parameters(mz::alexnet_like(10));
    const long goog = mz::count_parameters(mz::googlenet_like(10));
    CHECK(vgg == 12107466);
    const long ensemble_total = vgg + alex + goog;
    // the published member sum: 12,107,466 + 2,464,842 + 5,670,392
    const long reported = 20242700;
    CHECK(std::abs(ensemble_total - reported) <= reported / 10);
}

TEST_CASE("shape inference rules") {
    mz::TensorShape in{64, 64, 1, false};
    auto conv = mz::LayerSpec::Conv2D(64, 3);
    CHECK(mz::layer_output_shape(conv, in) == mz::TensorShape{64, 64, 64, false});

    auto pool = mz::LayerSpec::MaxPool(2, 2);
    CHECK(mz::layer_output_shape(pool, {64, 64, 64, false}) ==
          mz::TensorShape{32, 32, 64, false});

    auto flat = mz::LayerSpec::Flatten();
    CHECK(mz::layer_output_shape(flat, {4, 4, 512, false}) ==
          mz::TensorShape{1, 1, 8192, true});

    CHECK_THROWS_AS(mz::layer_output_shape(mz::LayerSpec::Dense(10), {4, 4, 512, false}),
                    ShapeError);
    CHECK_THROWS_AS(mz::layer_output_shape(conv, {1, 1, 8192, true}), ShapeError);

    // concat branches must agree spatially
    auto bad = mz::LayerSpec::Concat({{mz::LayerSpec::Conv2D(8, 1)},
                                      {mz::LayerSpec::MaxPool(2, 2)}});
    CHECK_THROWS_AS(mz::layer_output_shape(bad, {8, 8, 4, false}), ShapeError);
}

TEST_CASE("count_parameters unit rules") {
    mz::TensorShape in{64, 64, 1, false};
    CHECK(mz::layer_parameter_count(mz::LayerSpec::Conv2D(64, 3), in) == 640);
    CHECK(mz::layer_parameter_count(mz::LayerSpec::BatchNorm(), {64, 64, 64, false}) == 256);
    CHECK(mz::layer_parameter_count(mz::LayerSpec::Dense(512), {1, 1, 8192, true}) == 4194816);
    CHECK(mz::layer_parameter_count(mz::LayerSpec::MaxPool(2, 2), {8, 8, 16, false}) == 0);

    mz::ModelSpec empty;
    empty.input = {8, 8, 1, false};
    CHECK(mz::count_parameters(empty) == 0);
}

TEST_CASE("model spec JSON round trip preserves the content hash") {
    for (auto maker : {mz::vggnet_like, mz::alexnet_like, mz::googlenet_like, mz::basic_cnn}) {
        auto spec = maker(10);
        auto j = mz::to_json(spec);
        auto back = mz::model_from_json(j);
        CHECK(back.name == spec.name);
        CHECK(mz::count_parameters(back) == mz::count_parameters(spec));
        CHECK(mz::content_hash(back) == mz::content_hash(spec));
    }
    CHECK(mz::content_hash(mz::vggnet_like(10)) != mz::content_hash(mz::vggnet_like(16)));
}

TEST_CASE("factories reject degenerate class counts") {
    CHECK_THROWS_AS(mz::vggnet_like(1), ParameterError);
    CHECK_THROWS_AS(mz::googlenet_like(0), ParameterError);
}
