#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gr/common.hpp"

namespace gr::modelzoo {

enum class LayerKind {
    conv2d,
    batch_norm,
    relu,
    max_pool,
    dense,
    flatten,
    dropout,
    softmax,
    concat
};

enum class Padding { same, valid };

// One node of the architecture description. Concat fans the same input into
// several layer sequences and joins their outputs along the channel axis.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int filters = 0;
    int kernel = 0;
    int stride = 1;
    Padding padding = Padding::same;
    int pool_size = 0;
    int pool_stride = 0;
    int units = 0;
    double rate = 0.0;
    std::vector<std::vector<LayerSpec>> branches;

    static LayerSpec Conv2D(int filters, int kernel, int stride = 1,
                            Padding padding = Padding::same);
    static LayerSpec BatchNorm();
    static LayerSpec ReLU();
    static LayerSpec MaxPool(int size, int stride, Padding padding = Padding::valid);
    static LayerSpec Dense(int units);
    static LayerSpec Flatten();
    static LayerSpec Dropout(double rate);
    static LayerSpec Softmax();
    static LayerSpec Concat(std::vector<std::vector<LayerSpec>> branches);
};

// Activation shape between layers; after Flatten only the channel count is
// meaningful and `flat` is set.
struct TensorShape {
    int h = 0;
    int w = 0;
    int c = 0;
    bool flat = false;

    long elements() const { return flat ? c : static_cast<long>(h) * w * c; }
    bool operator==(const TensorShape&) const = default;
};

struct ModelSpec {
    std::string name;
    TensorShape input;  // h, w, channels
    std::vector<LayerSpec> layers;
    int num_classes = 0;
};

// The three ensemble members plus the small baseline. Layer stacks are fixed
// here; they are the reference configurations the rest of the system trains
// and evaluates.
ModelSpec vggnet_like(int num_classes);
ModelSpec alexnet_like(int num_classes);
ModelSpec googlenet_like(int num_classes);
ModelSpec basic_cnn(int num_classes);

// Shape of a single layer's output given its input.
TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in);

// Per-layer output shapes, in layer order. Throws ShapeError when a layer
// cannot consume its input (including Concat branch disagreements).
std::vector<TensorShape> infer_shapes(const ModelSpec& spec);

// Conv: (k*k*c_in + 1) * filters. Dense: (in + 1) * units.
// BatchNorm: 4 per channel (scale, shift, moving mean, moving variance).
// Everything else is parameter-free.
long layer_parameter_count(const LayerSpec& layer, const TensorShape& in);
long count_parameters(const ModelSpec& spec);

// Flat per-layer report used by tooling: name, output shape, parameters.
struct LayerReport {
    std::string kind;
    TensorShape output;
    long parameters = 0;
};
std::vector<LayerReport> summarize(const ModelSpec& spec);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON encoding; ties weight files to the spec
// that produced them.
std::uint64_t content_hash(const ModelSpec& spec);

}  // namespace gr::modelzoo
