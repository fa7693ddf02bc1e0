#include "gr/modelzoo.hpp"

#include <cmath>

namespace gr::modelzoo {

LayerSpec LayerSpec::Conv2D(int filters, int kernel, int stride, Padding padding) {
    if (filters <= 0 || kernel <= 0 || stride <= 0)
        throw ParameterError("Conv2D: filters, kernel and stride must be positive");
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.filters = filters;
    l.kernel = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::BatchNorm() {
    LayerSpec l;
    l.kind = LayerKind::batch_norm;
    return l;
}

LayerSpec LayerSpec::ReLU() {
    LayerSpec l;
    l.kind = LayerKind::relu;
    return l;
}

LayerSpec LayerSpec::MaxPool(int size, int stride, Padding padding) {
    if (size <= 0 || stride <= 0) throw ParameterError("MaxPool: size and stride must be positive");
    LayerSpec l;
    l.kind = LayerKind::max_pool;
    l.pool_size = size;
    l.pool_stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::Dense(int units) {
    if (units <= 0) throw ParameterError("Dense: units must be positive");
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.units = units;
    return l;
}

LayerSpec LayerSpec::Flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
}

LayerSpec LayerSpec::Dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ParameterError("Dropout: rate must be in [0,1)");
    LayerSpec l;
    l.kind = LayerKind::dropout;
    l.rate = rate;
    return l;
}

LayerSpec LayerSpec::Softmax() {
    LayerSpec l;
    l.kind = LayerKind::softmax;
    return l;
}

LayerSpec LayerSpec::Concat(std::vector<std::vector<LayerSpec>> branches) {
    if (branches.size() < 2) throw ParameterError("Concat: needs at least two branches");
    LayerSpec l;
    l.kind = LayerKind::concat;
    l.branches = std::move(branches);
    return l;
}

namespace {

int conv_dim(int in, int kernel, int stride, Padding padding) {
    if (padding == Padding::same) return (in + stride - 1) / stride;
    if (in < kernel) throw ShapeError("layer window larger than input");
    return (in - kernel) / stride + 1;
}

}  // namespace

TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in) {
    switch (layer.kind) {
        case LayerKind::conv2d:
            if (in.flat) throw ShapeError("conv2d on flattened input");
            return {conv_dim(in.h, layer.kernel, layer.stride, layer.padding),
                    conv_dim(in.w, layer.kernel, layer.stride, layer.padding), layer.filters,
                    false};
        case LayerKind::max_pool:
            if (in.flat) throw ShapeError("max_pool on flattened input");
            return {conv_dim(in.h, layer.pool_size, layer.pool_stride, layer.padding),
                    conv_dim(in.w, layer.pool_size, layer.pool_stride, layer.padding), in.c,
                    false};
        case LayerKind::batch_norm:
        case LayerKind::relu:
        case LayerKind::dropout:
        case LayerKind::softmax:
            return in;
        case LayerKind::flatten:
            if (in.flat) return in;
            return {1, 1, static_cast<int>(in.elements()), true};
        case LayerKind::dense:
            if (!in.flat) throw ShapeError("dense requires flattened input");
            return {1, 1, layer.units, true};
        case LayerKind::concat: {
            TensorShape out{0, 0, 0, false};
            bool first = true;
            for (const auto& branch : layer.branches) {
                TensorShape s = in;
                for (const auto& l : branch) s = layer_output_shape(l, s);
                if (s.flat) throw ShapeError("concat branches must stay spatial");
                if (first) {
                    out = s;
                    first = false;
                } else if (s.h != out.h || s.w != out.w) {
                    throw ShapeError("concat branches disagree on spatial dims");
                } else {
                    out.c += s.c;
                }
            }
            return out;
        }
    }
    throw ShapeError("unknown layer kind");
}

std::vector<TensorShape> infer_shapes(const ModelSpec& spec) {
    if (spec.input.h <= 0 || spec.input.w <= 0 || spec.input.c <= 0)
        throw ShapeError("model input shape must be positive");
    std::vector<TensorShape> shapes;
    shapes.reserve(spec.layers.size());
    TensorShape cur = spec.input;
    for (const auto& layer : spec.layers) {
        cur = layer_output_shape(layer, cur);
        shapes.push_back(cur);
    }
    return shapes;
}

long layer_parameter_count(const LayerSpec& layer, const TensorShape& in) {
    switch (layer.kind) {
        case LayerKind::conv2d:
            return (static_cast<long>(layer.kernel) * layer.kernel * in.c + 1) * layer.filters;
        case LayerKind::batch_norm:
            return 4L * in.c;
        case LayerKind::dense:
            return (static_cast<long>(in.c) + 1) * layer.units;
        case LayerKind::concat: {
            long total = 0;
            for (const auto& branch : layer.branches) {
                TensorShape s = in;
                for (const auto& l : branch) {
                    total += layer_parameter_count(l, s);
                    s = layer_output_shape(l, s);
                }
            }
            return total;
        }
        default:
            return 0;
    }
}

long count_parameters(const ModelSpec& spec) {
    long total = 0;
    TensorShape cur = spec.input;
    for (const auto& layer : spec.layers) {
        total += layer_parameter_count(layer, cur);
        cur = layer_output_shape(layer, cur);
    }
    return total;
}

namespace {

const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::relu: return "relu";
        case LayerKind::max_pool: return "max_pool";
        case LayerKind::dense: return "dense";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
        case LayerKind::concat: return "concat";
    }
    return "?";
}

LayerKind kind_from_name(const std::string& s) {
    for (LayerKind k : {LayerKind::conv2d, LayerKind::batch_norm, LayerKind::relu,
                        LayerKind::max_pool, LayerKind::dense, LayerKind::flatten,
                        LayerKind::dropout, LayerKind::softmax, LayerKind::concat}) {
        if (s == kind_name(k)) return k;
    }
    throw InputError("unknown layer kind: " + s);
}

nlohmann::json layer_to_json(const LayerSpec& l) {
    nlohmann::json j;
    j["kind"] = kind_name(l.kind);
    switch (l.kind) {
        case LayerKind::conv2d:
            j["filters"] = l.filters;
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["padding"] = l.padding == Padding::same ? "same" : "valid";
            break;
        case LayerKind::max_pool:
            j["size"] = l.pool_size;
            j["stride"] = l.pool_stride;
            j["padding"] = l.padding == Padding::same ? "same" : "valid";
            break;
        case LayerKind::dense:
            j["units"] = l.units;
            break;
        case LayerKind::dropout:
            j["rate"] = l.rate;
            break;
        case LayerKind::concat: {
            nlohmann::json branches = nlohmann::json::array();
            for (const auto& branch : l.branches) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& bl : branch) arr.push_back(layer_to_json(bl));
                branches.push_back(arr);
            }
            j["branches"] = branches;
            break;
        }
        default:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
    LayerKind kind = kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::conv2d:
            return LayerSpec::Conv2D(
                j.at("filters").get<int>(), j.at("kernel").get<int>(), j.at("stride").get<int>(),
                j.at("padding").get<std::string>() == "same" ? Padding::same : Padding::valid);
        case LayerKind::max_pool:
            return LayerSpec::MaxPool(
                j.at("size").get<int>(), j.at("stride").get<int>(),
                j.at("padding").get<std::string>() == "same" ? Padding::same : Padding::valid);
        case LayerKind::dense:
            return LayerSpec::Dense(j.at("units").get<int>());
        case LayerKind::dropout:
            return LayerSpec::Dropout(j.at("rate").get<double>());
        case LayerKind::concat: {
            std::vector<std::vector<LayerSpec>> branches;
            for (const auto& branch : j.at("branches")) {
                std::vector<LayerSpec> seq;
                for (const auto& bl : branch) seq.push_back(layer_from_json(bl));
                branches.push_back(std::move(seq));
            }
            return LayerSpec::Concat(std::move(branches));
        }
        case LayerKind::batch_norm: return LayerSpec::BatchNorm();
        case LayerKind::relu: return LayerSpec::ReLU();
        case LayerKind::flatten: return LayerSpec::Flatten();
        case LayerKind::softmax: return LayerSpec::Softmax();
    }
    throw InputError("unreachable layer kind");
}

// Standard inception unit: 1x1 / 1x1->3x3 / 1x1->5x5 / pool->1x1 branches.
LayerSpec inception(int f1, int r3, int f3, int r5, int f5, int fp) {
    using L = LayerSpec;
    return L::Concat({
        {L::Conv2D(f1, 1), L::ReLU()},
        {L::Conv2D(r3, 1), L::ReLU(), L::Conv2D(f3, 3), L::ReLU()},
        {L::Conv2D(r5, 1), L::ReLU(), L::Conv2D(f5, 5), L::ReLU()},
        {L::MaxPool(3, 1, Padding::same), L::Conv2D(fp, 1), L::ReLU()},
    });
}

void check_classes(int num_classes) {
    if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
}

}  // namespace

std::vector<LayerReport> summarize(const ModelSpec& spec) {
    std::vector<LayerReport> rows;
    TensorShape cur = spec.input;
    for (const auto& layer : spec.layers) {
        LayerReport r;
        r.kind = kind_name(layer.kind);
        r.parameters = layer_parameter_count(layer, cur);
        cur = layer_output_shape(layer, cur);
        r.output = cur;
        rows.push_back(std::move(r));
    }
    return rows;
}

ModelSpec vggnet_like(int num_classes) {
    check_classes(num_classes);
    using L = LayerSpec;
    ModelSpec m;
    m.name = "vggnet_like";
    m.input = {64, 64, 1, false};
    m.num_classes = num_classes;
    auto conv_bn = [&](int filters) {
        m.layers.push_back(L::Conv2D(filters, 3));
        m.layers.push_back(L::BatchNorm());
        m.layers.push_back(L::ReLU());
    };
    conv_bn(64);
    conv_bn(64);
    m.layers.push_back(L::MaxPool(2, 2));
    conv_bn(128);
    conv_bn(128);
    m.layers.push_back(L::MaxPool(2, 2));
    conv_bn(256);
    conv_bn(256);
    conv_bn(256);
    m.layers.push_back(L::MaxPool(2, 2));
    conv_bn(512);
    conv_bn(512);
    conv_bn(512);
    m.layers.push_back(L::MaxPool(2, 2));
    m.layers.push_back(L::Flatten());
    m.layers.push_back(L::Dense(512));
    m.layers.push_back(L::ReLU());
    m.layers.push_back(L::Dropout(0.2));
    m.layers.push_back(L::Dense(512));
    m.layers.push_back(L::ReLU());
    m.layers.push_back(L::Dropout(0.2));
    m.layers.push_back(L::Dense(num_classes));
    m.layers.push_back(L::Softmax());
    return m;
}

ModelSpec alexnet_like(int num_classes) {
    check_classes(num_classes);
    using L = LayerSpec;
    ModelSpec m;
    m.name = "alexnet_like";
    m.input = {64, 64, 1, false};
    m.num_classes = num_classes;
    m.layers = {
        L::Conv2D(32, 3),  L::ReLU(), L::MaxPool(2, 2),
        L::Conv2D(64, 3),  L::ReLU(), L::MaxPool(2, 2),
        L::Conv2D(96, 3),  L::ReLU(),
        L::Conv2D(96, 3),  L::ReLU(),
        L::Conv2D(64, 3),  L::ReLU(), L::MaxPool(2, 2),
        L::Flatten(),
        L::Dense(512),     L::ReLU(), L::Dropout(0.2),
        L::Dense(256),     L::ReLU(), L::Dropout(0.2),
        L::Dense(num_classes),
        L::Softmax(),
    };
    return m;
}

ModelSpec googlenet_like(int num_classes) {
    check_classes(num_classes);
    using L = LayerSpec;
    ModelSpec m;
    m.name = "googlenet_like";
    m.input = {64, 64, 1, false};
    m.num_classes = num_classes;
    m.layers = {
        L::Conv2D(64, 3),  L::ReLU(), L::MaxPool(2, 2),
        L::Conv2D(192, 3), L::ReLU(), L::MaxPool(2, 2),
        inception(64, 96, 128, 16, 32, 32),
        inception(128, 128, 192, 32, 96, 64),
        L::MaxPool(2, 2),
        inception(192, 96, 208, 16, 48, 64),
        inception(160, 112, 224, 24, 64, 64),
        inception(112, 144, 288, 32, 64, 64),
        inception(256, 160, 320, 32, 128, 128),
        L::MaxPool(2, 2),
        inception(256, 160, 320, 32, 128, 128),
        inception(384, 192, 384, 48, 128, 128),
        L::MaxPool(2, 2),
        L::Flatten(),
        L::Dropout(0.2),
        L::Dense(num_classes),
        L::Softmax(),
    };
    return m;
}

ModelSpec basic_cnn(int num_classes) {
    check_classes(num_classes);
    using L = LayerSpec;
    ModelSpec m;
    m.name = "basic_cnn";
    m.input = {64, 64, 1, false};
    m.num_classes = num_classes;
    m.layers = {
        L::Conv2D(32, 3), L::ReLU(), L::MaxPool(2, 2),
        L::Conv2D(64, 3), L::ReLU(), L::MaxPool(2, 2),
        L::Conv2D(64, 3), L::ReLU(), L::MaxPool(2, 2),
        L::Flatten(),
        L::Dense(32),     L::ReLU(), L::Dropout(0.2),
        L::Dense(num_classes),
        L::Softmax(),
    };
    return m;
}

nlohmann::json to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["input"] = {spec.input.h, spec.input.w, spec.input.c};
    j["num_classes"] = spec.num_classes;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
    j["layers"] = layers;
    return j;
}

ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec m;
    m.name = j.at("name").get<std::string>();
    auto in = j.at("input");
    m.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>(), false};
    m.num_classes = j.at("num_classes").get<int>();
    for (const auto& l : j.at("layers")) m.layers.push_back(layer_from_json(l));
    return m;
}

std::uint64_t content_hash(const ModelSpec& spec) {
    const std::string canon = to_json(spec).dump();
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace gr::modelzoo
