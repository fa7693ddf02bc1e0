#pragma once

#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gr/common.hpp"
#include "gr/kernels.hpp"
#include "gr/modelzoo.hpp"

namespace gr::nn {

// Activations and parameters are NHWC row-major. The scalar type is a
// template parameter: float carries training, double backs the
// finite-difference checks.
template <typename T>
struct Tensor {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_), v(static_cast<std::size_t>(n_) * h_ * w_ * c_) {}

    long size() const { return static_cast<long>(n) * h * w * c; }
    long rows() const { return n; }                              // batch
    long row_elems() const { return static_cast<long>(h) * w * c; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
};

// name -> storage (+ gradient when trainable; BN moving stats have none).
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;  // nullptr: serialized state, not optimized
};

struct Context {
    bool training = false;
    Rng* rng = nullptr;  // consumed by dropout masks only
    kern::Exec exec = kern::Exec::parallel;
};

namespace detail {

inline int same_pad(int in, int out, int kernel, int stride) {
    int total = std::max((out - 1) * stride + kernel - in, 0);
    return total / 2;
}

// colT(P x K): P = n*oh*ow, K = kh*kw*c, k index ordered (ky, kx, ci).
template <typename T>
void im2col(const Tensor<T>& x, int kernel, int stride, int pad, int oh, int ow,
            std::vector<T>& colT, kern::Exec exec) {
    const long K = static_cast<long>(kernel) * kernel * x.c;
    colT.assign(static_cast<std::size_t>(x.n) * oh * ow * K, T(0));
    kern::for_each_index(static_cast<long>(x.n) * oh, exec, [&](long r) {
        const int img = static_cast<int>(r / oh);
        const int oy = static_cast<int>(r % oh);
        for (int ox = 0; ox < ow; ++ox) {
            T* dst = colT.data() + ((r * ow) + ox) * K;
            for (int ky = 0; ky < kernel; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= x.h) continue;
                for (int kx = 0; kx < kernel; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= x.w) continue;
                    const T* src =
                        x.data() + (((static_cast<long>(img) * x.h + iy) * x.w + ix) * x.c);
                    std::memcpy(dst + (static_cast<long>(ky) * kernel + kx) * x.c, src,
                                sizeof(T) * x.c);
                }
            }
        }
    });
}

// Scatter-add transpose of im2col; parallel over images (no cross-image
// collisions, in-image accumulation stays sequential).
template <typename T>
void col2im(const std::vector<T>& colT, Tensor<T>& dx, int kernel, int stride, int pad, int oh,
            int ow, kern::Exec exec) {
    const long K = static_cast<long>(kernel) * kernel * dx.c;
    kern::for_each_index(dx.n, exec, [&](long img) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const T* src = colT.data() + (((img * oh) + oy) * ow + ox) * K;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= dx.h) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= dx.w) continue;
                        T* dst = dx.data() + (((img * dx.h + iy) * dx.w + ix) * dx.c);
                        const T* s = src + (static_cast<long>(ky) * kernel + kx) * dx.c;
                        for (int ci = 0; ci < dx.c; ++ci) dst[ci] += s[ci];
                    }
                }
            }
        }
    });
}

}  // namespace detail

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(Tensor<T>&& x, const Context& ctx) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        (void)prefix;
        (void)out;
    }
    virtual void init(Rng& rng) { (void)rng; }
    virtual void release_cache() {}
};

template <typename T>
class Conv2DLayer final : public Layer<T> {
public:
    Conv2DLayer(modelzoo::TensorShape in, modelzoo::TensorShape out, int kernel, int stride,
                int pad)
        : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad),
          k_(static_cast<long>(kernel) * kernel * in.c),
          weight_(static_cast<std::size_t>(out.c) * k_), bias_(out.c),
          dweight_(weight_.size()), dbias_(bias_.size()) {}

    void init(Rng& rng) override {
        const double limit = std::sqrt(6.0 / static_cast<double>(k_));
        for (auto& w : weight_) w = static_cast<T>(uniform_range(rng, -limit, limit));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y(x.n, out_.h, out_.w, out_.c);
        detail::im2col(x, kernel_, stride_, pad_, out_.h, out_.w, colT_, ctx.exec);
        wT_.resize(weight_.size());
        kern::transpose(weight_.data(), wT_.data(), out_.c, k_, ctx.exec);
        const long P = y.size() / out_.c;
        kern::gemm(colT_.data(), wT_.data(), y.data(), P, out_.c, k_, false, ctx.exec);
        kern::for_each_index(P, ctx.exec, [&](long p) {
            T* row = y.data() + p * out_.c;
            for (int f = 0; f < out_.c; ++f) row[f] += bias_[f];
        });
        if (ctx.training) {
            x_ = std::move(x);
        } else {
            colT_.clear();
            colT_.shrink_to_fit();
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        const long P = dy.size() / out_.c;
        // bias gradient: one output channel per task
        kern::for_each_index(out_.c, ctx.exec, [&](long f) {
            T acc = 0;
            for (long p = 0; p < P; ++p) acc += dy.data()[p * out_.c + f];
            dbias_[f] = acc;
        });
        // weight gradient over the im2col panel kept from the forward pass
        if (colT_.size() != static_cast<std::size_t>(P) * k_)
            detail::im2col(x_, kernel_, stride_, pad_, out_.h, out_.w, colT_, ctx.exec);
        kern::gemm_at(dy.data(), colT_.data(), dweight_.data(), out_.c, k_, P, false, ctx.exec);
        // input gradient
        std::vector<T>& dcolT = colT_grad_;
        dcolT.resize(colT_.size());
        kern::gemm(dy.data(), weight_.data(), dcolT.data(), P, k_, out_.c, false, ctx.exec);
        Tensor<T> dx(x_.n, x_.h, x_.w, x_.c);
        detail::col2im(dcolT, dx, kernel_, stride_, pad_, out_.h, out_.w, ctx.exec);
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + "/kernel", &weight_, &dweight_});
        out.push_back({prefix + "/bias", &bias_, &dbias_});
    }

    void release_cache() override {
        x_ = Tensor<T>();
        colT_.clear();
        colT_.shrink_to_fit();
        colT_grad_.clear();
        colT_grad_.shrink_to_fit();
    }

private:
    modelzoo::TensorShape in_, out_;
    int kernel_, stride_, pad_;
    long k_;
    std::vector<T> weight_, bias_, dweight_, dbias_;
    std::vector<T> colT_, wT_, colT_grad_;
    Tensor<T> x_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
public:
    DenseLayer(int in_features, int units)
        : in_(in_features), units_(units),
          weight_(static_cast<std::size_t>(units) * in_features), bias_(units),
          dweight_(weight_.size()), dbias_(bias_.size()) {}

    void init(Rng& rng) override {
        const double limit = std::sqrt(6.0 / static_cast<double>(in_));
        for (auto& w : weight_) w = static_cast<T>(uniform_range(rng, -limit, limit));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y(x.n, 1, 1, units_);
        wT_.resize(weight_.size());
        kern::transpose(weight_.data(), wT_.data(), units_, in_, ctx.exec);
        kern::gemm(x.data(), wT_.data(), y.data(), x.n, units_, in_, false, ctx.exec);
        kern::for_each_index(x.n, ctx.exec, [&](long r) {
            T* row = y.data() + r * units_;
            for (int u = 0; u < units_; ++u) row[u] += bias_[u];
        });
        if (ctx.training) x_ = std::move(x);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        kern::for_each_index(units_, ctx.exec, [&](long u) {
            T acc = 0;
            for (long r = 0; r < dy.n; ++r) acc += dy.data()[r * units_ + u];
            dbias_[u] = acc;
        });
        kern::gemm_at(dy.data(), x_.data(), dweight_.data(), units_, in_, dy.n, false, ctx.exec);
        Tensor<T> dx(x_.n, x_.h, x_.w, x_.c);
        kern::gemm(dy.data(), weight_.data(), dx.data(), dy.n, in_, units_, false, ctx.exec);
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + "/kernel", &weight_, &dweight_});
        out.push_back({prefix + "/bias", &bias_, &dbias_});
    }

    void release_cache() override { x_ = Tensor<T>(); }

private:
    int in_, units_;
    std::vector<T> weight_, bias_, dweight_, dbias_;
    std::vector<T> wT_;
    Tensor<T> x_;
};

template <typename T>
class ReLULayer final : public Layer<T> {
public:
    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y = std::move(x);
        if (ctx.training) mask_.assign(y.size(), 0);
        T* d = y.data();
        const bool training = ctx.training;
        auto* mask = mask_.data();
        kern::for_each_index(y.size(), ctx.exec, [&](long i) {
            if (d[i] > T(0)) {
                if (training) mask[i] = 1;
            } else {
                d[i] = T(0);
            }
        });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        Tensor<T> dx = dy;
        T* d = dx.data();
        const auto* mask = mask_.data();
        kern::for_each_index(dx.size(), ctx.exec, [&](long i) {
            if (!mask[i]) d[i] = T(0);
        });
        return dx;
    }

    void release_cache() override {
        mask_.clear();
        mask_.shrink_to_fit();
    }

private:
    std::vector<std::uint8_t> mask_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
public:
    MaxPoolLayer(modelzoo::TensorShape in, modelzoo::TensorShape out, int size, int stride,
                 int pad)
        : in_(in), out_(out), size_(size), stride_(stride), pad_(pad) {}

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y(x.n, out_.h, out_.w, out_.c);
        argmax_.assign(y.size(), -1);
        const long rows = static_cast<long>(x.n) * out_.h;
        kern::for_each_index(rows, ctx.exec, [&](long r) {
            const int img = static_cast<int>(r / out_.h);
            const int oy = static_cast<int>(r % out_.h);
            for (int ox = 0; ox < out_.w; ++ox) {
                for (int ch = 0; ch < out_.c; ++ch) {
                    T best{};
                    int best_idx = -1;
                    for (int ky = 0; ky < size_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < size_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            T v = x.data()[((static_cast<long>(img) * x.h + iy) * x.w + ix) * x.c +
                                           ch];
                            if (best_idx < 0 || v > best) {
                                best = v;
                                best_idx = iy * x.w + ix;
                            }
                        }
                    }
                    const long o = ((r * out_.w) + ox) * out_.c + ch;
                    y.data()[o] = best;
                    argmax_[o] = best_idx;
                }
            }
        });
        if (ctx.training) {
            in_n_ = x.n;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        Tensor<T> dx(in_n_, in_.h, in_.w, in_.c);
        kern::for_each_index(in_n_, ctx.exec, [&](long img) {
            for (int oy = 0; oy < out_.h; ++oy) {
                for (int ox = 0; ox < out_.w; ++ox) {
                    for (int ch = 0; ch < out_.c; ++ch) {
                        const long o =
                            (((img * out_.h) + oy) * out_.w + ox) * out_.c + ch;
                        const int idx = argmax_[o];
                        if (idx >= 0)
                            dx.data()[(img * in_.h * in_.w + idx) * in_.c + ch] += dy.data()[o];
                    }
                }
            }
        });
        return dx;
    }

    void release_cache() override {
        argmax_.clear();
        argmax_.shrink_to_fit();
    }

private:
    modelzoo::TensorShape in_, out_;
    int size_, stride_, pad_;
    int in_n_ = 0;
    std::vector<int> argmax_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
public:
    explicit BatchNormLayer(int channels)
        : c_(channels), gamma_(channels, T(1)), beta_(channels, T(0)),
          moving_mean_(channels, T(0)), moving_var_(channels, T(1)), dgamma_(channels),
          dbeta_(channels) {}

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y(x.n, x.h, x.w, x.c);
        const long m = x.size() / c_;
        if (ctx.training) {
            mean_.assign(c_, T(0));
            invstd_.assign(c_, T(0));
            // channel accumulators with a row-major sweep: contiguous loads,
            // and per channel the summation order is plain ascending i
            std::vector<double> sum(c_, 0.0), sq(c_, 0.0);
            for (long i = 0; i < m; ++i) {
                const T* row = x.data() + i * c_;
#pragma omp simd
                for (int ch = 0; ch < c_; ++ch) sum[ch] += row[ch];
            }
            std::vector<double> mu(c_);
            for (int ch = 0; ch < c_; ++ch) mu[ch] = sum[ch] / static_cast<double>(m);
            for (long i = 0; i < m; ++i) {
                const T* row = x.data() + i * c_;
#pragma omp simd
                for (int ch = 0; ch < c_; ++ch) {
                    const double d = row[ch] - mu[ch];
                    sq[ch] += d * d;
                }
            }
            for (int ch = 0; ch < c_; ++ch) {
                const double var = sq[ch] / static_cast<double>(m);
                mean_[ch] = static_cast<T>(mu[ch]);
                invstd_[ch] = static_cast<T>(1.0 / std::sqrt(var + kEps));
                moving_mean_[ch] =
                    static_cast<T>(kMomentum * moving_mean_[ch] + (1.0 - kMomentum) * mu[ch]);
                moving_var_[ch] =
                    static_cast<T>(kMomentum * moving_var_[ch] + (1.0 - kMomentum) * var);
            }
            kern::for_each_index(m, ctx.exec, [&](long i) {
                const T* src = x.data() + i * c_;
                T* dst = y.data() + i * c_;
                for (int ch = 0; ch < c_; ++ch)
                    dst[ch] = gamma_[ch] * (src[ch] - mean_[ch]) * invstd_[ch] + beta_[ch];
            });
            x_ = std::move(x);
        } else {
            kern::for_each_index(m, ctx.exec, [&](long i) {
                const T* src = x.data() + i * c_;
                T* dst = y.data() + i * c_;
                for (int ch = 0; ch < c_; ++ch) {
                    const T inv =
                        static_cast<T>(1.0 / std::sqrt(static_cast<double>(moving_var_[ch]) + kEps));
                    dst[ch] = gamma_[ch] * (src[ch] - moving_mean_[ch]) * inv + beta_[ch];
                }
            });
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        const long m = dy.size() / c_;
        Tensor<T> dx(x_.n, x_.h, x_.w, x_.c);
        std::vector<double> s1(c_, 0.0), s2(c_, 0.0);
        for (long i = 0; i < m; ++i) {
            const T* xrow = x_.data() + i * c_;
            const T* grow = dy.data() + i * c_;
#pragma omp simd
            for (int ch = 0; ch < c_; ++ch) {
                const double xhat = (xrow[ch] - mean_[ch]) * invstd_[ch];
                s1[ch] += grow[ch];
                s2[ch] += grow[ch] * xhat;
            }
        }
        std::vector<double> coef(c_);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (int ch = 0; ch < c_; ++ch) {
            dbeta_[ch] = static_cast<T>(s1[ch]);
            dgamma_[ch] = static_cast<T>(s2[ch]);
            coef[ch] = static_cast<double>(gamma_[ch]) * invstd_[ch];
        }
        kern::for_each_index(m, ctx.exec, [&](long i) {
            const T* xrow = x_.data() + i * c_;
            const T* grow = dy.data() + i * c_;
            T* drow = dx.data() + i * c_;
#pragma omp simd
            for (int ch = 0; ch < c_; ++ch) {
                const double xhat = (xrow[ch] - mean_[ch]) * invstd_[ch];
                drow[ch] = static_cast<T>(coef[ch] *
                                          (grow[ch] - (s1[ch] + xhat * s2[ch]) * inv_m));
            }
        });
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + "/gamma", &gamma_, &dgamma_});
        out.push_back({prefix + "/beta", &beta_, &dbeta_});
        out.push_back({prefix + "/moving_mean", &moving_mean_, nullptr});
        out.push_back({prefix + "/moving_var", &moving_var_, nullptr});
    }

    void release_cache() override { x_ = Tensor<T>(); }

    static constexpr double kEps = 1e-3;
    static constexpr double kMomentum = 0.9;

private:
    int c_;
    std::vector<T> gamma_, beta_, moving_mean_, moving_var_, dgamma_, dbeta_;
    std::vector<T> mean_, invstd_;
    Tensor<T> x_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
public:
    Tensor<T> forward(Tensor<T>&& x, const Context&) override {
        shape_ = {x.h, x.w, x.c, false};
        Tensor<T> y;
        y.n = x.n;
        y.h = 1;
        y.w = 1;
        y.c = static_cast<int>(x.row_elems());
        y.v = std::move(x.v);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context&) override {
        Tensor<T> dx;
        dx.n = dy.n;
        dx.h = shape_.h;
        dx.w = shape_.w;
        dx.c = shape_.c;
        dx.v = dy.v;
        return dx;
    }

private:
    modelzoo::TensorShape shape_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {}

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        if (!ctx.training || rate_ == 0.0) return std::move(x);
        if (!ctx.rng) throw ParameterError("dropout in training mode requires an RNG");
        Tensor<T> y = std::move(x);
        mask_.resize(y.size());
        // mask draws are sequential so the stream is reproducible
        for (long i = 0; i < y.size(); ++i) mask_[i] = uniform_unit(*ctx.rng) >= rate_ ? 1 : 0;
        const T scale = static_cast<T>(1.0 / (1.0 - rate_));
        T* d = y.data();
        const auto* mask = mask_.data();
        kern::for_each_index(y.size(), ctx.exec,
                             [&](long i) { d[i] = mask[i] ? d[i] * scale : T(0); });
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        Tensor<T> dx = dy;
        const T scale = static_cast<T>(1.0 / (1.0 - rate_));
        T* d = dx.data();
        const auto* mask = mask_.data();
        kern::for_each_index(dx.size(), ctx.exec,
                             [&](long i) { d[i] = mask[i] ? d[i] * scale : T(0); });
        return dx;
    }

    void release_cache() override {
        mask_.clear();
        mask_.shrink_to_fit();
    }

private:
    double rate_;
    std::vector<std::uint8_t> mask_;
};

template <typename T>
class SoftmaxLayer final : public Layer<T> {
public:
    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> y = std::move(x);
        const long rows = y.n, cols = y.row_elems();
        kern::for_each_index(rows, ctx.exec, [&](long r) {
            T* row = y.data() + r * cols;
            T mx = row[0];
            for (long j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (long j = 0; j < cols; ++j) {
                const double e = std::exp(static_cast<double>(row[j] - mx));
                row[j] = static_cast<T>(e);
                sum += e;
            }
            for (long j = 0; j < cols; ++j) row[j] = static_cast<T>(row[j] / sum);
        });
        if (ctx.training) y_ = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        Tensor<T> dx(dy.n, dy.h, dy.w, dy.c);
        const long rows = dy.n, cols = dy.row_elems();
        kern::for_each_index(rows, ctx.exec, [&](long r) {
            const T* yrow = y_.data() + r * cols;
            const T* grow = dy.data() + r * cols;
            double dot = 0.0;
            for (long j = 0; j < cols; ++j) dot += static_cast<double>(grow[j]) * yrow[j];
            for (long j = 0; j < cols; ++j)
                dx.data()[r * cols + j] = static_cast<T>(yrow[j] * (grow[j] - dot));
        });
        return dx;
    }

    void release_cache() override { y_ = Tensor<T>(); }

private:
    Tensor<T> y_;
};

template <typename T>
class ConcatLayer final : public Layer<T> {
public:
    struct Branch {
        std::vector<std::unique_ptr<Layer<T>>> layers;
        int out_channels = 0;
    };

    explicit ConcatLayer(std::vector<Branch> branches) : branches_(std::move(branches)) {
        for (const auto& b : branches_) out_c_ += b.out_channels;
    }

    Tensor<T> forward(Tensor<T>&& x, const Context& ctx) override {
        Tensor<T> out;
        long offset = 0;
        for (auto& branch : branches_) {
            Tensor<T> t = x;  // every branch consumes the block input
            for (auto& layer : branch.layers) t = layer->forward(std::move(t), ctx);
            if (out.size() == 0) out = Tensor<T>(t.n, t.h, t.w, out_c_);
            const long pixels = static_cast<long>(t.n) * t.h * t.w;
            kern::for_each_index(pixels, ctx.exec, [&](long p) {
                std::memcpy(out.data() + p * out_c_ + offset, t.data() + p * t.c,
                            sizeof(T) * t.c);
            });
            offset += t.c;
        }
        if (ctx.training) {
            in_n_ = x.n;
            in_h_ = x.h;
            in_w_ = x.w;
            in_c_ = x.c;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy, const Context& ctx) override {
        Tensor<T> dx(in_n_, in_h_, in_w_, in_c_);
        long offset = 0;
        for (auto& branch : branches_) {
            const int bc = branch.out_channels;
            // channel-sliced branch gradient, then back through the branch
            Tensor<T> slice(dy.n, dy.h, dy.w, bc);
            const long pixels = static_cast<long>(dy.n) * dy.h * dy.w;
            kern::for_each_index(pixels, ctx.exec, [&](long p) {
                std::memcpy(slice.data() + p * bc, dy.data() + p * dy.c + offset, sizeof(T) * bc);
            });
            Tensor<T> g = std::move(slice);
            for (auto it = branch.layers.rbegin(); it != branch.layers.rend(); ++it)
                g = (*it)->backward(g, ctx);
            T* acc = dx.data();
            const T* add = g.data();
            kern::for_each_index(dx.size(), ctx.exec, [&](long i) { acc[i] += add[i]; });
            offset += bc;
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        for (std::size_t b = 0; b < branches_.size(); ++b) {
            for (std::size_t i = 0; i < branches_[b].layers.size(); ++i) {
                branches_[b].layers[i]->collect(
                    prefix + "/b" + std::to_string(b) + "/l" + std::to_string(i), out);
            }
        }
    }

    void init(Rng& rng) override {
        for (auto& b : branches_)
            for (auto& l : b.layers) l->init(rng);
    }

    void release_cache() override {
        for (auto& b : branches_)
            for (auto& l : b.layers) l->release_cache();
    }

private:
    std::vector<Branch> branches_;
    int out_c_ = 0;
    int in_n_ = 0, in_h_ = 0, in_w_ = 0, in_c_ = 0;
};

// argmax with ties resolved to the lowest class index
template <typename T>
int argmax_row(const T* row, long n) {
    int best = 0;
    for (long j = 1; j < n; ++j)
        if (row[j] > row[best]) best = static_cast<int>(j);
    return best;
}

// Executable network compiled from a ModelSpec. The last layer must be
// softmax; training fuses it with the cross-entropy gradient.
template <typename T>
class Network {
public:
    explicit Network(const modelzoo::ModelSpec& spec, kern::Exec exec = kern::Exec::parallel)
        : spec_(spec), exec_(exec) {
        if (spec.layers.empty() || spec.layers.back().kind != modelzoo::LayerKind::softmax)
            throw ShapeError("network must end with softmax");
        if (spec.layers.size() < 2 ||
            spec.layers[spec.layers.size() - 2].kind != modelzoo::LayerKind::dense)
            throw ShapeError("network must end with dense + softmax");
        modelzoo::TensorShape cur = spec.input;
        for (const auto& layer : spec.layers) {
            layers_.push_back(build_layer(layer, cur));
            cur = modelzoo::layer_output_shape(layer, cur);
        }
        out_shape_ = cur;
    }

    void init_params(Rng& rng) {
        for (auto& l : layers_) l->init(rng);
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect(layer_name(i), out);
        return out;
    }

    Tensor<T> forward(Tensor<T> x, bool training, Rng* rng = nullptr) {
        Context ctx{training, rng, exec_};
        for (auto& l : layers_) x = l->forward(std::move(x), ctx);
        return x;
    }

    // Mean cross-entropy over the batch plus parameter gradients; optionally
    // reports the batch argmax predictions.
    double loss_and_gradients(Tensor<T> x, const std::vector<int>& labels, Rng& rng,
                              std::vector<int>* predictions = nullptr) {
        const int n = x.n;
        if (static_cast<long>(labels.size()) != n)
            throw ParameterError("labels do not match batch size");
        Context ctx{true, &rng, exec_};
        for (auto& l : layers_) x = l->forward(std::move(x), ctx);

        const long classes = x.row_elems();
        double loss = 0.0;
        Tensor<T> dlogits(x.n, x.h, x.w, x.c);
        for (int r = 0; r < n; ++r) {
            const T* row = x.data() + static_cast<long>(r) * classes;
            T* grow = dlogits.data() + static_cast<long>(r) * classes;
            const int target = labels[r];
            if (target < 0 || target >= classes) throw ParameterError("label out of range");
            loss -= std::log(std::max(static_cast<double>(row[target]), 1e-30));
            if (predictions) predictions->push_back(argmax_row(row, classes));
            for (long j = 0; j < classes; ++j) {
                grow[j] = static_cast<T>((row[j] - (j == target ? T(1) : T(0))) /
                                         static_cast<T>(n));
            }
        }
        loss /= n;

        // softmax + cross-entropy gradient enters below the softmax layer
        Tensor<T> g = std::move(dlogits);
        for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g, ctx);
        return loss;
    }

    void release_caches() {
        for (auto& l : layers_) l->release_cache();
    }

    std::map<std::string, std::vector<T>> export_weights() {
        std::map<std::string, std::vector<T>> out;
        for (const auto& p : parameters()) out[p.name] = *p.value;
        return out;
    }

    void import_weights(const std::map<std::string, std::vector<T>>& weights) {
        for (auto& p : parameters()) {
            auto it = weights.find(p.name);
            if (it == weights.end())
                throw MissingArtifactError("weights missing tensor: " + p.name);
            if (it->second.size() != p.value->size())
                throw ShapeError("weight tensor size mismatch for " + p.name);
            *p.value = it->second;
        }
    }

    const modelzoo::ModelSpec& spec() const { return spec_; }
    kern::Exec exec() const { return exec_; }
    void set_exec(kern::Exec e) { exec_ = e; }

private:
    static std::string layer_name(std::size_t i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "l%02zu", i);
        return buf;
    }

    std::unique_ptr<Layer<T>> build_layer(const modelzoo::LayerSpec& l,
                                          const modelzoo::TensorShape& in) {
        using modelzoo::LayerKind;
        const modelzoo::TensorShape out = modelzoo::layer_output_shape(l, in);
        switch (l.kind) {
            case LayerKind::conv2d: {
                const int pad = l.padding == modelzoo::Padding::same
                                    ? detail::same_pad(in.h, out.h, l.kernel, l.stride)
                                    : 0;
                return std::make_unique<Conv2DLayer<T>>(in, out, l.kernel, l.stride, pad);
            }
            case LayerKind::batch_norm:
                return std::make_unique<BatchNormLayer<T>>(in.c);
            case LayerKind::relu:
                return std::make_unique<ReLULayer<T>>();
            case LayerKind::max_pool: {
                const int pad = l.padding == modelzoo::Padding::same
                                    ? detail::same_pad(in.h, out.h, l.pool_size, l.pool_stride)
                                    : 0;
                return std::make_unique<MaxPoolLayer<T>>(in, out, l.pool_size, l.pool_stride,
                                                         pad);
            }
            case LayerKind::dense:
                return std::make_unique<DenseLayer<T>>(in.c, l.units);
            case LayerKind::flatten:
                return std::make_unique<FlattenLayer<T>>();
            case LayerKind::dropout:
                return std::make_unique<DropoutLayer<T>>(l.rate);
            case LayerKind::softmax:
                return std::make_unique<SoftmaxLayer<T>>();
            case LayerKind::concat: {
                std::vector<typename ConcatLayer<T>::Branch> branches;
                for (const auto& bspec : l.branches) {
                    typename ConcatLayer<T>::Branch b;
                    modelzoo::TensorShape cur = in;
                    for (const auto& bl : bspec) {
                        b.layers.push_back(build_layer(bl, cur));
                        cur = modelzoo::layer_output_shape(bl, cur);
                    }
                    b.out_channels = cur.c;
                    branches.push_back(std::move(b));
                }
                return std::make_unique<ConcatLayer<T>>(std::move(branches));
            }
        }
        throw ShapeError("unknown layer kind in network build");
    }

    modelzoo::ModelSpec spec_;
    kern::Exec exec_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    modelzoo::TensorShape out_shape_;
};

}  // namespace gr::nn
