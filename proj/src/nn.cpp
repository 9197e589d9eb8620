#include "sialign/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace sialign::nn {

const char* to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::relu: return "relu";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

LayerSpec LayerSpec::conv(int out_channels, int kernel_h, int kernel_w, int stride) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.out_channels = out_channels;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::maxpool(int size, int stride) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.kernel_h = size;
    s.kernel_w = size;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::batchnorm() {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::dense(int units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
}

LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid;
    return s;
}

namespace {

int pooled_extent(int in, int size, int stride) {
    if (in <= size) return 1;
    return (in - size + stride - 1) / stride + 1;
}

int strided_extent(int in, int stride) { return (in + stride - 1) / stride; }

} // namespace

std::uint64_t Architecture::fingerprint() const {
    std::string canon;
    for (const LayerSpec& l : layers) {
        canon += to_string(l.kind);
        canon += '(' + std::to_string(l.kernel_h) + ',' + std::to_string(l.kernel_w) +
                 ',' + std::to_string(l.out_channels) + ',' + std::to_string(l.stride) +
                 ',' + std::to_string(l.units) + ");";
    }
    canon += '|';
    canon += tag;

    std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::array<int, 3> Architecture::output_shape(std::array<int, 3> s) const {
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) raise(ErrorKind::shape, "architecture does not compose: " + msg);
    };
    check(s[0] >= 1 && s[1] >= 1 && s[2] >= 1, "empty input shape");
    for (const LayerSpec& l : layers) {
        switch (l.kind) {
        case LayerKind::conv:
            check(l.kernel_h >= 1 && l.kernel_w >= 1 && l.out_channels >= 1 &&
                      l.stride >= 1,
                  "bad conv spec");
            s[0] = strided_extent(s[0], l.stride);
            s[1] = strided_extent(s[1], l.stride);
            s[2] = l.out_channels;
            break;
        case LayerKind::maxpool:
            check(l.kernel_h >= 1 && l.stride >= 1, "bad maxpool spec");
            s[0] = pooled_extent(s[0], l.kernel_h, l.stride);
            s[1] = pooled_extent(s[1], l.kernel_w, l.stride);
            break;
        case LayerKind::flatten:
            s = {1, 1, s[0] * s[1] * s[2]};
            break;
        case LayerKind::dense:
            check(s[0] == 1 && s[1] == 1, "dense requires flattened input");
            check(l.units >= 1, "bad dense spec");
            s[2] = l.units;
            break;
        case LayerKind::relu:
        case LayerKind::sigmoid:
        case LayerKind::batchnorm:
            break;
        }
        check(s[0] >= 1 && s[1] >= 1 && s[2] >= 1, "collapsed shape");
    }
    return s;
}

std::string Architecture::to_json() const {
    nlohmann::json j;
    j["tag"] = tag;
    j["layers"] = nlohmann::json::array();
    for (const LayerSpec& l : layers) {
        nlohmann::json jl;
        jl["kind"] = to_string(l.kind);
        switch (l.kind) {
        case LayerKind::conv:
            jl["out_channels"] = l.out_channels;
            jl["kernel_h"] = l.kernel_h;
            jl["kernel_w"] = l.kernel_w;
            jl["stride"] = l.stride;
            break;
        case LayerKind::maxpool:
            jl["size"] = l.kernel_h;
            jl["stride"] = l.stride;
            break;
        case LayerKind::dense:
            jl["units"] = l.units;
            break;
        default:
            break;
        }
        j["layers"].push_back(jl);
    }
    return j.dump();
}

Architecture Architecture::from_json(const std::string& json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::format, std::string("bad architecture json: ") + e.what());
    }
    Architecture arch;
    arch.tag = j.value("tag", "");
    for (const auto& jl : j.at("layers")) {
        const std::string kind = jl.at("kind").get<std::string>();
        if (kind == "conv")
            arch.layers.push_back(LayerSpec::conv(jl.at("out_channels"), jl.at("kernel_h"),
                                                  jl.at("kernel_w"), jl.value("stride", 1)));
        else if (kind == "maxpool")
            arch.layers.push_back(LayerSpec::maxpool(jl.at("size"), jl.value("stride", 2)));
        else if (kind == "relu")
            arch.layers.push_back(LayerSpec::relu());
        else if (kind == "batchnorm")
            arch.layers.push_back(LayerSpec::batchnorm());
        else if (kind == "flatten")
            arch.layers.push_back(LayerSpec::flatten());
        else if (kind == "dense")
            arch.layers.push_back(LayerSpec::dense(jl.at("units")));
        else if (kind == "sigmoid")
            arch.layers.push_back(LayerSpec::sigmoid());
        else
            raise(ErrorKind::format, "unknown layer kind in json: " + kind);
    }
    return arch;
}

namespace {

template <typename T>
class ConvLayer final : public Layer<T> {
public:
    ConvLayer(const LayerSpec& spec, int in_channels, Rng& rng)
        : kh_(spec.kernel_h), kw_(spec.kernel_w), cin_(in_channels),
          cout_(spec.out_channels), stride_(spec.stride),
          weights_(kh_, kw_, cin_, cout_), bias_(1, 1, 1, cout_),
          dweights_(kh_, kw_, cin_, cout_), dbias_(1, 1, 1, cout_) {
        const double bound = std::sqrt(6.0 / (static_cast<double>(kh_) * kw_ * cin_));
        for (T& w : weights_.data) w = static_cast<T>(rng.uniform(-bound, bound));
    }

    LayerKind kind() const override { return LayerKind::conv; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        if (x.shape[3] != cin_)
            raise(ErrorKind::shape, "conv input channel mismatch");
        x_ = x;
        const int n = x.shape[0], h = x.shape[1], w = x.shape[2];
        const int oh = strided_extent(h, stride_), ow = strided_extent(w, stride_);
        pad_top_ = std::max((oh - 1) * stride_ + kh_ - h, 0) / 2;
        pad_left_ = std::max((ow - 1) * stride_ + kw_ - w, 0) / 2;

        TensorT<T> y(n, oh, ow, cout_);
        std::vector<T> acc(cout_);
        for (int ni = 0; ni < n; ++ni)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    std::memcpy(acc.data(), bias_.data.data(), sizeof(T) * cout_);
                    for (int ky = 0; ky < kh_; ++ky) {
                        const int iy = oy * stride_ - pad_top_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw_; ++kx) {
                            const int ix = ox * stride_ - pad_left_ + kx;
                            if (ix < 0 || ix >= w) continue;
                            const T* xr = &x.data[x.index(ni, iy, ix, 0)];
                            const T* wr = &weights_.data[weights_.index(ky, kx, 0, 0)];
                            for (int ci = 0; ci < cin_; ++ci) {
                                const T xv = xr[ci];
                                const T* wc = wr + static_cast<std::size_t>(ci) * cout_;
                                for (int co = 0; co < cout_; ++co) acc[co] += xv * wc[co];
                            }
                        }
                    }
                    std::memcpy(&y.data[y.index(ni, oy, ox, 0)], acc.data(),
                                sizeof(T) * cout_);
                }
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "conv backward before forward");
        const int n = x_.shape[0], h = x_.shape[1], w = x_.shape[2];
        const int oh = dy.shape[1], ow = dy.shape[2];
        TensorT<T> dx(n, h, w, cin_);

        for (int ni = 0; ni < n; ++ni)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const T* dyr = &dy.data[dy.index(ni, oy, ox, 0)];
                    for (int co = 0; co < cout_; ++co) dbias_.data[co] += dyr[co];
                    for (int ky = 0; ky < kh_; ++ky) {
                        const int iy = oy * stride_ - pad_top_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw_; ++kx) {
                            const int ix = ox * stride_ - pad_left_ + kx;
                            if (ix < 0 || ix >= w) continue;
                            const T* xr = &x_.data[x_.index(ni, iy, ix, 0)];
                            T* dxr = &dx.data[dx.index(ni, iy, ix, 0)];
                            const std::size_t wbase = weights_.index(ky, kx, 0, 0);
                            for (int ci = 0; ci < cin_; ++ci) {
                                const T xv = xr[ci];
                                const T* wc = &weights_.data[wbase] +
                                              static_cast<std::size_t>(ci) * cout_;
                                T* dwc = &dweights_.data[wbase] +
                                         static_cast<std::size_t>(ci) * cout_;
                                T acc = 0;
                                for (int co = 0; co < cout_; ++co) {
                                    dwc[co] += xv * dyr[co];
                                    acc += wc[co] * dyr[co];
                                }
                                dxr[ci] += acc;
                            }
                        }
                    }
                }
        return dx;
    }

    std::vector<TensorT<T>*> params() override { return {&weights_, &bias_}; }
    std::vector<TensorT<T>*> grads() override { return {&dweights_, &dbias_}; }

private:
    int kh_, kw_, cin_, cout_, stride_;
    int pad_top_ = 0, pad_left_ = 0;
    TensorT<T> weights_, bias_, dweights_, dbias_;
    TensorT<T> x_;
    bool forward_done_ = false;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
public:
    MaxPoolLayer(const LayerSpec& spec)
        : size_(spec.kernel_h), stride_(spec.stride) {}

    LayerKind kind() const override { return LayerKind::maxpool; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        in_shape_ = x.shape;
        const int n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
        const int oh = pooled_extent(h, size_, stride_);
        const int ow = pooled_extent(w, size_, stride_);
        TensorT<T> y(n, oh, ow, c);
        argmax_.assign(y.size(), 0);
        for (int ni = 0; ni < n; ++ni)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    for (int ci = 0; ci < c; ++ci) {
                        T best = -std::numeric_limits<T>::infinity();
                        std::size_t best_idx = 0;
                        for (int ky = 0; ky < size_; ++ky) {
                            const int iy = oy * stride_ + ky;
                            if (iy >= h) break; // out-of-range acts as -inf pad
                            for (int kx = 0; kx < size_; ++kx) {
                                const int ix = ox * stride_ + kx;
                                if (ix >= w) break;
                                const std::size_t idx = x.index(ni, iy, ix, ci);
                                if (x.data[idx] > best) {
                                    best = x.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        const std::size_t oidx = y.index(ni, oy, ox, ci);
                        y.data[oidx] = best;
                        argmax_[oidx] = best_idx;
                    }
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "maxpool backward before forward");
        TensorT<T> dx = TensorT<T>::from_shape(in_shape_);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
        return dx;
    }

private:
    int size_, stride_;
    std::array<int, 4> in_shape_{};
    std::vector<std::size_t> argmax_;
    bool forward_done_ = false;
};

template <typename T>
class ReluLayer final : public Layer<T> {
public:
    LayerKind kind() const override { return LayerKind::relu; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        x_ = x;
        TensorT<T> y = x;
        for (T& v : y.data) v = v > T(0) ? v : T(0);
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "relu backward before forward");
        TensorT<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x_.data[i] <= T(0)) dx.data[i] = T(0);
        return dx;
    }

private:
    TensorT<T> x_;
    bool forward_done_ = false;
};

template <typename T>
class SigmoidLayer final : public Layer<T> {
public:
    LayerKind kind() const override { return LayerKind::sigmoid; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        y_ = x;
        for (T& v : y_.data) v = T(1) / (T(1) + std::exp(-v));
        forward_done_ = true;
        return y_;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "sigmoid backward before forward");
        TensorT<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            dx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
        return dx;
    }

private:
    TensorT<T> y_;
    bool forward_done_ = false;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
public:
    explicit BatchNormLayer(int channels)
        : c_(channels), gamma_(1, 1, 1, channels), beta_(1, 1, 1, channels),
          dgamma_(1, 1, 1, channels), dbeta_(1, 1, 1, channels),
          run_mean_(1, 1, 1, channels), run_var_(1, 1, 1, channels) {
        gamma_.fill(T(1));
        run_var_.fill(T(1));
    }

    LayerKind kind() const override { return LayerKind::batchnorm; }

    TensorT<T> forward(const TensorT<T>& x, bool train) override {
        if (x.shape[3] != c_) raise(ErrorKind::shape, "batchnorm channel mismatch");
        train_mode_ = train;
        const std::size_t m = x.size() / c_;
        xhat_ = TensorT<T>::from_shape(x.shape);
        inv_std_.assign(c_, T(0));
        TensorT<T> y = TensorT<T>::from_shape(x.shape);

        if (train) {
            std::vector<double> mean(c_, 0.0), var(c_, 0.0);
            for (std::size_t i = 0; i < x.size(); ++i) mean[i % c_] += x.data[i];
            for (int ci = 0; ci < c_; ++ci) mean[ci] /= static_cast<double>(m);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = x.data[i] - mean[i % c_];
                var[i % c_] += d * d;
            }
            for (int ci = 0; ci < c_; ++ci) var[ci] /= static_cast<double>(m);
            for (int ci = 0; ci < c_; ++ci) {
                inv_std_[ci] = static_cast<T>(1.0 / std::sqrt(var[ci] + kEps));
                run_mean_.data[ci] = static_cast<T>(kMomentum * run_mean_.data[ci] +
                                                    (1.0 - kMomentum) * mean[ci]);
                run_var_.data[ci] = static_cast<T>(kMomentum * run_var_.data[ci] +
                                                   (1.0 - kMomentum) * var[ci]);
            }
            for (std::size_t i = 0; i < x.size(); ++i) {
                const int ci = static_cast<int>(i % c_);
                xhat_.data[i] =
                    static_cast<T>((x.data[i] - mean[ci]) * inv_std_[ci]);
                y.data[i] = gamma_.data[ci] * xhat_.data[i] + beta_.data[ci];
            }
        } else {
            for (int ci = 0; ci < c_; ++ci)
                inv_std_[ci] =
                    static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var_.data[ci]) + kEps));
            for (std::size_t i = 0; i < x.size(); ++i) {
                const int ci = static_cast<int>(i % c_);
                xhat_.data[i] = (x.data[i] - run_mean_.data[ci]) * inv_std_[ci];
                y.data[i] = gamma_.data[ci] * xhat_.data[i] + beta_.data[ci];
            }
        }
        m_ = m;
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "batchnorm backward before forward");
        TensorT<T> dx = TensorT<T>::from_shape(dy.shape);
        std::vector<double> sum_dy(c_, 0.0), sum_dy_xhat(c_, 0.0);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const int ci = static_cast<int>(i % c_);
            sum_dy[ci] += dy.data[i];
            sum_dy_xhat[ci] += static_cast<double>(dy.data[i]) * xhat_.data[i];
        }
        for (int ci = 0; ci < c_; ++ci) {
            dgamma_.data[ci] += static_cast<T>(sum_dy_xhat[ci]);
            dbeta_.data[ci] += static_cast<T>(sum_dy[ci]);
        }
        if (train_mode_) {
            const double inv_m = 1.0 / static_cast<double>(m_);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const int ci = static_cast<int>(i % c_);
                const double term = dy.data[i] - inv_m * sum_dy[ci] -
                                    xhat_.data[i] * inv_m * sum_dy_xhat[ci];
                dx.data[i] = static_cast<T>(gamma_.data[ci] * inv_std_[ci] * term);
            }
        } else {
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const int ci = static_cast<int>(i % c_);
                dx.data[i] = dy.data[i] * gamma_.data[ci] * inv_std_[ci];
            }
        }
        return dx;
    }

    std::vector<TensorT<T>*> params() override { return {&gamma_, &beta_}; }
    std::vector<TensorT<T>*> grads() override { return {&dgamma_, &dbeta_}; }
    std::vector<TensorT<T>*> state() override { return {&run_mean_, &run_var_}; }

private:
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.9;

    int c_;
    TensorT<T> gamma_, beta_, dgamma_, dbeta_, run_mean_, run_var_;
    TensorT<T> xhat_;
    std::vector<T> inv_std_;
    std::size_t m_ = 0;
    bool train_mode_ = false;
    bool forward_done_ = false;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
public:
    LayerKind kind() const override { return LayerKind::flatten; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        in_shape_ = x.shape;
        TensorT<T> y = x;
        y.shape = {x.shape[0], 1, 1, x.shape[1] * x.shape[2] * x.shape[3]};
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "flatten backward before forward");
        TensorT<T> dx = dy;
        dx.shape = in_shape_;
        return dx;
    }

private:
    std::array<int, 4> in_shape_{};
    bool forward_done_ = false;
};

template <typename T>
class DenseLayer final : public Layer<T> {
public:
    DenseLayer(const LayerSpec& spec, int in_features, Rng& rng)
        : in_(in_features), out_(spec.units), weights_(1, 1, in_features, spec.units),
          bias_(1, 1, 1, spec.units), dweights_(1, 1, in_features, spec.units),
          dbias_(1, 1, 1, spec.units) {
        const double bound = std::sqrt(6.0 / in_features);
        for (T& w : weights_.data) w = static_cast<T>(rng.uniform(-bound, bound));
    }

    LayerKind kind() const override { return LayerKind::dense; }

    TensorT<T> forward(const TensorT<T>& x, bool) override {
        if (x.shape[1] != 1 || x.shape[2] != 1 || x.shape[3] != in_)
            raise(ErrorKind::shape, "dense input shape mismatch");
        x_ = x;
        const int n = x.shape[0];
        TensorT<T> y(n, 1, 1, out_);
        for (int ni = 0; ni < n; ++ni) {
            T* yr = &y.data[y.index(ni, 0, 0, 0)];
            std::memcpy(yr, bias_.data.data(), sizeof(T) * out_);
            const T* xr = &x.data[x.index(ni, 0, 0, 0)];
            for (int i = 0; i < in_; ++i) {
                const T xv = xr[i];
                const T* wr = &weights_.data[static_cast<std::size_t>(i) * out_];
                for (int o = 0; o < out_; ++o) yr[o] += xv * wr[o];
            }
        }
        forward_done_ = true;
        return y;
    }

    TensorT<T> backward(const TensorT<T>& dy) override {
        if (!forward_done_) raise(ErrorKind::state, "dense backward before forward");
        const int n = x_.shape[0];
        TensorT<T> dx(n, 1, 1, in_);
        for (int ni = 0; ni < n; ++ni) {
            const T* dyr = &dy.data[dy.index(ni, 0, 0, 0)];
            for (int o = 0; o < out_; ++o) dbias_.data[o] += dyr[o];
            const T* xr = &x_.data[x_.index(ni, 0, 0, 0)];
            T* dxr = &dx.data[dx.index(ni, 0, 0, 0)];
            for (int i = 0; i < in_; ++i) {
                const T xv = xr[i];
                const T* wr = &weights_.data[static_cast<std::size_t>(i) * out_];
                T* dwr = &dweights_.data[static_cast<std::size_t>(i) * out_];
                T acc = 0;
                for (int o = 0; o < out_; ++o) {
                    dwr[o] += xv * dyr[o];
                    acc += wr[o] * dyr[o];
                }
                dxr[i] = acc;
            }
        }
        return dx;
    }

    std::vector<TensorT<T>*> params() override { return {&weights_, &bias_}; }
    std::vector<TensorT<T>*> grads() override { return {&dweights_, &dbias_}; }

private:
    int in_, out_;
    TensorT<T> weights_, bias_, dweights_, dbias_;
    TensorT<T> x_;
    bool forward_done_ = false;
};

} // namespace

template <typename T>
Model<T>::Model(Architecture arch, std::array<int, 3> input_hwc, std::uint64_t seed)
    : arch_(std::move(arch)), input_hwc_(input_hwc) {
    output_hwc_ = arch_.output_shape(input_hwc); // validates composition
    for (const LayerSpec& l : arch_.layers)
        if (l.kind == LayerKind::flatten || l.kind == LayerKind::dense)
            spatial_fixed_ = true;
    Rng rng(seed);
    std::array<int, 3> s = input_hwc;
    for (const LayerSpec& spec : arch_.layers) {
        switch (spec.kind) {
        case LayerKind::conv:
            layers_.push_back(std::make_unique<ConvLayer<T>>(spec, s[2], rng));
            s[0] = strided_extent(s[0], spec.stride);
            s[1] = strided_extent(s[1], spec.stride);
            s[2] = spec.out_channels;
            break;
        case LayerKind::maxpool:
            layers_.push_back(std::make_unique<MaxPoolLayer<T>>(spec));
            s[0] = pooled_extent(s[0], spec.kernel_h, spec.stride);
            s[1] = pooled_extent(s[1], spec.kernel_w, spec.stride);
            break;
        case LayerKind::relu:
            layers_.push_back(std::make_unique<ReluLayer<T>>());
            break;
        case LayerKind::sigmoid:
            layers_.push_back(std::make_unique<SigmoidLayer<T>>());
            break;
        case LayerKind::batchnorm:
            layers_.push_back(std::make_unique<BatchNormLayer<T>>(s[2]));
            break;
        case LayerKind::flatten:
            layers_.push_back(std::make_unique<FlattenLayer<T>>());
            s = {1, 1, s[0] * s[1] * s[2]};
            break;
        case LayerKind::dense:
            layers_.push_back(std::make_unique<DenseLayer<T>>(spec, s[2], rng));
            s[2] = spec.units;
            break;
        }
    }
}

template <typename T>
Model<T>::Model(const Model& other)
    : Model(other.arch_, other.input_hwc_, 0) {
    Model& src = const_cast<Model&>(other);
    restore(src.snapshot());
}

template <typename T>
Model<T>& Model<T>::operator=(const Model& other) {
    if (this != &other) {
        Model copy(other);
        *this = std::move(copy);
    }
    return *this;
}

template <typename T>
TensorT<T> Model<T>::forward(const TensorT<T>& x, bool train) {
    if (x.shape[3] != input_hwc_[2] ||
        (spatial_fixed_ &&
         (x.shape[1] != input_hwc_[0] || x.shape[2] != input_hwc_[1])))
        raise(ErrorKind::shape, "model input shape mismatch");
    TensorT<T> cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, train);
    forward_done_ = true;
    return cur;
}

template <typename T>
TensorT<T> Model<T>::backward(const TensorT<T>& dy) {
    if (!forward_done_) raise(ErrorKind::state, "backward called before forward");
    TensorT<T> cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur);
    return cur;
}

template <typename T>
std::vector<TensorT<T>*> Model<T>::parameters() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
        for (auto* p : l->params()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<TensorT<T>*> Model<T>::gradients() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
        for (auto* g : l->grads()) out.push_back(g);
    return out;
}

template <typename T>
std::vector<TensorT<T>*> Model<T>::state_tensors() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
        for (auto* s : l->state()) out.push_back(s);
    return out;
}

template <typename T>
void Model<T>::zero_grads() {
    for (auto* g : gradients()) g->fill(T(0));
}

template <typename T>
std::vector<TensorT<T>> Model<T>::snapshot() {
    std::vector<TensorT<T>> out;
    for (auto* p : parameters()) out.push_back(*p);
    for (auto* s : state_tensors()) out.push_back(*s);
    return out;
}

template <typename T>
void Model<T>::restore(const std::vector<TensorT<T>>& snap) {
    auto params = parameters();
    auto state = state_tensors();
    if (snap.size() != params.size() + state.size())
        raise(ErrorKind::shape, "snapshot tensor count mismatch");
    std::size_t i = 0;
    for (auto* p : params) *p = snap[i++];
    for (auto* s : state) *s = snap[i++];
}

template <typename T>
void sgd_step(const std::vector<TensorT<T>*>& params,
              const std::vector<TensorT<T>*>& grads,
              std::vector<TensorT<T>>& velocity, double lr, double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        raise(ErrorKind::shape, "optimizer tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        TensorT<T>& p = *params[i];
        const TensorT<T>& g = *grads[i];
        TensorT<T>& v = velocity[i];
        if (p.shape != g.shape || p.shape != v.shape)
            raise(ErrorKind::shape, "optimizer tensor shape mismatch");
        for (std::size_t k = 0; k < p.data.size(); ++k) {
            v.data[k] = static_cast<T>(momentum * v.data[k] + g.data[k]);
            p.data[k] -= static_cast<T>(lr * v.data[k]);
        }
    }
}

namespace {

constexpr char kMagic[8] = {'S', 'I', 'A', 'L', 'N', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFull));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        raise(ErrorKind::corrupt, "truncated checkpoint: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
    const std::uint64_t lo = read_u32(in, path);
    const std::uint64_t hi = read_u32(in, path);
    return lo | (hi << 32);
}

} // namespace

void save_checkpoint(Model<float>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::io, "cannot open for writing: " + path);

    out.write(kMagic, 8);
    write_u32(out, kVersion);
    write_u64(out, model.fingerprint());
    write_u32(out, static_cast<std::uint32_t>(model.architecture().layers.size()));

    nlohmann::json meta;
    meta["arch"] = nlohmann::json::parse(model.architecture().to_json());
    meta["input"] = {model.input_shape()[0], model.input_shape()[1],
                     model.input_shape()[2]};
    const std::string meta_str = meta.dump();
    write_u32(out, static_cast<std::uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    auto tensors = model.parameters();
    for (auto* s : model.state_tensors()) tensors.push_back(s);
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
        for (int d : t->shape) write_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(float)));
    }
    if (!out) raise(ErrorKind::io, "short write: " + path);
}

namespace {

Model<float> load_checkpoint_impl(const std::string& path,
                                  const Architecture* expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot open checkpoint: " + path);

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        raise(ErrorKind::format, "not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        raise(ErrorKind::version, "checkpoint format version " + std::to_string(version) +
                                      " (expected " + std::to_string(kVersion) + ")");
    const std::uint64_t stored_fp = read_u64(in, path);
    const std::uint32_t layer_count = read_u32(in, path);

    const std::uint32_t meta_len = read_u32(in, path);
    std::string meta_str(meta_len, '\0');
    if (!in.read(meta_str.data(), meta_len))
        raise(ErrorKind::corrupt, "truncated checkpoint: " + path);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception&) {
        raise(ErrorKind::corrupt, "checkpoint metadata unreadable: " + path);
    }
    const Architecture arch = Architecture::from_json(meta.at("arch").dump());
    if (arch.layers.size() != layer_count)
        raise(ErrorKind::corrupt, "checkpoint layer count mismatch: " + path);
    if (arch.fingerprint() != stored_fp)
        raise(ErrorKind::corrupt, "checkpoint fingerprint does not match its contents");
    if (expected && expected->fingerprint() != stored_fp)
        raise(ErrorKind::fingerprint,
              "checkpoint does not match the supplied architecture");

    const auto input = meta.at("input");
    Model<float> model(arch, {input.at(0), input.at(1), input.at(2)}, 0);

    auto tensors = model.parameters();
    for (auto* s : model.state_tensors()) tensors.push_back(s);
    const std::uint32_t tensor_count = read_u32(in, path);
    if (tensor_count != tensors.size())
        raise(ErrorKind::corrupt, "checkpoint tensor count mismatch: " + path);
    for (Tensor* t : tensors) {
        std::array<int, 4> dims;
        for (int& d : dims) d = static_cast<int>(read_u32(in, path));
        if (dims != t->shape)
            raise(ErrorKind::corrupt, "checkpoint tensor shape mismatch: " + path);
        if (!in.read(reinterpret_cast<char*>(t->data.data()),
                     static_cast<std::streamsize>(t->data.size() * sizeof(float))))
            raise(ErrorKind::corrupt, "truncated checkpoint: " + path);
    }
    return model;
}

} // namespace

Model<float> load_checkpoint(const std::string& path) {
    return load_checkpoint_impl(path, nullptr);
}

Model<float> load_checkpoint(const std::string& path, const Architecture& expected) {
    return load_checkpoint_impl(path, &expected);
}

template class Model<float>;
template class Model<double>;
template void sgd_step<float>(const std::vector<TensorT<float>*>&,
                              const std::vector<TensorT<float>*>&,
                              std::vector<TensorT<float>>&, double, double);
template void sgd_step<double>(const std::vector<TensorT<double>*>&,
                               const std::vector<TensorT<double>*>&,
                               std::vector<TensorT<double>>&, double, double);

} // namespace sialign::nn
