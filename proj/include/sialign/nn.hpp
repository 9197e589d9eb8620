#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sialign/error.hpp"
#include "sialign/rng.hpp"

namespace sialign::nn {

// Dense 4-d tensor, NHWC. Parameter tensors reuse the same container with
// role-specific axis meanings (conv kernels are kh x kw x cin x cout).
template <typename T>
struct TensorT {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<T> data;

    TensorT() = default;
    TensorT(int n, int h, int w, int c)
        : shape{n, h, w, c},
          data(static_cast<std::size_t>(n) * h * w * c, T(0)) {}

    static TensorT from_shape(const std::array<int, 4>& s) {
        return TensorT(s[0], s[1], s[2], s[3]);
    }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[i]; }

    std::size_t index(int n, int h, int w, int c) const {
        return ((static_cast<std::size_t>(n) * shape[1] + h) * shape[2] + w) *
                   shape[3] +
               c;
    }
    T& at(int n, int h, int w, int c) { return data[index(n, h, w, c)]; }
    T at(int n, int h, int w, int c) const { return data[index(n, h, w, c)]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

enum class LayerKind { conv, maxpool, relu, batchnorm, flatten, dense, sigmoid };

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int kernel_h = 0;
    int kernel_w = 0;
    int out_channels = 0; // conv
    int stride = 1;       // conv / maxpool
    int units = 0;        // dense

    static LayerSpec conv(int out_channels, int kernel_h, int kernel_w,
                          int stride = 1);
    static LayerSpec maxpool(int size = 2, int stride = 2);
    static LayerSpec relu();
    static LayerSpec batchnorm();
    static LayerSpec flatten();
    static LayerSpec dense(int units);
    static LayerSpec sigmoid();
};

// Ordered layer specs plus a free-form tag (model family, feature kind, ...)
// that is folded into the fingerprint so checkpoints cannot be mixed across
// incompatible configurations.
struct Architecture {
    std::vector<LayerSpec> layers;
    std::string tag;

    std::uint64_t fingerprint() const;

    // shape propagation for (h, w, c); throws ErrorKind::shape when layers
    // do not compose
    std::array<int, 3> output_shape(std::array<int, 3> input_hwc) const;

    std::string to_json() const;
    static Architecture from_json(const std::string& json);
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual TensorT<T> forward(const TensorT<T>& x, bool train) = 0;
    virtual TensorT<T> backward(const TensorT<T>& dy) = 0;
    virtual std::vector<TensorT<T>*> params() { return {}; }
    virtual std::vector<TensorT<T>*> grads() { return {}; }
    // persistent non-trained tensors (batch-norm running stats)
    virtual std::vector<TensorT<T>*> state() { return {}; }
};

// Sequential network over a fixed per-example input shape. Forward caches
// what backward needs; backward accumulates parameter gradients until
// zero_grads().
template <typename T>
class Model {
public:
    Model(Architecture arch, std::array<int, 3> input_hwc, std::uint64_t seed);

    // copying rebuilds the layer stack and transfers parameters and state
    // (forward caches are not carried over)
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    TensorT<T> forward(const TensorT<T>& x, bool train);
    // dy matches the forward output; returns d(loss)/d(input)
    TensorT<T> backward(const TensorT<T>& dy);

    std::vector<TensorT<T>*> parameters();
    std::vector<TensorT<T>*> gradients();
    std::vector<TensorT<T>*> state_tensors();
    void zero_grads();

    const Architecture& architecture() const { return arch_; }
    std::array<int, 3> input_shape() const { return input_hwc_; }
    std::array<int, 3> output_shape() const { return output_hwc_; }
    std::uint64_t fingerprint() const { return arch_.fingerprint(); }

    // copies of every parameter + state tensor, and the inverse
    std::vector<TensorT<T>> snapshot();
    void restore(const std::vector<TensorT<T>>& snap);

private:
    Architecture arch_;
    std::array<int, 3> input_hwc_;
    std::array<int, 3> output_hwc_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    bool spatial_fixed_ = false; // flatten/dense pin the spatial extent
    bool forward_done_ = false;
};

// v <- momentum * v + g; p <- p - lr * v
template <typename T>
void sgd_step(const std::vector<TensorT<T>*>& params,
              const std::vector<TensorT<T>*>& grads,
              std::vector<TensorT<T>>& velocity, double lr,
              double momentum = 0.9);

template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}

    void step(Model<T>& model) {
        auto params = model.parameters();
        auto grads = model.gradients();
        if (velocity_.empty())
            for (auto* p : params) velocity_.push_back(TensorT<T>::from_shape(p->shape));
        sgd_step(params, grads, velocity_, lr_, momentum_);
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_;
    double momentum_;
    std::vector<TensorT<T>> velocity_;
};

// Checkpoint file: magic, u32 format version, u64 architecture fingerprint,
// u32 layer count, architecture JSON, then per layer the parameter and state
// tensors as shape headers + little-endian float32 data.
void save_checkpoint(Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);
Model<float> load_checkpoint(const std::string& path, const Architecture& expected);

} // namespace sialign::nn
