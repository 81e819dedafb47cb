#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "octroi/nn/tensor.hpp"

namespace octroi::nn {

/// Parameters live in one flat buffer owned by the model; a layer only knows
/// its offsets into it. forward() caches whatever backward() needs.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t param_count() const { return 0; }
    /// Shapes of the parameter blocks this layer owns, in buffer order.
    virtual std::vector<std::vector<int>> param_shapes() const { return {}; }
    virtual void init(T* params, std::mt19937_64& rng) const { (void)params, (void)rng; }

    virtual Tensor<T> forward(const Tensor<T>& in, const T* params) = 0;
    /// Accumulates into grads; returns the gradient w.r.t. the last forward input
    /// (empty when need_input_grad is false).
    virtual Tensor<T> backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) = 0;

    std::size_t offset = 0;
};

/// 3x3 convolution, stride 1, zero padding 1. Weights [out][in][3][3], then bias [out].
template <typename T>
class Conv3x3 final : public Layer<T> {
public:
    Conv3x3(int in_channels, int out_channels, int rows, int cols)
        : cin_(in_channels), cout_(out_channels), rows_(rows), cols_(cols) {}

    std::string kind() const override { return "conv3x3"; }
    std::size_t param_count() const override { return static_cast<std::size_t>(cout_) * cin_ * 9 + cout_; }
    std::vector<std::vector<int>> param_shapes() const override { return {{cout_, cin_, 3, 3}, {cout_}}; }
    void init(T* params, std::mt19937_64& rng) const override;
    Tensor<T> forward(const Tensor<T>& in, const T* params) override;
    Tensor<T> backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) override;

private:
    void im2col(const T* image, T* col) const;
    void col2im(const T* col, T* image) const;

    int cin_, cout_, rows_, cols_;
    Tensor<T> input_;
};

template <typename T>
class Relu final : public Layer<T> {
public:
    std::string kind() const override { return "relu"; }
    Tensor<T> forward(const Tensor<T>& in, const T* params) override;
    Tensor<T> backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) override;

private:
    Tensor<T> output_;
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
class MaxPool2 final : public Layer<T> {
public:
    std::string kind() const override { return "maxpool2"; }
    Tensor<T> forward(const Tensor<T>& in, const T* params) override;
    Tensor<T> backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) override;

private:
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

/// Fully connected layer on [N, in] (higher-rank inputs are flattened per sample).
/// Weights [out][in], then bias [out].
template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(int in_features, int out_features) : in_(in_features), out_(out_features) {}

    std::string kind() const override { return "dense"; }
    std::size_t param_count() const override { return static_cast<std::size_t>(out_) * in_ + out_; }
    std::vector<std::vector<int>> param_shapes() const override { return {{out_, in_}, {out_}}; }
    void init(T* params, std::mt19937_64& rng) const override;
    Tensor<T> forward(const Tensor<T>& in, const T* params) override;
    Tensor<T> backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) override;

private:
    int in_, out_;
    Tensor<T> input_;
    std::vector<int> in_shape_;
};

}  // namespace octroi::nn
