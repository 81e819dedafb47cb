#include "octroi/nn/model.hpp"

#include <algorithm>
#include <cmath>

namespace octroi::nn {

void ModelConfig::validate() const {
    if (input_rows < 1 || input_cols < 1) throw ValidationError("model input size must be positive");
    if (block_channels.size() != convs_per_block.size())
        throw ValidationError("block_channels and convs_per_block must have the same length");
    if (block_channels.empty()) throw ValidationError("model needs at least one convolutional block");
    int rows = input_rows, cols = input_cols;
    for (std::size_t b = 0; b < block_channels.size(); ++b) {
        if (block_channels[b] < 1 || convs_per_block[b] < 1)
            throw ValidationError("block channels and conv counts must be >= 1");
        if (rows < 2 || cols < 2)
            throw ValidationError("input " + std::to_string(input_rows) + "x" + std::to_string(input_cols) +
                                  " is too small for " + std::to_string(block_channels.size()) + " pooling blocks");
        rows /= 2;
        cols /= 2;
    }
    for (int d : dense_sizes)
        if (d < 1) throw ValidationError("dense sizes must be >= 1");
}

template <typename T>
T sigmoid(T z) {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

template <typename T>
T binary_cross_entropy(std::span<const T> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size() || probabilities.empty())
        throw ValidationError("binary_cross_entropy: need one label per probability");
    const T lo = static_cast<T>(kProbabilityClamp), hi = T(1) - static_cast<T>(kProbabilityClamp);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], lo, hi);
        total += labels[i] ? -std::log(p) : -std::log1p(-p);
    }
    return static_cast<T>(total / static_cast<double>(labels.size()));
}

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    build();
    std::mt19937_64 rng(seed);
    for (const auto& layer : layers_) layer->init(params_.data() + layer->offset, rng);
}

template <typename T>
Model<T>::Model(const Model& other) : config_(other.config_) {
    build();
    params_ = other.params_;
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
void Model<T>::build() {
    layers_.clear();
    layout_.clear();
    int rows = config_.input_rows, cols = config_.input_cols, channels = 1;
    for (std::size_t b = 0; b < config_.block_channels.size(); ++b) {
        for (int k = 0; k < config_.convs_per_block[b]; ++k) {
            layers_.push_back(std::make_unique<Conv3x3<T>>(channels, config_.block_channels[b], rows, cols));
            layers_.push_back(std::make_unique<Relu<T>>());
            channels = config_.block_channels[b];
        }
        layers_.push_back(std::make_unique<MaxPool2<T>>());
        rows /= 2;
        cols /= 2;
    }
    int features = channels * rows * cols;
    for (int d : config_.dense_sizes) {
        layers_.push_back(std::make_unique<Dense<T>>(features, d));
        layers_.push_back(std::make_unique<Relu<T>>());
        features = d;
    }
    layers_.push_back(std::make_unique<Dense<T>>(features, 1));

    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& layer = *layers_[i];
        layer.offset = offset;
        static constexpr const char* suffix[] = {"weight", "bias"};
        const auto shapes = layer.param_shapes();
        for (std::size_t p = 0; p < shapes.size(); ++p) {
            ParamBlock block;
            block.name = "layer" + std::to_string(i) + "." + layer.kind() + "." + suffix[p];
            block.shape = shapes[p];
            block.offset = offset;
            block.count = Tensor<T>::count(shapes[p]);
            offset += block.count;
            layout_.push_back(std::move(block));
        }
    }
    params_.assign(offset, T(0));
}

template <typename T>
void Model<T>::check_input(const Tensor<T>& batch) const {
    if (batch.shape.size() != 4 || batch.shape[1] != 1 || batch.shape[2] != config_.input_rows ||
        batch.shape[3] != config_.input_cols)
        throw ValidationError("model input shape mismatch: expected [N x 1 x " + std::to_string(config_.input_rows) +
                              " x " + std::to_string(config_.input_cols) + "], got " +
                              Tensor<T>::describe(batch.shape));
}

template <typename T>
std::vector<T> Model<T>::logits(const Tensor<T>& batch) {
    check_input(batch);
    Tensor<T> x = batch;
    for (auto& layer : layers_) x = layer->forward(x, params_.data() + layer->offset);
    return std::move(x.data);
}

template <typename T>
std::vector<T> Model<T>::predict(const Tensor<T>& batch) {
    auto z = logits(batch);
    for (T& v : z) v = sigmoid(v);
    return z;
}

template <typename T>
T Model<T>::loss(const Tensor<T>& batch, std::span<const int> labels) {
    const auto p = predict(batch);
    return binary_cross_entropy<T>(p, labels);
}

template <typename T>
LossAndGrad<T> Model<T>::loss_and_grad(const Tensor<T>& batch, std::span<const int> labels) {
    for (int y : labels)
        if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
    const auto z = logits(batch);
    if (z.size() != labels.size())
        throw ValidationError("loss_and_grad: " + std::to_string(labels.size()) + " labels for a batch of " +
                              std::to_string(z.size()));
    std::vector<T> p(z.size());
    std::transform(z.begin(), z.end(), p.begin(), [](T v) { return sigmoid(v); });

    LossAndGrad<T> out;
    out.loss = binary_cross_entropy<T>(p, labels);
    if (!std::isfinite(static_cast<double>(out.loss))) throw NonFiniteLossError("non-finite loss");

    // d/dz of the clamped BCE: (p - y) / n inside the clamp, zero where it saturates.
    const T lo = static_cast<T>(kProbabilityClamp), hi = T(1) - static_cast<T>(kProbabilityClamp);
    const T inv_n = T(1) / static_cast<T>(labels.size());
    Tensor<T> grad({static_cast<int>(labels.size()), 1});
    for (std::size_t i = 0; i < labels.size(); ++i)
        grad.data[i] = (p[i] < lo || p[i] > hi) ? T(0) : (p[i] - static_cast<T>(labels[i])) * inv_n;

    out.gradients.assign(params_.size(), T(0));
    out.probabilities = p;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        auto& layer = *layers_[i];
        grad = layer.backward(grad, params_.data() + layer.offset, out.gradients.data() + layer.offset, i > 0);
    }
    return out;
}

template float sigmoid<float>(float);
template double sigmoid<double>(double);
template float binary_cross_entropy<float>(std::span<const float>, std::span<const int>);
template double binary_cross_entropy<double>(std::span<const double>, std::span<const int>);
template class Model<float>;
template class Model<double>;

}  // namespace octroi::nn
