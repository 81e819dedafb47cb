#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "octroi/nn/layers.hpp"
#include "octroi/nn/tensor.hpp"

namespace octroi::nn {

/// VGG-style stack: blocks of 3x3 conv + ReLU, each block closed by a 2x2
/// max-pool, then ReLU dense layers and a single-logit sigmoid head.
struct ModelConfig {
    int input_rows = 224;
    int input_cols = 224;
    std::vector<int> block_channels{8, 16, 32};
    std::vector<int> convs_per_block{2, 2, 3};
    std::vector<int> dense_sizes{64};

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
};

template <typename T>
struct LossAndGrad {
    T loss{};
    std::vector<T> gradients;      ///< same layout as Model::params()
    std::vector<T> probabilities;  ///< forward output of the batch
};

/// Loss was NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over the batch, probabilities clamped to
/// [1e-7, 1 - 1e-7].
template <typename T>
T binary_cross_entropy(std::span<const T> probabilities, std::span<const int> labels);

template <typename T>
T sigmoid(T z);

template <typename T>
class Model {
public:
    Model(const ModelConfig& config, std::uint64_t seed);
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelConfig& config() const { return config_; }
    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }
    const std::vector<ParamBlock>& layout() const { return layout_; }

    /// batch: [N, 1, input_rows, input_cols]. Returns one logit per sample.
    std::vector<T> logits(const Tensor<T>& batch);
    /// sigmoid(logit) per sample.
    std::vector<T> predict(const Tensor<T>& batch);
    T loss(const Tensor<T>& batch, std::span<const int> labels);
    LossAndGrad<T> loss_and_grad(const Tensor<T>& batch, std::span<const int> labels);

private:
    void build();
    void check_input(const Tensor<T>& batch) const;

    ModelConfig config_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<ParamBlock> layout_;
    std::vector<T> params_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace octroi::nn
