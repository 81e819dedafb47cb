#pragma once

#include <span>
#include <string>

#include "octroi/core.hpp"

namespace octroi::nn {

/// Nesterov momentum SGD in the velocity form
///   v <- momentum * v + g
///   theta <- theta - lr * (g + momentum * v)
template <typename T>
void sgd_nesterov_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, T lr, T momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw ValidationError("sgd_nesterov_step: size mismatch (params " + std::to_string(params.size()) +
                              ", grads " + std::to_string(grads.size()) + ", velocity " +
                              std::to_string(velocity.size()) + ")");
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grads[i];
        params[i] -= lr * (grads[i] + momentum * velocity[i]);
    }
}

}  // namespace octroi::nn
