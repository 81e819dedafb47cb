#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "octroi/core.hpp"

namespace octroi::nn {

/// Dense row-major tensor; batches are laid out NCHW.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, T fill = T(0)) : shape(std::move(shape_)) {
        for (int d : shape)
            if (d < 1) throw ValidationError("tensor dimensions must be >= 1, got " + describe(shape));
        data.assign(count(shape), fill);
    }

    static std::size_t count(const std::vector<int>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    }

    static std::string describe(const std::vector<int>& shape) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << ']';
        return os.str();
    }

    int dim(std::size_t i) const { return shape.at(i); }
    std::size_t size() const { return data.size(); }
    /// Elements per leading-axis slice.
    std::size_t stride0() const { return shape.empty() ? 0 : data.size() / static_cast<std::size_t>(shape[0]); }
};

}  // namespace octroi::nn
