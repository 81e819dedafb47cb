#include "octroi/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace octroi::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void he_normal(T* w, std::size_t n, int fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<T>(normal(rng));
}

void expect_rank(const std::vector<int>& shape, std::size_t rank, const char* layer) {
    if (shape.size() != rank)
        throw ValidationError(std::string(layer) + ": expected rank-" + std::to_string(rank) + " input, got " +
                              Tensor<float>::describe(shape));
}

}  // namespace

// ---- Conv3x3 ---------------------------------------------------------------

template <typename T>
void Conv3x3<T>::init(T* params, std::mt19937_64& rng) const {
    const std::size_t nw = static_cast<std::size_t>(cout_) * cin_ * 9;
    he_normal(params, nw, cin_ * 9, rng);
    std::fill(params + nw, params + nw + cout_, T(0));
}

template <typename T>
void Conv3x3<T>::im2col(const T* image, T* col) const {
    const int hw = rows_ * cols_;
    for (int c = 0; c < cin_; ++c) {
        const T* src = image + static_cast<std::size_t>(c) * hw;
        for (int k = 0; k < 9; ++k) {
            const int dy = k / 3 - 1, dx = k % 3 - 1;
            T* dst = col + (static_cast<std::size_t>(c) * 9 + k) * hw;
            for (int y = 0; y < rows_; ++y) {
                const int sy = y + dy;
                T* drow = dst + static_cast<std::size_t>(y) * cols_;
                if (sy < 0 || sy >= rows_) {
                    std::fill(drow, drow + cols_, T(0));
                    continue;
                }
                const T* srow = src + static_cast<std::size_t>(sy) * cols_;
                const int x0 = std::max(0, -dx), x1 = std::min(cols_, cols_ - dx);
                std::fill(drow, drow + x0, T(0));
                std::copy(srow + x0 + dx, srow + x1 + dx, drow + x0);
                std::fill(drow + x1, drow + cols_, T(0));
            }
        }
    }
}

template <typename T>
void Conv3x3<T>::col2im(const T* col, T* image) const {
    const int hw = rows_ * cols_;
    for (int c = 0; c < cin_; ++c) {
        T* dst = image + static_cast<std::size_t>(c) * hw;
        for (int k = 0; k < 9; ++k) {
            const int dy = k / 3 - 1, dx = k % 3 - 1;
            const T* src = col + (static_cast<std::size_t>(c) * 9 + k) * hw;
            for (int y = 0; y < rows_; ++y) {
                const int sy = y + dy;
                if (sy < 0 || sy >= rows_) continue;
                const T* srow = src + static_cast<std::size_t>(y) * cols_;
                T* drow = dst + static_cast<std::size_t>(sy) * cols_;
                const int x0 = std::max(0, -dx), x1 = std::min(cols_, cols_ - dx);
                for (int x = x0; x < x1; ++x) drow[x + dx] += srow[x];
            }
        }
    }
}

template <typename T>
Tensor<T> Conv3x3<T>::forward(const Tensor<T>& in, const T* params) {
    expect_rank(in.shape, 4, "conv3x3");
    if (in.dim(1) != cin_ || in.dim(2) != rows_ || in.dim(3) != cols_)
        throw ValidationError("conv3x3: expected input [N x " + std::to_string(cin_) + "x" + std::to_string(rows_) +
                              "x" + std::to_string(cols_) + "], got " + Tensor<T>::describe(in.shape));
    const int n = in.dim(0);
    const int hw = rows_ * cols_;
    input_ = in;
    Tensor<T> out({n, cout_, rows_, cols_});
    ConstMapMat<T> w(params, cout_, cin_ * 9);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params + static_cast<std::size_t>(cout_) * cin_ * 9,
                                                               cout_);
    RowMat<T> col(cin_ * 9, hw);
    for (int s = 0; s < n; ++s) {
        im2col(in.data.data() + static_cast<std::size_t>(s) * cin_ * hw, col.data());
        MapMat<T> y(out.data.data() + static_cast<std::size_t>(s) * cout_ * hw, cout_, hw);
        y.noalias() = w * col;
        y.colwise() += bias;
    }
    return out;
}

template <typename T>
Tensor<T> Conv3x3<T>::backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) {
    const int n = input_.dim(0);
    const int hw = rows_ * cols_;
    ConstMapMat<T> w(params, cout_, cin_ * 9);
    MapMat<T> gw(grads, cout_, cin_ * 9);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grads + static_cast<std::size_t>(cout_) * cin_ * 9, cout_);
    Tensor<T> grad_in;
    if (need_input_grad) grad_in = Tensor<T>(input_.shape);
    RowMat<T> col(cin_ * 9, hw);
    RowMat<T> gcol;
    for (int s = 0; s < n; ++s) {
        ConstMapMat<T> gy(grad_out.data.data() + static_cast<std::size_t>(s) * cout_ * hw, cout_, hw);
        im2col(input_.data.data() + static_cast<std::size_t>(s) * cin_ * hw, col.data());
        gw.noalias() += gy * col.transpose();
        // plain loop: Eigen's vectorized reduction peels by address, which breaks reproducibility
        for (int c = 0; c < cout_; ++c) {
            T acc = T(0);
            for (int i = 0; i < hw; ++i) acc += gy(c, i);
            gb[c] += acc;
        }
        if (need_input_grad) {
            gcol.noalias() = w.transpose() * gy;
            col2im(gcol.data(), grad_in.data.data() + static_cast<std::size_t>(s) * cin_ * hw);
        }
    }
    return grad_in;
}

// ---- Relu ------------------------------------------------------------------

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& in, const T*) {
    output_ = in;
    for (T& v : output_.data) v = v > T(0) ? v : T(0);
    return output_;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_out, const T*, T*, bool need_input_grad) {
    if (!need_input_grad) return {};
    Tensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (!(output_.data[i] > T(0))) g.data[i] = T(0);
    return g;
}

// ---- MaxPool2 --------------------------------------------------------------

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& in, const T*) {
    expect_rank(in.shape, 4, "maxpool2");
    const int n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    if (h < 2 || w < 2) throw ValidationError("maxpool2: input " + Tensor<T>::describe(in.shape) + " too small");
    const int oh = h / 2, ow = w / 2;
    in_shape_ = in.shape;
    Tensor<T> out({n, c, oh, ow});
    argmax_.resize(out.size());
    std::size_t o = 0;
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
            const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * h * w;
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x, ++o) {
                    std::size_t best = base + static_cast<std::size_t>(2 * y) * w + 2 * x;
                    for (int k = 1; k < 4; ++k) {
                        const std::size_t idx = base + static_cast<std::size_t>(2 * y + k / 2) * w + 2 * x + k % 2;
                        if (in.data[idx] > in.data[best]) best = idx;
                    }
                    argmax_[o] = best;
                    out.data[o] = in.data[best];
                }
        }
    return out;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out, const T*, T*, bool need_input_grad) {
    if (!need_input_grad) return {};
    Tensor<T> g(in_shape_);
    for (std::size_t o = 0; o < argmax_.size(); ++o) g.data[argmax_[o]] += grad_out.data[o];
    return g;
}

// ---- Dense -----------------------------------------------------------------

template <typename T>
void Dense<T>::init(T* params, std::mt19937_64& rng) const {
    const std::size_t nw = static_cast<std::size_t>(out_) * in_;
    he_normal(params, nw, in_, rng);
    std::fill(params + nw, params + nw + out_, T(0));
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& in, const T* params) {
    if (in.shape.empty() || in.stride0() != static_cast<std::size_t>(in_))
        throw ValidationError("dense: expected " + std::to_string(in_) + " features per sample, got input " +
                              Tensor<T>::describe(in.shape));
    const int n = in.dim(0);
    in_shape_ = in.shape;
    input_ = in;
    Tensor<T> out({n, out_});
    ConstMapMat<T> x(in.data.data(), n, in_);
    ConstMapMat<T> w(params, out_, in_);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(params + static_cast<std::size_t>(out_) * in_, out_);
    MapMat<T> y(out.data.data(), n, out_);
    y.noalias() = x * w.transpose();
    y.rowwise() += bias;
    return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out, const T* params, T* grads, bool need_input_grad) {
    const int n = in_shape_.at(0);
    ConstMapMat<T> x(input_.data.data(), n, in_);
    ConstMapMat<T> gy(grad_out.data.data(), n, out_);
    MapMat<T> gw(grads, out_, in_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grads + static_cast<std::size_t>(out_) * in_, out_);
    gw.noalias() += gy.transpose() * x;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < out_; ++c) gb[c] += gy(r, c);
    if (!need_input_grad) return {};
    Tensor<T> g(in_shape_);
    ConstMapMat<T> w(params, out_, in_);
    MapMat<T> gx(g.data.data(), n, in_);
    gx.noalias() = gy * w;
    return g;
}

template class Conv3x3<float>;
template class Conv3x3<double>;
template class Relu<float>;
template class Relu<double>;
template class MaxPool2<float>;
template class MaxPool2<double>;
template class Dense<float>;
template class Dense<double>;

}  // namespace octroi::nn
