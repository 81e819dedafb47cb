#pragma once
// Deliberately naive reference implementations. Nothing here calls into the
// library's eval/roi code; only mix_seed is shared because it defines the seed rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "octroi/core.hpp"

namespace oracle {

inline double psi(double pos, double neg) { return pos > neg ? 1.0 : (pos == neg ? 0.5 : 0.0); }

// O(m n) Mann-Whitney pair counting.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            wins += psi(scores[i], scores[j]);
            pairs += 1.0;
        }
    }
    return wins / pairs;
}

struct Components {
    double auc = 0.0;
    std::vector<double> v10, v01;
};

inline Components components(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    Components c;
    c.v10.assign(pos.size(), 0.0);
    c.v01.assign(neg.size(), 0.0);
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = 0; j < neg.size(); ++j) {
            const double s = psi(pos[i], neg[j]);
            c.v10[i] += s / static_cast<double>(neg.size());
            c.v01[j] += s / static_cast<double>(pos.size());
            c.auc += s;
        }
    c.auc /= static_cast<double>(pos.size() * neg.size());
    return c;
}

// DeLong covariance of two AUROCs over the same instances: S10/m + S01/n.
inline double delong_covariance(const Components& a, const Components& b) {
    auto s = [](const std::vector<double>& x, double mx, const std::vector<double>& y, double my) {
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) acc += (x[k] - mx) * (y[k] - my);
        return acc / static_cast<double>(x.size() - 1);
    };
    return s(a.v10, a.auc, b.v10, b.auc) / static_cast<double>(a.v10.size()) +
           s(a.v01, a.auc, b.v01, b.auc) / static_cast<double>(a.v01.size());
}

// Independent stratified resampler following the documented seed rule:
// mt19937_64(mix_seed(seed, b)), positives drawn first then negatives.
inline double bootstrap_quantile_auroc(const std::vector<double>& scores, const std::vector<int>& labels,
                                       int B, double q, std::uint64_t seed) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    std::vector<double> values;
    for (int b = 0; b < B; ++b) {
        std::mt19937_64 rng(octroi::mix_seed(seed, static_cast<std::uint64_t>(b)));
        std::vector<double> s;
        std::vector<int> l;
        std::uniform_int_distribution<std::size_t> pp(0, pos.size() - 1);
        for (std::size_t k = 0; k < pos.size(); ++k) s.push_back(pos[pp(rng)]), l.push_back(1);
        std::uniform_int_distribution<std::size_t> pn(0, neg.size() - 1);
        for (std::size_t k = 0; k < neg.size(); ++k) s.push_back(neg[pn(rng)]), l.push_back(0);
        values.push_back(auroc(s, l));
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Corner-aligned bilinear sample of a row-major grid, coordinates in source pixels.
inline double bilinear(const std::vector<double>& px, int rows, int cols, double y, double x) {
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, rows - 1);
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, cols - 1);
    const int y1 = std::min(y0 + 1, rows - 1);
    const int x1 = std::min(x0 + 1, cols - 1);
    const double fy = y - y0, fx = x - x0;
    auto at = [&](int r, int c) { return px[static_cast<std::size_t>(r) * cols + c]; };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

inline std::vector<double> resize(const std::vector<double>& px, int rows, int cols, int out_rows, int out_cols) {
    std::vector<double> out;
    for (int r = 0; r < out_rows; ++r)
        for (int c = 0; c < out_cols; ++c) {
            const double y = out_rows == 1 ? (rows - 1) / 2.0 : r * double(rows - 1) / (out_rows - 1);
            const double x = out_cols == 1 ? (cols - 1) / 2.0 : c * double(cols - 1) / (out_cols - 1);
            out.push_back(bilinear(px, rows, cols, y, x));
        }
    return out;
}

}  // namespace oracle
