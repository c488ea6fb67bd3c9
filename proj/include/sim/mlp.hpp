#pragma once

#include <cmath>
#include <vector>

#include "sim/mat.hpp"
#include "sim/rng.hpp"

namespace sim {

// Fully connected net with ReLU hidden layers and a linear 2-way output.
// The click probability is the softmax of the 2 logits, computed as
// sigmoid(logit[1] - logit[0]).
struct Mlp {
    std::vector<Mat> w;  // w[l]: dims[l+1] x dims[l]
    std::vector<Vec> b;

    Mlp() = default;

    Mlp(const std::vector<int>& dims, Rng& rng) {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            w.push_back(Mat::xavier(dims[l + 1], dims[l], rng));
            b.emplace_back(dims[l + 1], 0.0);
        }
    }

    int input_dim() const { return w.empty() ? 0 : w.front().cols; }
    int output_dim() const { return w.empty() ? 0 : w.back().rows; }

    struct Cache {
        std::vector<Vec> pre;   // pre-activation per layer
        std::vector<Vec> post;  // post-activation per layer (post[0] = input)
    };

    Vec forward(const Vec& x, Cache* cache = nullptr) const {
        Vec h = x;
        if (cache) {
            cache->pre.clear();
            cache->post.clear();
            cache->post.push_back(h);
        }
        for (std::size_t l = 0; l < w.size(); ++l) {
            Vec z = matvec(w[l], h);
            axpy(z, b[l]);
            if (cache) cache->pre.push_back(z);
            if (l + 1 < w.size()) {
                for (auto& v : z)
                    if (v < 0.0) v = 0.0;
            }
            h = std::move(z);
            if (cache) cache->post.push_back(h);
        }
        return h;
    }

    struct Grads {
        std::vector<Mat> w;
        std::vector<Vec> b;

        explicit Grads(const Mlp& m) {
            for (const auto& wi : m.w) w.emplace_back(wi.rows, wi.cols);
            for (const auto& bi : m.b) b.emplace_back(bi.size(), 0.0);
        }
    };

    // Accumulates parameter gradients into `g` and returns dL/dinput.
    Vec backward(const Cache& cache, const Vec& dlogits, Grads& g) const {
        Vec delta = dlogits;
        for (int l = static_cast<int>(w.size()) - 1; l >= 0; --l) {
            if (l + 1 < static_cast<int>(w.size())) {
                // ReLU mask of this layer's pre-activation
                const Vec& pre = cache.pre[l];
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (pre[i] <= 0.0) delta[i] = 0.0;
            }
            add_outer(g.w[l], delta, cache.post[l]);
            axpy(g.b[l], delta);
            delta = matvec_t(w[l], delta);
        }
        return delta;
    }
};

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Click probability from a 2-way logit vector.
inline double two_way_probability(const Vec& logits) {
    return sigmoid(logits[1] - logits[0]);
}

}  // namespace sim
