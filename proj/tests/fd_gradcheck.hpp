#pragma once

// Finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. The loss here is an independent double-precision
// re-implementation of the declared forward pass; the production gradient is
// recovered from one large SGD probe step as (before - after) / lr.

#include <cmath>
#include <span>
#include <vector>

#include "sisa/learner.hpp"
#include "sisa/rng.hpp"

namespace sisa::testing {

inline double loss_oracle(const ModelParams& p, const FeatureVector& x, int label) {
    const int d = p.dims.input_dim;
    const int h = p.dims.hidden;
    const int c = p.dims.num_classes;

    std::vector<double> z(h);
    for (int r = 0; r < h; ++r) {
        double acc = p.b1[r];
        for (const auto& [idx, val] : x.entries) {
            acc += static_cast<double>(p.w1[static_cast<size_t>(r) * d + idx]) * val;
        }
        z[r] = acc;
    }
    std::vector<double> hh(h);
    for (int r = 0; r < h; ++r) {
        hh[r] = z[r] > 0.0 ? z[r] : 0.0;
    }
    std::vector<double> a = hh;
    if (p.mode.kind == HeadMode::Kind::Adapter) {
        const int k = p.mode.bottleneck;
        std::vector<double> u(k);
        for (int r = 0; r < k; ++r) {
            double acc = p.a_down_b[r];
            for (int j = 0; j < h; ++j) {
                acc += static_cast<double>(p.a_down[static_cast<size_t>(r) * h + j]) * hh[j];
            }
            u[r] = acc;
        }
        for (int r = 0; r < h; ++r) {
            double acc = p.a_up_b[r];
            for (int j = 0; j < k; ++j) {
                acc += static_cast<double>(p.a_up[static_cast<size_t>(r) * k + j]) * u[j];
            }
            a[r] += acc;
        }
    }
    std::vector<double> logits(c);
    for (int r = 0; r < c; ++r) {
        double acc = p.head_b[r];
        for (int j = 0; j < h; ++j) {
            acc += static_cast<double>(p.head_w[static_cast<size_t>(r) * h + j]) * a[j];
        }
        logits[r] = acc;
    }
    double max_logit = logits[0];
    for (int r = 1; r < c; ++r) max_logit = std::max(max_logit, logits[r]);
    double sum = 0.0;
    for (int r = 0; r < c; ++r) sum += std::exp(logits[r] - max_logit);
    return std::log(sum) - (logits[label] - max_logit);
}

inline std::vector<std::vector<float>*> trainable_blocks(ModelParams& p) {
    switch (p.mode.kind) {
        case HeadMode::Kind::Full:
            return {&p.w1, &p.b1, &p.head_w, &p.head_b};
        case HeadMode::Kind::FcOnly:
            return {&p.head_w, &p.head_b};
        case HeadMode::Kind::Adapter:
            return {&p.a_down, &p.a_down_b, &p.a_up, &p.a_up_b, &p.head_w, &p.head_b};
    }
    return {};
}

struct GradCheckResult {
    int checked = 0;
    int failed = 0;
    double worst_rel_error = 0.0;
};

// Central finite differences (h = 1e-4) against the production gradient of
// one step, per trainable scalar; relative error must stay under 1e-3.
inline GradCheckResult check_gradients(const ModelDims& dims, const HeadMode& mode,
                                       uint64_t seed) {
    const ModelParams before = init_params(dims, mode, seed);
    SplitMix64 rng(derive_stream(seed, "gradcheck"));
    FeatureVector x;
    x.dim = dims.input_dim;
    for (int32_t i = 0; i < dims.input_dim; i += 1 + static_cast<int32_t>(rng.next_below(7))) {
        x.entries.emplace_back(i, rng.next_uniform(-1.0f, 1.0f));
    }
    const int label = static_cast<int>(rng.next_below(static_cast<uint64_t>(dims.num_classes)));

    // A large probe step makes lr*g dominate the parameter magnitude, so the
    // (before - after) / lr extraction recovers the f32 gradient to ~1e-7
    // relative instead of being swamped by eps(theta).
    TrainConfig cfg;
    cfg.learning_rate = 1e4f;
    cfg.batch_size = 1;
    cfg.epochs = 1;
    const TrainItem item{&x, label};
    TrainResult tr = train_steps(before, std::span<const TrainItem>(&item, 1), cfg, 1);

    ModelParams probe = before;
    ModelParams before_copy = before;
    auto after_blocks = trainable_blocks(tr.params);
    auto before_blocks = trainable_blocks(before_copy);
    auto probe_blocks = trainable_blocks(probe);

    const double fd_step = 1e-4;
    GradCheckResult result;
    for (size_t blk = 0; blk < probe_blocks.size(); ++blk) {
        for (size_t i = 0; i < probe_blocks[blk]->size(); ++i) {
            const double analytic =
                (static_cast<double>((*before_blocks[blk])[i]) - (*after_blocks[blk])[i]) /
                cfg.learning_rate;

            const float saved = (*probe_blocks[blk])[i];
            (*probe_blocks[blk])[i] = static_cast<float>(saved + fd_step);
            const double loss_hi = loss_oracle(probe, x, label);
            (*probe_blocks[blk])[i] = static_cast<float>(saved - fd_step);
            const double loss_lo = loss_oracle(probe, x, label);
            (*probe_blocks[blk])[i] = saved;

            const double fd = (loss_hi - loss_lo) / (2.0 * fd_step);
            const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
            const double rel = std::abs(analytic - fd) / denom;
            result.worst_rel_error = std::max(result.worst_rel_error, rel);
            if (rel >= 1e-3) ++result.failed;
            ++result.checked;
        }
    }
    return result;
}

}  // namespace sisa::testing
