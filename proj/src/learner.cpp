#include "sisa/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sisa/errors.hpp"
#include "sisa/kernels.hpp"
#include "sisa/rng.hpp"
#include "sisa/store.hpp"

namespace sisa {

std::string HeadMode::name() const {
    switch (kind) {
        case Kind::Full:    return "full";
        case Kind::FcOnly:  return "fc";
        case Kind::Adapter: return "adapter";
    }
    return "?";
}

HeadMode parse_head_mode(const std::string& text, int bottleneck) {
    if (text == "full") return HeadMode::full();
    if (text == "fc" || text == "fconly" || text == "fc_only") return HeadMode::fc_only();
    if (text == "adapter") return HeadMode::adapter(bottleneck);
    throw UsageError("unknown mode '" + text + "' (expected full|fc|adapter)");
}

int64_t trainable_count(const ModelDims& dims, const HeadMode& mode) {
    const int64_t d = dims.input_dim, h = dims.hidden, c = dims.num_classes;
    const int64_t head = c * h + c;
    switch (mode.kind) {
        case HeadMode::Kind::Full:    return h * d + h + head;
        case HeadMode::Kind::FcOnly:  return head;
        case HeadMode::Kind::Adapter: {
            const int64_t k = mode.bottleneck;
            return k * h + k + h * k + h + head;
        }
    }
    return 0;
}

void validate_mode(const ModelDims& dims, const HeadMode& mode) {
    if (dims.input_dim < 1 || dims.hidden < 1 || dims.num_classes < 1) {
        throw UsageError("model dims must all be >= 1");
    }
    if (mode.kind == HeadMode::Kind::Adapter) {
        if (mode.bottleneck < 1) {
            throw UsageError("adapter bottleneck must be >= 1");
        }
        const double ratio = static_cast<double>(trainable_count(dims, mode)) /
                             static_cast<double>(trainable_count(dims, HeadMode::full()));
        if (ratio > 0.05) {
            throw UsageError("adapter trainables are " + std::to_string(ratio * 100.0) +
                             "% of full mode; the limit is 5%");
        }
    }
}

ParamFootprint param_footprint(const ModelDims& dims, const HeadMode& mode) {
    validate_mode(dims, mode);
    ParamFootprint fp;
    fp.trainable_count = trainable_count(dims, mode);
    fp.checkpoint_bytes = 4 * fp.trainable_count + kCheckpointOverheadBytes;
    return fp;
}

namespace {

void fill_uniform(std::vector<float>& v, SplitMix64& rng, float bound) {
    for (float& x : v) {
        x = rng.next_uniform(-bound, bound);
    }
}

}  // namespace

ModelParams init_params(const ModelDims& dims, const HeadMode& mode, uint64_t global_seed,
                        int shard) {
    validate_mode(dims, mode);
    ModelParams p;
    p.dims = dims;
    p.mode = mode;

    const size_t d = static_cast<size_t>(dims.input_dim);
    const size_t h = static_cast<size_t>(dims.hidden);
    const size_t c = static_cast<size_t>(dims.num_classes);

    p.w1.resize(h * d);
    p.b1.resize(h);
    SplitMix64 backbone_rng(derive_stream(global_seed, "backbone"));
    const float backbone_bound = 1.0f / std::sqrt(static_cast<float>(dims.input_dim));
    fill_uniform(p.w1, backbone_rng, backbone_bound);
    fill_uniform(p.b1, backbone_rng, backbone_bound);

    // Trainable weight matrices draw uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    // from the per-shard stream; trainable biases start at zero so the
    // adapter's residual path is signal-proportional at init.
    SplitMix64 init_rng(derive_stream(global_seed, "init", {static_cast<uint64_t>(shard)}));
    const float hidden_bound = 1.0f / std::sqrt(static_cast<float>(dims.hidden));
    if (mode.kind == HeadMode::Kind::Adapter) {
        const size_t k = static_cast<size_t>(mode.bottleneck);
        p.a_down.resize(k * h);
        p.a_down_b.assign(k, 0.0f);
        p.a_up.resize(h * k);
        p.a_up_b.assign(h, 0.0f);
        fill_uniform(p.a_down, init_rng, hidden_bound);
        const float up_bound = 1.0f / std::sqrt(static_cast<float>(mode.bottleneck));
        fill_uniform(p.a_up, init_rng, up_bound);
    }
    p.head_w.resize(c * h);
    p.head_b.assign(c, 0.0f);
    fill_uniform(p.head_w, init_rng, hidden_bound);
    return p;
}

namespace {

// Forward pass for one example; fills the caller's activation buffers.
// z and h have hidden entries, u has bottleneck entries (Adapter only),
// a is the head input, logits/probs have num_classes entries.
struct Activations {
    float* z;
    float* h;
    float* u;
    float* a;
    float* logits;
    float* probs;
};

void forward_one(const ModelParams& p, const FeatureVector& x, const Activations& act) {
    const int h = p.dims.hidden;
    const int c = p.dims.num_classes;

    kernels::affine_sparse(p.w1.data(), p.b1.data(), h, p.dims.input_dim, x, act.z);
    for (int i = 0; i < h; ++i) {
        act.h[i] = act.z[i] > 0.0f ? act.z[i] : 0.0f;
    }
    if (p.mode.kind == HeadMode::Kind::Adapter) {
        const int k = p.mode.bottleneck;
        kernels::affine(p.a_down.data(), p.a_down_b.data(), k, h, act.h, act.u);
        kernels::affine(p.a_up.data(), p.a_up_b.data(), h, k, act.u, act.a);
        for (int i = 0; i < h; ++i) {
            act.a[i] += act.h[i];
        }
    } else {
        std::memcpy(act.a, act.h, sizeof(float) * static_cast<size_t>(h));
    }
    kernels::affine(p.head_w.data(), p.head_b.data(), c, h, act.a, act.logits);

    float max_logit = act.logits[0];
    for (int i = 1; i < c; ++i) {
        max_logit = std::max(max_logit, act.logits[i]);
    }
    float sum = 0.0f;
    for (int i = 0; i < c; ++i) {
        act.probs[i] = std::exp(act.logits[i] - max_logit);
        sum += act.probs[i];
    }
    const float inv = 1.0f / sum;
    for (int i = 0; i < c; ++i) {
        act.probs[i] *= inv;
    }
}

// Flat per-batch activation/gradient storage, reused across batches.
struct BatchScratch {
    int hidden, bottleneck, classes;
    std::vector<float> z, h, u, a, probs;       // batch-major activations
    std::vector<float> dlogits, da, du, dz;     // batch-major gradients
    std::vector<const float*> pt_a, pt_b;       // pointer tables for batch kernels
    std::vector<const FeatureVector*> pt_x;

    std::vector<float> g_w1, g_b1, g_down, g_down_b, g_up, g_up_b, g_head, g_head_b;
    std::vector<int32_t> touched;

    BatchScratch(const ModelDims& dims, const HeadMode& mode, int batch)
        : hidden(dims.hidden),
          bottleneck(mode.kind == HeadMode::Kind::Adapter ? mode.bottleneck : 0),
          classes(dims.num_classes) {
        const size_t b = static_cast<size_t>(batch);
        z.resize(b * hidden);
        h.resize(b * hidden);
        a.resize(b * hidden);
        da.resize(b * hidden);
        probs.resize(b * classes);
        dlogits.resize(b * classes);
        pt_a.resize(b);
        pt_b.resize(b);
        pt_x.resize(b);
        g_head.assign(static_cast<size_t>(classes) * hidden, 0.0f);
        g_head_b.assign(classes, 0.0f);
        if (mode.kind == HeadMode::Kind::Adapter) {
            u.resize(b * bottleneck);
            du.resize(b * bottleneck);
            g_down.assign(static_cast<size_t>(bottleneck) * hidden, 0.0f);
            g_down_b.assign(bottleneck, 0.0f);
            g_up.assign(static_cast<size_t>(hidden) * bottleneck, 0.0f);
            g_up_b.assign(hidden, 0.0f);
        }
        if (mode.kind == HeadMode::Kind::Full) {
            dz.resize(b * hidden);
            g_w1.assign(static_cast<size_t>(hidden) * dims.input_dim, 0.0f);
            g_b1.assign(hidden, 0.0f);
        }
    }
};

// One SGD step on `count` examples: forward, mean-CE gradients, update.
// Returns the summed (not averaged) cross-entropy loss of the batch.
double train_batch(ModelParams& p, std::span<const TrainItem> data,
                   std::span<const size_t> order, size_t first, int count, float lr,
                   BatchScratch& s) {
    const int h = s.hidden;
    const int c = s.classes;
    const int k = s.bottleneck;
    const float inv_b = 1.0f / static_cast<float>(count);

    double loss = 0.0;
    for (int e = 0; e < count; ++e) {
        const TrainItem& item = data[order[first + e]];
        Activations act{
            s.z.data() + static_cast<size_t>(e) * h, s.h.data() + static_cast<size_t>(e) * h,
            k > 0 ? s.u.data() + static_cast<size_t>(e) * k : nullptr,
            s.a.data() + static_cast<size_t>(e) * h, s.dlogits.data() + static_cast<size_t>(e) * c,
            s.probs.data() + static_cast<size_t>(e) * c};
        // dlogits buffer doubles as logits storage until the gradient pass.
        forward_one(p, *item.x, act);
        loss -= std::log(std::max(
            static_cast<double>(s.probs[static_cast<size_t>(e) * c + item.label]), 1e-30));
        s.pt_x[e] = item.x;
    }

    // dlogits = probs - onehot(label)
    for (int e = 0; e < count; ++e) {
        const TrainItem& item = data[order[first + e]];
        float* dl = s.dlogits.data() + static_cast<size_t>(e) * c;
        const float* pr = s.probs.data() + static_cast<size_t>(e) * c;
        for (int i = 0; i < c; ++i) {
            dl[i] = pr[i];
        }
        dl[item.label] -= 1.0f;
    }

    // Head gradients: g_head += (1/B) sum_e dlogits_e a_e^T
    for (int e = 0; e < count; ++e) {
        s.pt_a[e] = s.dlogits.data() + static_cast<size_t>(e) * c;
        s.pt_b[e] = s.a.data() + static_cast<size_t>(e) * h;
    }
    kernels::accumulate_outer_batch(s.g_head.data(), c, h, s.pt_a.data(), s.pt_b.data(), count,
                                    inv_b);
    for (int e = 0; e < count; ++e) {
        const float* dl = s.dlogits.data() + static_cast<size_t>(e) * c;
        for (int i = 0; i < c; ++i) {
            s.g_head_b[i] += inv_b * dl[i];
        }
    }

    // da_e = W2^T dlogits_e
    for (int e = 0; e < count; ++e) {
        kernels::matvec_transpose(p.head_w.data(), c, h,
                                  s.dlogits.data() + static_cast<size_t>(e) * c,
                                  s.da.data() + static_cast<size_t>(e) * h);
    }

    if (p.mode.kind == HeadMode::Kind::Adapter) {
        // Adapter grads; dh = da + Down^T du folds into da in place.
        for (int e = 0; e < count; ++e) {
            s.pt_a[e] = s.da.data() + static_cast<size_t>(e) * h;
            s.pt_b[e] = s.u.data() + static_cast<size_t>(e) * k;
        }
        kernels::accumulate_outer_batch(s.g_up.data(), h, k, s.pt_a.data(), s.pt_b.data(), count,
                                        inv_b);
        for (int e = 0; e < count; ++e) {
            const float* da = s.da.data() + static_cast<size_t>(e) * h;
            for (int i = 0; i < h; ++i) {
                s.g_up_b[i] += inv_b * da[i];
            }
        }
        for (int e = 0; e < count; ++e) {
            kernels::matvec_transpose(p.a_up.data(), h, k,
                                      s.da.data() + static_cast<size_t>(e) * h,
                                      s.du.data() + static_cast<size_t>(e) * k);
        }
        for (int e = 0; e < count; ++e) {
            s.pt_a[e] = s.du.data() + static_cast<size_t>(e) * k;
            s.pt_b[e] = s.h.data() + static_cast<size_t>(e) * h;
        }
        kernels::accumulate_outer_batch(s.g_down.data(), k, h, s.pt_a.data(), s.pt_b.data(),
                                        count, inv_b);
        for (int e = 0; e < count; ++e) {
            const float* du = s.du.data() + static_cast<size_t>(e) * k;
            for (int i = 0; i < k; ++i) {
                s.g_down_b[i] += inv_b * du[i];
            }
        }
    }

    if (p.mode.kind == HeadMode::Kind::Full) {
        // dz = da * relu'(z); backbone gradient over the batch's sparse columns.
        for (int e = 0; e < count; ++e) {
            const float* z = s.z.data() + static_cast<size_t>(e) * h;
            const float* da = s.da.data() + static_cast<size_t>(e) * h;
            float* dz = s.dz.data() + static_cast<size_t>(e) * h;
            for (int i = 0; i < h; ++i) {
                dz[i] = z[i] > 0.0f ? da[i] : 0.0f;
            }
            s.pt_a[e] = dz;
        }
        kernels::accumulate_outer_sparse_batch(s.g_w1.data(), h, p.dims.input_dim, s.pt_a.data(),
                                               s.pt_x.data(), count, inv_b);
        for (int e = 0; e < count; ++e) {
            const float* dz = s.dz.data() + static_cast<size_t>(e) * h;
            for (int i = 0; i < h; ++i) {
                s.g_b1[i] += inv_b * dz[i];
            }
        }

        s.touched.clear();
        for (int e = 0; e < count; ++e) {
            for (const auto& [idx, val] : s.pt_x[e]->entries) {
                s.touched.push_back(idx);
            }
        }
        std::sort(s.touched.begin(), s.touched.end());
        s.touched.erase(std::unique(s.touched.begin(), s.touched.end()), s.touched.end());

        kernels::sgd_update_columns(p.w1.data(), s.g_w1.data(), h, p.dims.input_dim,
                                    s.touched.data(), static_cast<int>(s.touched.size()), lr);
        kernels::sgd_update(p.b1.data(), s.g_b1.data(), h, lr);
    }

    if (p.mode.kind == HeadMode::Kind::Adapter) {
        kernels::sgd_update(p.a_down.data(), s.g_down.data(), k * h, lr);
        kernels::sgd_update(p.a_down_b.data(), s.g_down_b.data(), k, lr);
        kernels::sgd_update(p.a_up.data(), s.g_up.data(), h * k, lr);
        kernels::sgd_update(p.a_up_b.data(), s.g_up_b.data(), h, lr);
    }
    kernels::sgd_update(p.head_w.data(), s.g_head.data(), c * h, lr);
    kernels::sgd_update(p.head_b.data(), s.g_head_b.data(), c, lr);
    return loss;
}

}  // namespace

TrainResult train_steps(ModelParams params, std::span<const TrainItem> data,
                        const TrainConfig& cfg, uint64_t step_seed) {
    if (data.empty()) {
        throw DataError("train_steps called with empty data");
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1 || !(cfg.learning_rate > 0.0f)) {
        throw UsageError("invalid train config");
    }
    for (const TrainItem& item : data) {
        if (item.x->dim != params.dims.input_dim) {
            throw DataError("feature dim mismatch in training data");
        }
        if (item.label < 0 || item.label >= params.dims.num_classes) {
            throw DataError("label out of range in training data");
        }
    }

    TrainResult result;
    BatchScratch scratch(params.dims, params.mode, cfg.batch_size);
    const size_t n = data.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<size_t> order = random_permutation(
            n, derive_stream(step_seed, "epoch", {static_cast<uint64_t>(epoch)}));
        double epoch_loss = 0.0;
        for (size_t first = 0; first < n; first += static_cast<size_t>(cfg.batch_size)) {
            const int count = static_cast<int>(
                std::min(static_cast<size_t>(cfg.batch_size), n - first));
            epoch_loss += train_batch(params, data, order, first, count, cfg.learning_rate,
                                      scratch);
            ++result.steps_taken;
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n));
    }
    result.params = std::move(params);
    return result;
}

std::vector<float> predict_proba(const ModelParams& params, const FeatureVector& x) {
    if (x.dim != params.dims.input_dim) {
        throw DataError("feature dim " + std::to_string(x.dim) + " does not match model input " +
                        std::to_string(params.dims.input_dim));
    }
    const int h = params.dims.hidden;
    const int c = params.dims.num_classes;
    const int k = params.mode.kind == HeadMode::Kind::Adapter ? params.mode.bottleneck : 0;
    std::vector<float> z(h), hh(h), u(std::max(k, 1)), a(h), logits(c), probs(c);
    Activations act{z.data(), hh.data(), u.data(), a.data(), logits.data(), probs.data()};
    forward_one(params, x, act);
    return probs;
}

int predict_label(const ModelParams& params, const FeatureVector& x) {
    const std::vector<float> probs = predict_proba(params, x);
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs[i] > probs[best]) {
            best = i;
        }
    }
    return best;
}

namespace {

std::vector<std::vector<float>*> payload_blocks(ModelParams& p) {
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

}  // namespace

std::vector<float> trainable_payload(const ModelParams& params) {
    auto& mutable_params = const_cast<ModelParams&>(params);  // read-only access below
    std::vector<float> payload;
    payload.reserve(static_cast<size_t>(trainable_count(params.dims, params.mode)));
    for (const std::vector<float>* block : payload_blocks(mutable_params)) {
        payload.insert(payload.end(), block->begin(), block->end());
    }
    return payload;
}

void apply_trainable_payload(ModelParams& params, std::span<const float> payload) {
    if (static_cast<int64_t>(payload.size()) != trainable_count(params.dims, params.mode)) {
        throw StoreError("payload size " + std::to_string(payload.size()) +
                         " does not match trainable count " +
                         std::to_string(trainable_count(params.dims, params.mode)));
    }
    size_t offset = 0;
    for (std::vector<float>* block : payload_blocks(params)) {
        std::copy(payload.begin() + static_cast<ptrdiff_t>(offset),
                  payload.begin() + static_cast<ptrdiff_t>(offset + block->size()),
                  block->begin());
        offset += block->size();
    }
}

}  // namespace sisa
