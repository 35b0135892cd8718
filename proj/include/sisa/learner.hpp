#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sisa/data.hpp"

namespace sisa {

// Which parameter blocks are trainable (and therefore checkpointed).
//   Full:   backbone + head           (the full fine-tuning analog)
//   FcOnly: head only                 (final-layer fine-tuning)
//   Adapter: bottleneck adapter + head (parameter-efficient variant; the
//            adapter must stay within 5% of the Full trainable count)
struct HeadMode {
    enum class Kind : uint8_t { Full = 0, FcOnly = 1, Adapter = 2 };

    Kind kind = Kind::Full;
    int bottleneck = 0;  // Adapter only

    static HeadMode full() { return {Kind::Full, 0}; }
    static HeadMode fc_only() { return {Kind::FcOnly, 0}; }
    static HeadMode adapter(int bottleneck) { return {Kind::Adapter, bottleneck}; }

    bool operator==(const HeadMode&) const = default;
    std::string name() const;
};

HeadMode parse_head_mode(const std::string& text, int bottleneck);

struct ModelDims {
    int input_dim = 0;  // feature hash dim
    int hidden = 0;
    int num_classes = 0;

    bool operator==(const ModelDims&) const = default;
};

// Frozen random single-hidden-layer backbone plus the mode's trainable blocks.
// Forward pass: h = relu(W1 x + b1); a = h + adapter(h) (Adapter mode only,
// adapter(h) = Up (Down h + bd) + bu); logits = W2 a + b2. All values f32.
struct ModelParams {
    ModelDims dims;
    HeadMode mode;

    std::vector<float> w1;       // hidden x input_dim, row-major
    std::vector<float> b1;       // hidden
    std::vector<float> a_down;   // bottleneck x hidden
    std::vector<float> a_down_b; // bottleneck
    std::vector<float> a_up;     // hidden x bottleneck
    std::vector<float> a_up_b;   // hidden
    std::vector<float> head_w;   // num_classes x hidden
    std::vector<float> head_b;   // num_classes
};

struct TrainConfig {
    float learning_rate = 5e-3f;
    int batch_size = 16;
    int epochs = 10;
    uint64_t global_seed = 42;
};

// Trainable parameter count and on-disk checkpoint size for one (dims, mode).
struct ParamFootprint {
    int64_t trainable_count = 0;
    int64_t checkpoint_bytes = 0;
};

// Throws UsageError when the mode is invalid for these dims (bottleneck < 1,
// or adapter trainables exceeding 5% of the Full-mode trainables).
void validate_mode(const ModelDims& dims, const HeadMode& mode);

int64_t trainable_count(const ModelDims& dims, const HeadMode& mode);
ParamFootprint param_footprint(const ModelDims& dims, const HeadMode& mode);

// Deterministic init. The backbone comes from stream(global_seed, "backbone")
// and is therefore shared by every shard of a run; trainable blocks come from
// stream(global_seed, "init", shard). Weights and biases are uniform in
// (-1/sqrt(fan_in), +1/sqrt(fan_in)).
ModelParams init_params(const ModelDims& dims, const HeadMode& mode, uint64_t global_seed,
                        int shard = 0);

struct TrainItem {
    const FeatureVector* x = nullptr;
    int label = 0;
};

struct TrainResult {
    ModelParams params;
    int64_t steps_taken = 0;               // epochs * ceil(|data| / batch_size)
    std::vector<double> epoch_mean_loss;   // softmax cross-entropy, one per epoch
};

// Plain SGD over softmax cross-entropy. Per epoch the data order is a
// permutation drawn from stream(step_seed, "epoch", epoch); batches are
// consecutive chunks; gradients accumulate in ascending in-batch order. Only
// the mode's trainable blocks change. Bit-reproducible given identical inputs.
TrainResult train_steps(ModelParams params, std::span<const TrainItem> data,
                        const TrainConfig& cfg, uint64_t step_seed);

// Softmax probabilities for one input; components in [0,1], sum within 1e-6 of 1.
std::vector<float> predict_proba(const ModelParams& params, const FeatureVector& x);

// argmax of predict_proba; ties broken by lowest class index.
int predict_label(const ModelParams& params, const FeatureVector& x);

// Trainable blocks flattened in the declared checkpoint order:
//   Full:    [w1, b1, head_w, head_b]
//   FcOnly:  [head_w, head_b]
//   Adapter: [a_down, a_down_b, a_up, a_up_b, head_w, head_b]
std::vector<float> trainable_payload(const ModelParams& params);
void apply_trainable_payload(ModelParams& params, std::span<const float> payload);

}  // namespace sisa
