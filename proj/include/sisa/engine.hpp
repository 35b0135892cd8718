#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sisa/data.hpp"
#include "sisa/learner.hpp"
#include "sisa/partition.hpp"
#include "sisa/requests.hpp"
#include "sisa/store.hpp"

namespace sisa {

// What slice step r trains on. PerSlice (default) fits each step on slice r
// alone; Cumulative trains step r on the union of slices 0..r.
enum class SliceMode { PerSlice, Cumulative };

enum class VoteRule { HardMajority, SoftMean };

struct EngineConfig {
    ModelDims dims;
    HeadMode mode;
    TrainConfig train;
    SliceMode slice_mode = SliceMode::PerSlice;
    int workers = 0;  // shard-level OpenMP workers; 0 = OpenMP default
};

struct LedgerEvent {
    std::string event;
    int shard = 0;
    int slice_from = 0;
    int slice_to = 0;
    int64_t gradient_steps = 0;
    int64_t examples = 0;  // distinct examples in the trained slice range
    int64_t wall_ms = 0;   // advisory only, never asserted
};

// Deterministic work accounting. gradient_steps and examples_processed are
// exact counts; wall_clock_ms is advisory.
struct CostLedger {
    int64_t gradient_steps = 0;
    int64_t examples_processed = 0;  // sum of batch sizes actually processed
    int64_t wall_clock_ms = 0;
    std::vector<LedgerEvent> events;

    void add(LedgerEvent ev);
    void merge(CostLedger other);
};

// ledger.csv: event,shard,slice_from,slice_to,gradient_steps,examples,wall_ms
void write_ledger_csv(const CostLedger& ledger, const std::filesystem::path& path);
void append_ledger_csv(const CostLedger& ledger, const std::filesystem::path& path);

// One final model per shard; labels aggregate by majority vote.
struct Ensemble {
    std::vector<ModelParams> models;
    VoteRule rule = VoteRule::HardMajority;
};

struct ShardTrainResult {
    ModelParams params;
    CostLedger ledger;
};

// Trains shard `shard_id` slice by slice, writing a checkpoint after each
// slice step. Empty slices (possible after deletions) are skipped with the
// prior state checkpointed unchanged.
ShardTrainResult train_shard(int shard_id, const PartitionPlan& plan,
                             const FeaturizedDataset& data, const EngineConfig& cfg,
                             CheckpointStore& store);

struct TrainAllResult {
    Ensemble ensemble;
    CostLedger ledger;
};

// Trains every shard (in parallel when workers allow); results are
// bit-identical for any worker count.
TrainAllResult train_all(const PartitionPlan& plan, const FeaturizedDataset& data,
                         const EngineConfig& cfg, CheckpointStore& store);

struct Prediction {
    int label = 0;
    std::vector<int> votes;             // per-shard label votes
    std::vector<float> mean_proba;      // SoftMean only
};

// HardMajority: one argmax vote per shard model, ensemble ties broken by
// lowest class index. SoftMean: argmax of the mean probability vector.
Prediction predict(const Ensemble& ensemble, const FeatureVector& x);

struct UnlearnResult {
    Ensemble ensemble;
    PartitionPlan plan;
    CostLedger ledger;
};

// Exact unlearning: removes the requested ids, restores each affected shard
// from the last checkpoint trained before the earliest affected slice (or
// from init when that is slice 0), and retrains forward reusing the original
// per-(shard, slice) seed streams. The ledger counts only retraining work.
UnlearnResult unlearn(const Ensemble& ensemble, CheckpointStore& store,
                      const PartitionPlan& plan, const FeaturizedDataset& data,
                      const RequestStream& requests, const EngineConfig& cfg);

struct BaselineResult {
    ModelParams params;
    CostLedger ledger;
};

// Monolithic model over the whole dataset (single shard, single slice
// semantics); equals train_all with S = R = 1 on a sequential plan.
BaselineResult baseline_train(const FeaturizedDataset& data, const EngineConfig& cfg);

// The deletion baseline: drop the ids and retrain from scratch.
BaselineResult baseline_unlearn(const FeaturizedDataset& data,
                                const std::vector<uint64_t>& request_ids,
                                const EngineConfig& cfg);

}  // namespace sisa
