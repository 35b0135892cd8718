#include "sisa/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>

#include "sisa/errors.hpp"
#include "sisa/rng.hpp"

namespace sisa {

namespace {

using Clock = std::chrono::steady_clock;

int64_t elapsed_ms(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

std::vector<TrainItem> slice_items(const PartitionPlan& plan, const FeaturizedDataset& data,
                                   int shard, int first_slice, int last_slice) {
    std::vector<TrainItem> items;
    for (int r = first_slice; r <= last_slice; ++r) {
        for (uint64_t id : plan.slices[shard][r]) {
            const size_t idx = data.index_of(id);
            items.push_back(TrainItem{&data.features[idx], data.labels[idx]});
        }
    }
    return items;
}

std::vector<uint64_t> ids_through_slice(const PartitionPlan& plan, int shard, int last_slice) {
    std::vector<uint64_t> ids;
    for (int r = 0; r <= last_slice; ++r) {
        const auto& slice = plan.slices[shard][r];
        ids.insert(ids.end(), slice.begin(), slice.end());
    }
    return ids;
}

// Slice steps first..R-1 of one shard, starting from `params`. Shared by
// initial training (first = 0) and unlearning rollback (first = r*).
ShardTrainResult run_slice_steps(ModelParams params, int shard, int first_slice,
                                 const PartitionPlan& plan, const FeaturizedDataset& data,
                                 const EngineConfig& cfg, CheckpointStore& store,
                                 const std::string& event_name) {
    const auto start = Clock::now();
    ShardTrainResult result;
    int64_t steps = 0;
    int64_t distinct = 0;
    for (int r = first_slice; r < plan.num_slices; ++r) {
        const int data_from = cfg.slice_mode == SliceMode::Cumulative ? 0 : r;
        const std::vector<TrainItem> items = slice_items(plan, data, shard, data_from, r);
        distinct += static_cast<int64_t>(plan.slices[shard][r].size());
        if (items.empty()) {
            // Deletions can empty a slice; keep the checkpoint keyspace stable
            // by carrying the prior state forward.
            result.ledger.add(LedgerEvent{"skip_empty_slice", shard, r, r, 0, 0, 0});
        } else {
            const uint64_t step_seed = derive_stream(
                cfg.train.global_seed, "slice",
                {static_cast<uint64_t>(shard), static_cast<uint64_t>(r)});
            TrainResult tr = train_steps(std::move(params), items, cfg.train, step_seed);
            params = std::move(tr.params);
            steps += tr.steps_taken;
            result.ledger.gradient_steps += tr.steps_taken;
            result.ledger.examples_processed +=
                static_cast<int64_t>(items.size()) * cfg.train.epochs;
        }
        Checkpoint cp;
        cp.shard = shard;
        cp.slice = r;
        cp.mode = cfg.mode;
        cp.payload = trainable_payload(params);
        cp.trained_id_digest = digest_sorted_ids(ids_through_slice(plan, shard, r));
        store.put(cp);
    }
    const int64_t wall = elapsed_ms(start);
    result.ledger.wall_clock_ms += wall;
    result.ledger.add(LedgerEvent{event_name, shard, first_slice, plan.num_slices - 1, steps,
                                  distinct, wall});
    result.params = std::move(params);
    return result;
}

void check_plan_covers(const PartitionPlan& plan, const FeaturizedDataset& data) {
    for (const auto& shard : plan.slices) {
        for (const auto& slice : shard) {
            for (uint64_t id : slice) {
                data.index_of(id);  // throws NotFoundError on a gap
            }
        }
    }
}

ModelDims resolve_dims(const EngineConfig& cfg, const FeaturizedDataset& data) {
    ModelDims dims = cfg.dims;
    if (dims.num_classes == 0) {
        dims.num_classes = data.schema.num_classes;
    }
    return dims;
}

}  // namespace

void CostLedger::add(LedgerEvent ev) { events.push_back(std::move(ev)); }

void CostLedger::merge(CostLedger other) {
    gradient_steps += other.gradient_steps;
    examples_processed += other.examples_processed;
    wall_clock_ms += other.wall_clock_ms;
    events.insert(events.end(), std::make_move_iterator(other.events.begin()),
                  std::make_move_iterator(other.events.end()));
}

void write_ledger_csv(const CostLedger& ledger, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write ledger file: " + path.string());
    }
    out << "event,shard,slice_from,slice_to,gradient_steps,examples,wall_ms\n";
    for (const LedgerEvent& ev : ledger.events) {
        out << ev.event << ',' << ev.shard << ',' << ev.slice_from << ',' << ev.slice_to << ','
            << ev.gradient_steps << ',' << ev.examples << ',' << ev.wall_ms << '\n';
    }
}

void append_ledger_csv(const CostLedger& ledger, const std::filesystem::path& path) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) {
        throw DataError("cannot write ledger file: " + path.string());
    }
    if (fresh) {
        out << "event,shard,slice_from,slice_to,gradient_steps,examples,wall_ms\n";
    }
    for (const LedgerEvent& ev : ledger.events) {
        out << ev.event << ',' << ev.shard << ',' << ev.slice_from << ',' << ev.slice_to << ','
            << ev.gradient_steps << ',' << ev.examples << ',' << ev.wall_ms << '\n';
    }
}

ShardTrainResult train_shard(int shard_id, const PartitionPlan& plan,
                             const FeaturizedDataset& data, const EngineConfig& cfg,
                             CheckpointStore& store) {
    if (shard_id < 0 || shard_id >= plan.num_shards) {
        throw UsageError("shard " + std::to_string(shard_id) + " outside plan with " +
                         std::to_string(plan.num_shards) + " shards");
    }
    EngineConfig shard_cfg = cfg;
    shard_cfg.dims = resolve_dims(cfg, data);
    ModelParams params =
        init_params(shard_cfg.dims, cfg.mode, cfg.train.global_seed, shard_id);
    return run_slice_steps(std::move(params), shard_id, 0, plan, data, shard_cfg, store,
                           "train");
}

TrainAllResult train_all(const PartitionPlan& plan, const FeaturizedDataset& data,
                         const EngineConfig& cfg, CheckpointStore& store) {
    check_plan_covers(plan, data);
    EngineConfig run_cfg = cfg;
    run_cfg.dims = resolve_dims(cfg, data);
    validate_mode(run_cfg.dims, run_cfg.mode);

    const int num_shards = plan.num_shards;
    std::vector<ShardTrainResult> results(static_cast<size_t>(num_shards));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(num_shards));

    const int threads =
        std::min(num_shards, cfg.workers > 0 ? cfg.workers : omp_get_max_threads());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int s = 0; s < num_shards; ++s) {
        try {
            results[s] = train_shard(s, plan, data, run_cfg, store);
        } catch (...) {
            errors[s] = std::current_exception();
        }
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }

    TrainAllResult out;
    out.ensemble.rule = VoteRule::HardMajority;
    for (int s = 0; s < num_shards; ++s) {
        out.ensemble.models.push_back(std::move(results[s].params));
        out.ledger.merge(std::move(results[s].ledger));
    }
    return out;
}

Prediction predict(const Ensemble& ensemble, const FeatureVector& x) {
    if (ensemble.models.empty()) {
        throw StateError("ensemble has no models");
    }
    const int num_classes = ensemble.models.front().dims.num_classes;
    Prediction pred;

    if (ensemble.rule == VoteRule::SoftMean) {
        std::vector<double> sum(static_cast<size_t>(num_classes), 0.0);
        for (const ModelParams& model : ensemble.models) {
            const std::vector<float> probs = predict_proba(model, x);
            for (int i = 0; i < num_classes; ++i) {
                sum[i] += probs[i];
            }
        }
        pred.mean_proba.resize(static_cast<size_t>(num_classes));
        for (int i = 0; i < num_classes; ++i) {
            pred.mean_proba[i] =
                static_cast<float>(sum[i] / static_cast<double>(ensemble.models.size()));
        }
        pred.label = 0;
        for (int i = 1; i < num_classes; ++i) {
            if (pred.mean_proba[i] > pred.mean_proba[pred.label]) {
                pred.label = i;
            }
        }
        return pred;
    }

    std::vector<int> counts(static_cast<size_t>(num_classes), 0);
    for (const ModelParams& model : ensemble.models) {
        const int vote = predict_label(model, x);
        pred.votes.push_back(vote);
        ++counts[vote];
    }
    pred.label = 0;
    for (int i = 1; i < num_classes; ++i) {
        if (counts[i] > counts[pred.label]) {
            pred.label = i;  // ties keep the lowest class index
        }
    }
    return pred;
}

UnlearnResult unlearn(const Ensemble& ensemble, CheckpointStore& store,
                      const PartitionPlan& plan, const FeaturizedDataset& data,
                      const RequestStream& requests, const EngineConfig& cfg) {
    if (static_cast<int>(ensemble.models.size()) != plan.num_shards) {
        throw StateError("ensemble size does not match plan shard count");
    }
    EngineConfig run_cfg = cfg;
    run_cfg.dims = resolve_dims(cfg, data);

    // remove() validates the whole request set before touching anything.
    RemoveResult removed = remove(plan, requests.ids);

    UnlearnResult out;
    out.ensemble = ensemble;
    out.plan = std::move(removed.plan);

    std::vector<std::pair<int, int>> work(removed.affected.begin(), removed.affected.end());
    std::vector<ShardTrainResult> results(work.size());
    std::vector<std::exception_ptr> errors(work.size());

    const int threads = std::min(static_cast<int>(work.size()),
                                 cfg.workers > 0 ? cfg.workers : omp_get_max_threads());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(threads, 1))
    for (size_t w = 0; w < work.size(); ++w) {
        const auto [shard, first_affected] = work[w];
        try {
            // Restore the last state not influenced by any removed id, then
            // retrain forward with the original seed streams.
            ModelParams params =
                init_params(run_cfg.dims, run_cfg.mode, run_cfg.train.global_seed, shard);
            if (first_affected > 0) {
                const Checkpoint cp = store.get(shard, first_affected - 1);
                if (cp.mode != run_cfg.mode) {
                    throw StoreError("checkpoint mode mismatch for shard " +
                                     std::to_string(shard));
                }
                apply_trainable_payload(params, cp.payload);
            }
            results[w] = run_slice_steps(std::move(params), shard, first_affected, out.plan,
                                         data, run_cfg, store, "unlearn");
        } catch (...) {
            errors[w] = std::current_exception();
        }
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }

    for (size_t w = 0; w < work.size(); ++w) {
        out.ensemble.models[static_cast<size_t>(work[w].first)] = std::move(results[w].params);
        out.ledger.merge(std::move(results[w].ledger));
    }
    return out;
}

BaselineResult baseline_train(const FeaturizedDataset& data, const EngineConfig& cfg) {
    if (data.size() == 0) {
        throw DataError("baseline_train needs a nonempty dataset");
    }
    EngineConfig run_cfg = cfg;
    run_cfg.dims = resolve_dims(cfg, data);
    validate_mode(run_cfg.dims, run_cfg.mode);

    const auto start = Clock::now();
    std::vector<TrainItem> items;
    items.reserve(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        items.push_back(TrainItem{&data.features[i], data.labels[i]});
    }
    ModelParams params = init_params(run_cfg.dims, run_cfg.mode, run_cfg.train.global_seed, 0);
    TrainResult tr = train_steps(std::move(params), items, run_cfg.train,
                                 derive_stream(run_cfg.train.global_seed, "slice", {0, 0}));

    BaselineResult out;
    out.params = std::move(tr.params);
    out.ledger.gradient_steps = tr.steps_taken;
    out.ledger.examples_processed = static_cast<int64_t>(items.size()) * run_cfg.train.epochs;
    out.ledger.wall_clock_ms = elapsed_ms(start);
    out.ledger.add(LedgerEvent{"baseline_train", 0, 0, 0, tr.steps_taken,
                               static_cast<int64_t>(items.size()), out.ledger.wall_clock_ms});
    return out;
}

BaselineResult baseline_unlearn(const FeaturizedDataset& data,
                                const std::vector<uint64_t>& request_ids,
                                const EngineConfig& cfg) {
    if (request_ids.empty()) {
        throw DataError("nothing to unlearn: empty request set");
    }
    std::vector<uint64_t> missing;
    for (uint64_t id : request_ids) {
        if (!data.by_id.contains(id)) {
            missing.push_back(id);
        }
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        std::string msg = "ids not in dataset:";
        for (uint64_t id : missing) {
            msg += ' ' + std::to_string(id);
        }
        throw NotFoundError(msg);
    }

    EngineConfig run_cfg = cfg;
    run_cfg.dims = resolve_dims(cfg, data);
    const auto start = Clock::now();

    std::vector<bool> drop(data.size(), false);
    for (uint64_t id : request_ids) {
        drop[data.index_of(id)] = true;
    }
    std::vector<TrainItem> items;
    items.reserve(data.size() - request_ids.size());
    for (size_t i = 0; i < data.size(); ++i) {
        if (!drop[i]) {
            items.push_back(TrainItem{&data.features[i], data.labels[i]});
        }
    }
    if (items.empty()) {
        throw DataError("deletion would empty the dataset");
    }

    ModelParams params = init_params(run_cfg.dims, run_cfg.mode, run_cfg.train.global_seed, 0);
    TrainResult tr = train_steps(std::move(params), items, run_cfg.train,
                                 derive_stream(run_cfg.train.global_seed, "slice", {0, 0}));

    BaselineResult out;
    out.params = std::move(tr.params);
    out.ledger.gradient_steps = tr.steps_taken;
    out.ledger.examples_processed = static_cast<int64_t>(items.size()) * run_cfg.train.epochs;
    out.ledger.wall_clock_ms = elapsed_ms(start);
    out.ledger.add(LedgerEvent{"baseline_unlearn", 0, 0, 0, tr.steps_taken,
                               static_cast<int64_t>(items.size()), out.ledger.wall_clock_ms});
    return out;
}

}  // namespace sisa
