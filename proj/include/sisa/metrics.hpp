#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sisa/engine.hpp"

namespace sisa {

struct EvalReport {
    int64_t n_test = 0;
    int64_t correct = 0;
    double accuracy = 0.0;  // exactly correct / n_test
    std::vector<int64_t> per_class_total;
    std::vector<int64_t> per_class_correct;
    // Config echo, written into eval.csv as metric rows.
    std::map<std::string, std::string> config_echo;
};

EvalReport evaluate(const Ensemble& ensemble, const FeaturizedDataset& test);
EvalReport evaluate(const ModelParams& model, const FeaturizedDataset& test);

// `metric,value` rows: accuracy, counts, per-class counts, then the echo.
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

struct ExperimentGrid {
    std::vector<int> slice_counts;                    // R values; S stays fixed
    std::vector<size_t> request_counts;
    std::vector<RequestDistribution> distributions;
    std::vector<uint64_t> seeds;
};

struct ExperimentConfig {
    std::string dataset_name = "synth";
    EngineConfig engine;
    int num_shards = 5;
    int num_slices = 16;  // used where the grid does not supply R
    int32_t hash_dim = 4096;
    int token_cap = 256;
    double data_fraction = 1.0;  // leading fraction of the train split
    PartitionStrategy::Kind plan_strategy = PartitionStrategy::Kind::UniformRandom;
};

// Full grid pipeline: per cell train, stream the requests one at a time,
// unlearn, evaluate. Emits accuracy.csv, retrain.csv, memory.csv and
// baseline.csv (monolithic reference per seed) under out_dir; checkpoints go
// to out_dir/runs. Outputs are byte-identical given config and seeds, apart
// from the advisory wall_ms column.
void run_experiment(const ExperimentGrid& grid, const Dataset& train, const Dataset& test,
                    const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct DistributionCostRow {
    std::string plan;
    std::string distribution;
    std::vector<int64_t> per_seed_total_steps;
    std::vector<std::vector<int64_t>> per_seed_increments;  // steps per request
    double mean_steps = 0.0;
    double stddev = 0.0;
    double ci95_half = 0.0;  // normal approximation
};

// Cost of n_requests sequential unlearning requests under each pairing of
// plan strategy and request distribution: uniform plan x {uniform, pareto,
// inverse_pareto} plus risk-profiled plan x inverse_pareto. Writes a summary
// CSV when out_csv is nonempty and returns the per-seed data.
std::vector<DistributionCostRow> compare_distributions(
    const Dataset& train, const ExperimentConfig& cfg, size_t n_requests,
    const std::vector<uint64_t>& seeds, const std::filesystem::path& out_csv,
    const std::filesystem::path& scratch_dir);

}  // namespace sisa
