#include "sisa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "sisa/errors.hpp"

namespace sisa {

namespace {

std::string format_accuracy(int64_t correct, int64_t total) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f",
                  static_cast<double>(correct) / static_cast<double>(total));
    return buf;
}

template <typename PredictLabel>
EvalReport evaluate_with(PredictLabel&& predict_label_fn, int num_classes,
                         const FeaturizedDataset& test) {
    if (test.size() == 0) {
        throw DataError("cannot evaluate on an empty test set");
    }
    EvalReport report;
    report.n_test = static_cast<int64_t>(test.size());
    report.per_class_total.assign(static_cast<size_t>(num_classes), 0);
    report.per_class_correct.assign(static_cast<size_t>(num_classes), 0);
    for (size_t i = 0; i < test.size(); ++i) {
        const int truth = test.labels[i];
        ++report.per_class_total[truth];
        if (predict_label_fn(test.features[i]) == truth) {
            ++report.correct;
            ++report.per_class_correct[truth];
        }
    }
    report.accuracy =
        static_cast<double>(report.correct) / static_cast<double>(report.n_test);
    return report;
}

}  // namespace

EvalReport evaluate(const Ensemble& ensemble, const FeaturizedDataset& test) {
    if (ensemble.models.empty()) {
        throw StateError("ensemble has no models");
    }
    return evaluate_with(
        [&](const FeatureVector& x) { return predict(ensemble, x).label; },
        ensemble.models.front().dims.num_classes, test);
}

EvalReport evaluate(const ModelParams& model, const FeaturizedDataset& test) {
    return evaluate_with([&](const FeatureVector& x) { return predict_label(model, x); },
                         model.dims.num_classes, test);
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write eval report: " + path.string());
    }
    out << "metric,value\n";
    out << "accuracy," << format_accuracy(report.correct, report.n_test) << '\n';
    out << "n_test," << report.n_test << '\n';
    out << "correct," << report.correct << '\n';
    for (size_t c = 0; c < report.per_class_total.size(); ++c) {
        out << "class_" << c << "_total," << report.per_class_total[c] << '\n';
        out << "class_" << c << "_correct," << report.per_class_correct[c] << '\n';
    }
    for (const auto& [key, value] : report.config_echo) {
        out << key << ',' << value << '\n';
    }
}

namespace {

Dataset leading_fraction(const Dataset& ds, double fraction) {
    if (fraction >= 1.0) {
        return ds;
    }
    Dataset out;
    out.schema = ds.schema;
    const size_t keep = static_cast<size_t>(
        std::floor(fraction * static_cast<double>(ds.examples.size())));
    out.examples.assign(ds.examples.begin(),
                        ds.examples.begin() + static_cast<ptrdiff_t>(keep));
    return out;
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << header << '\n';
    return out;
}

}  // namespace

void run_experiment(const ExperimentGrid& grid, const Dataset& train, const Dataset& test,
                    const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    if (grid.slice_counts.empty() || grid.request_counts.empty() ||
        grid.distributions.empty() || grid.seeds.empty()) {
        throw UsageError("experiment grid axes must all be nonempty");
    }
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path runs_dir = out_dir / "runs";
    std::filesystem::create_directories(runs_dir);

    const Dataset train_part = leading_fraction(train, cfg.data_fraction);
    const FeaturizedDataset ftrain = featurize_dataset(train_part, cfg.hash_dim, cfg.token_cap);
    const FeaturizedDataset ftest = featurize_dataset(test, cfg.hash_dim, cfg.token_cap);

    auto accuracy_csv =
        open_csv(out_dir / "accuracy.csv", "dataset,mode,R,distribution,seed,request_index,accuracy");
    auto retrain_csv = open_csv(
        out_dir / "retrain.csv",
        "dataset,mode,R,distribution,seed,request_index,cumulative_steps,incremental_steps,wall_ms");
    auto memory_csv = open_csv(out_dir / "memory.csv", "mode,R,total_bytes");
    auto baseline_csv = open_csv(out_dir / "baseline.csv",
                                 "dataset,mode,data_fraction,seed,accuracy,gradient_steps");

    const std::string mode_name = cfg.engine.mode.name();

    // Monolithic reference, once per seed.
    for (uint64_t seed : grid.seeds) {
        EngineConfig engine = cfg.engine;
        engine.train.global_seed = seed;
        const BaselineResult base = baseline_train(ftrain, engine);
        const EvalReport report = evaluate(base.params, ftest);
        char frac[32];
        std::snprintf(frac, sizeof(frac), "%.4f", cfg.data_fraction);
        baseline_csv << cfg.dataset_name << ',' << mode_name << ',' << frac << ',' << seed << ','
                     << format_accuracy(report.correct, report.n_test) << ','
                     << base.ledger.gradient_steps << '\n';
    }

    std::set<std::pair<std::string, int>> memory_written;
    for (int slices : grid.slice_counts) {
        for (const RequestDistribution& dist : grid.distributions) {
            for (size_t n_requests : grid.request_counts) {
                for (uint64_t seed : grid.seeds) {
                    EngineConfig engine = cfg.engine;
                    engine.train.global_seed = seed;

                    PartitionStrategy strategy;
                    strategy.kind = cfg.plan_strategy;
                    PartitionPlan plan =
                        make_plan(ftrain.ids, cfg.num_shards, slices, strategy, seed);

                    const std::string cell = "R" + std::to_string(slices) + "_" + dist.name() +
                                             "_s" + std::to_string(seed) + "_n" +
                                             std::to_string(n_requests);
                    CheckpointStore store(runs_dir / cell);
                    TrainAllResult trained = train_all(plan, ftrain, engine, store);

                    if (memory_written.emplace(mode_name, slices).second) {
                        memory_csv << mode_name << ',' << slices << ',' << store.total_bytes()
                                   << '\n';
                    }

                    EvalReport report = evaluate(trained.ensemble, ftest);
                    accuracy_csv << cfg.dataset_name << ',' << mode_name << ',' << slices << ','
                                 << dist.name() << ',' << seed << ",0,"
                                 << format_accuracy(report.correct, report.n_test) << '\n';

                    const RequestStream stream = sample_requests(plan, dist, n_requests, seed);
                    Ensemble ensemble = std::move(trained.ensemble);
                    int64_t cumulative = 0;
                    for (size_t k = 0; k < stream.ids.size(); ++k) {
                        RequestStream one;
                        one.dist = dist;
                        one.seed = seed;
                        one.ids = {stream.ids[k]};
                        UnlearnResult res = unlearn(ensemble, store, plan, ftrain, one, engine);
                        ensemble = std::move(res.ensemble);
                        plan = std::move(res.plan);
                        cumulative += res.ledger.gradient_steps;

                        report = evaluate(ensemble, ftest);
                        accuracy_csv << cfg.dataset_name << ',' << mode_name << ',' << slices
                                     << ',' << dist.name() << ',' << seed << ',' << (k + 1)
                                     << ',' << format_accuracy(report.correct, report.n_test)
                                     << '\n';
                        retrain_csv << cfg.dataset_name << ',' << mode_name << ',' << slices
                                    << ',' << dist.name() << ',' << seed << ',' << (k + 1) << ','
                                    << cumulative << ',' << res.ledger.gradient_steps << ','
                                    << res.ledger.wall_clock_ms << '\n';
                    }
                }
            }
        }
    }
}

namespace {

void copy_store_dir(const std::filesystem::path& from, const std::filesystem::path& to) {
    std::filesystem::create_directories(to);
    for (const auto& entry : std::filesystem::directory_iterator(from)) {
        if (entry.is_regular_file()) {
            std::filesystem::copy_file(entry.path(), to / entry.path().filename(),
                                       std::filesystem::copy_options::overwrite_existing);
        }
    }
}

}  // namespace

std::vector<DistributionCostRow> compare_distributions(
    const Dataset& train, const ExperimentConfig& cfg, size_t n_requests,
    const std::vector<uint64_t>& seeds, const std::filesystem::path& out_csv,
    const std::filesystem::path& scratch_dir) {
    if (seeds.size() < 2) {
        throw UsageError("compare_distributions needs at least 2 seeds");
    }
    std::filesystem::create_directories(scratch_dir);
    const FeaturizedDataset ftrain =
        featurize_dataset(leading_fraction(train, cfg.data_fraction), cfg.hash_dim,
                          cfg.token_cap);

    struct Pairing {
        PartitionStrategy::Kind plan;
        RequestDistribution dist;
    };
    const std::vector<Pairing> pairings = {
        {PartitionStrategy::Kind::UniformRandom, RequestDistribution::uniform()},
        {PartitionStrategy::Kind::UniformRandom, RequestDistribution::pareto()},
        {PartitionStrategy::Kind::UniformRandom, RequestDistribution::inverse_pareto()},
        {PartitionStrategy::Kind::RiskProfiled, RequestDistribution::inverse_pareto()},
    };

    std::vector<DistributionCostRow> rows(pairings.size());
    for (size_t i = 0; i < pairings.size(); ++i) {
        rows[i].plan = PartitionStrategy{pairings[i].plan, {}}.name();
        rows[i].distribution = pairings[i].dist.name();
    }

    for (uint64_t seed : seeds) {
        EngineConfig engine = cfg.engine;
        engine.train.global_seed = seed;

        // One training per plan strategy per seed; each distribution's
        // unlearning run starts from a copy of the trained store.
        for (PartitionStrategy::Kind plan_kind :
             {PartitionStrategy::Kind::UniformRandom, PartitionStrategy::Kind::RiskProfiled}) {
            PartitionStrategy strategy;
            strategy.kind = plan_kind;
            if (plan_kind == PartitionStrategy::Kind::RiskProfiled) {
                for (uint64_t id : ftrain.ids) {
                    strategy.risk_scores[id] = static_cast<double>(id);
                }
            }
            const PartitionPlan base_plan =
                make_plan(ftrain.ids, cfg.num_shards, cfg.num_slices, strategy, seed);
            const std::string base_name =
                "seed" + std::to_string(seed) + "_" + strategy.name();
            CheckpointStore base_store(scratch_dir / base_name);
            const TrainAllResult trained = train_all(base_plan, ftrain, engine, base_store);

            for (size_t pi = 0; pi < pairings.size(); ++pi) {
                if (pairings[pi].plan != plan_kind) continue;
                const std::filesystem::path run_dir =
                    scratch_dir / (base_name + "_" + pairings[pi].dist.name());
                copy_store_dir(base_store.root(), run_dir);
                CheckpointStore store(run_dir);

                Ensemble ensemble = trained.ensemble;
                PartitionPlan plan = base_plan;
                const RequestStream stream =
                    sample_requests(plan, pairings[pi].dist, n_requests, seed);

                std::vector<int64_t> increments;
                int64_t total = 0;
                for (uint64_t id : stream.ids) {
                    RequestStream one;
                    one.dist = pairings[pi].dist;
                    one.seed = seed;
                    one.ids = {id};
                    UnlearnResult res = unlearn(ensemble, store, plan, ftrain, one, engine);
                    ensemble = std::move(res.ensemble);
                    plan = std::move(res.plan);
                    increments.push_back(res.ledger.gradient_steps);
                    total += res.ledger.gradient_steps;
                }
                rows[pi].per_seed_total_steps.push_back(total);
                rows[pi].per_seed_increments.push_back(std::move(increments));
            }
        }
    }

    for (DistributionCostRow& row : rows) {
        const double n = static_cast<double>(row.per_seed_total_steps.size());
        double sum = 0.0;
        for (int64_t v : row.per_seed_total_steps) sum += static_cast<double>(v);
        row.mean_steps = sum / n;
        double ss = 0.0;
        for (int64_t v : row.per_seed_total_steps) {
            const double d = static_cast<double>(v) - row.mean_steps;
            ss += d * d;
        }
        row.stddev = std::sqrt(ss / (n - 1.0));
        row.ci95_half = 1.96 * row.stddev / std::sqrt(n);
    }

    if (!out_csv.empty()) {
        auto out = open_csv(out_csv, "plan,distribution,seeds,mean_steps,stddev,ci95_half");
        for (const DistributionCostRow& row : rows) {
            char mean[32], sd[32], ci[32];
            std::snprintf(mean, sizeof(mean), "%.3f", row.mean_steps);
            std::snprintf(sd, sizeof(sd), "%.3f", row.stddev);
            std::snprintf(ci, sizeof(ci), "%.3f", row.ci95_half);
            out << row.plan << ',' << row.distribution << ','
                << row.per_seed_total_steps.size() << ',' << mean << ',' << sd << ',' << ci
                << '\n';
        }
    }
    return rows;
}

}  // namespace sisa
