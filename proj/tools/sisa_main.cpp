// sisa: SISA training, unlearning-request simulation, exact unlearning, and
// cost reporting over a reproducible run directory.

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "sisa/engine.hpp"
#include "sisa/errors.hpp"
#include "sisa/kernels.hpp"
#include "sisa/metrics.hpp"
#include "sisa/rng.hpp"

namespace fs = std::filesystem;
using namespace sisa;

namespace {

struct RunConfig {
    std::string run_dir;
    std::string config_file;     // handled before CLI11 parsing
    std::string task = "synth";  // synth | sst2 | qqp | mnli
    std::string tsv_path;
    uint64_t limit = 60000;

    // synth generation
    uint64_t synth_n = 10000;
    int num_classes = 2;
    int synth_vocab = 1000;
    int synth_tokens = 20;
    double separation = 1.0;

    double test_fraction = 0.2;
    int shards = 5;
    int slices = 16;
    std::string mode = "adapter";
    int bottleneck = 16;
    double learning_rate = 5e-3;
    int batch = 16;
    int epochs = 10;
    int hash_dim = 4096;
    int hidden = 256;
    int token_cap = 256;
    uint64_t seed = 42;
    std::string distribution = "uniform";
    double pareto_m = 1.0;
    double pareto_a = 1.16;
    double data_fraction = 1.0;
    std::string slice_mode = "per-slice";  // per-slice | cumulative
    std::string plan = "uniform";          // uniform | sequential | risk
    std::string risk_file;                 // id<TAB>score lines; default: score = id
    int workers = 0;
    std::string vote = "hard";  // hard | soft
    uint64_t num_requests = 16;
    bool serial_kernels = false;
};

std::map<std::string, std::string> parse_config_file(const fs::path& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file: " + path.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto from = s.find_first_not_of(" \t\r");
            const auto to = s.find_last_not_of(" \t\r");
            return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

void apply_config_map(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    auto get = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto set_str = [&](const char* key, std::string& out) {
        if (auto v = get(key)) out = *v;
    };
    auto set_int = [&](const char* key, auto& out) {
        if (auto v = get(key)) out = static_cast<std::decay_t<decltype(out)>>(std::stoll(*v));
    };
    auto set_real = [&](const char* key, double& out) {
        if (auto v = get(key)) out = std::stod(*v);
    };
    set_str("task", cfg.task);
    set_str("tsv_path", cfg.tsv_path);
    set_int("limit", cfg.limit);
    set_int("synth_n", cfg.synth_n);
    set_int("num_classes", cfg.num_classes);
    set_int("synth_vocab", cfg.synth_vocab);
    set_int("synth_tokens", cfg.synth_tokens);
    set_real("separation", cfg.separation);
    set_real("test_fraction", cfg.test_fraction);
    set_int("shards", cfg.shards);
    set_int("slices", cfg.slices);
    set_str("mode", cfg.mode);
    set_int("bottleneck", cfg.bottleneck);
    set_real("learning_rate", cfg.learning_rate);
    set_int("batch", cfg.batch);
    set_int("epochs", cfg.epochs);
    set_int("hash_dim", cfg.hash_dim);
    set_int("hidden", cfg.hidden);
    set_int("token_cap", cfg.token_cap);
    set_int("seed", cfg.seed);
    set_str("distribution", cfg.distribution);
    set_real("pareto_m", cfg.pareto_m);
    set_real("pareto_a", cfg.pareto_a);
    set_real("data_fraction", cfg.data_fraction);
    set_str("slice_mode", cfg.slice_mode);
    set_str("plan", cfg.plan);
    set_str("risk_file", cfg.risk_file);
    set_int("workers", cfg.workers);
    set_str("vote", cfg.vote);
    set_int("num_requests", cfg.num_requests);
}

std::map<std::string, std::string> config_as_map(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    auto fmt_real = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    kv["task"] = cfg.task;
    kv["tsv_path"] = cfg.tsv_path;
    kv["limit"] = std::to_string(cfg.limit);
    kv["synth_n"] = std::to_string(cfg.synth_n);
    kv["num_classes"] = std::to_string(cfg.num_classes);
    kv["synth_vocab"] = std::to_string(cfg.synth_vocab);
    kv["synth_tokens"] = std::to_string(cfg.synth_tokens);
    kv["separation"] = fmt_real(cfg.separation);
    kv["test_fraction"] = fmt_real(cfg.test_fraction);
    kv["shards"] = std::to_string(cfg.shards);
    kv["slices"] = std::to_string(cfg.slices);
    kv["mode"] = cfg.mode;
    kv["bottleneck"] = std::to_string(cfg.bottleneck);
    kv["learning_rate"] = fmt_real(cfg.learning_rate);
    kv["batch"] = std::to_string(cfg.batch);
    kv["epochs"] = std::to_string(cfg.epochs);
    kv["hash_dim"] = std::to_string(cfg.hash_dim);
    kv["hidden"] = std::to_string(cfg.hidden);
    kv["token_cap"] = std::to_string(cfg.token_cap);
    kv["seed"] = std::to_string(cfg.seed);
    kv["distribution"] = cfg.distribution;
    kv["pareto_m"] = fmt_real(cfg.pareto_m);
    kv["pareto_a"] = fmt_real(cfg.pareto_a);
    kv["data_fraction"] = fmt_real(cfg.data_fraction);
    kv["slice_mode"] = cfg.slice_mode;
    kv["plan"] = cfg.plan;
    kv["risk_file"] = cfg.risk_file;
    kv["workers"] = std::to_string(cfg.workers);
    kv["vote"] = cfg.vote;
    kv["num_requests"] = std::to_string(cfg.num_requests);
    return kv;
}

void print_effective_config(const RunConfig& cfg) {
    std::cout << "# effective config\n";
    for (const auto& [key, value] : config_as_map(cfg)) {
        std::cout << key << " = " << value << '\n';
    }
}

void write_run_config(const RunConfig& cfg) {
    std::ofstream out(fs::path(cfg.run_dir) / "config", std::ios::binary | std::ios::trunc);
    if (!out) {
        throw StateError("cannot write config in run directory " + cfg.run_dir);
    }
    for (const auto& [key, value] : config_as_map(cfg)) {
        out << key << " = " << value << '\n';
    }
}

// One command per run directory at a time.
class RunLock {
public:
    explicit RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
        fs::create_directories(run_dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            throw StateError("run directory is locked (remove " + path_.string() +
                             " if no other command is running)");
        }
    }
    ~RunLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

TaskSchema schema_from_config(const RunConfig& cfg) {
    TaskSchema schema = task_schema(cfg.task);
    if (cfg.task == "synth") {
        schema.num_classes = cfg.num_classes;
        schema.label_map.clear();
        for (int c = 0; c < cfg.num_classes; ++c) {
            schema.label_map[std::to_string(c)] = c;
        }
    }
    return schema;
}

HeadMode mode_from_config(const RunConfig& cfg) {
    return parse_head_mode(cfg.mode, cfg.bottleneck);
}

EngineConfig engine_from_config(const RunConfig& cfg, int num_classes) {
    EngineConfig engine;
    engine.dims = ModelDims{cfg.hash_dim, cfg.hidden, num_classes};
    engine.mode = mode_from_config(cfg);
    engine.train.learning_rate = static_cast<float>(cfg.learning_rate);
    engine.train.batch_size = cfg.batch;
    engine.train.epochs = cfg.epochs;
    engine.train.global_seed = cfg.seed;
    if (cfg.slice_mode == "per-slice") {
        engine.slice_mode = SliceMode::PerSlice;
    } else if (cfg.slice_mode == "cumulative") {
        engine.slice_mode = SliceMode::Cumulative;
    } else {
        throw UsageError("slice_mode must be per-slice or cumulative");
    }
    engine.workers = cfg.workers;
    return engine;
}

PartitionStrategy strategy_from_config(const RunConfig& cfg,
                                       const std::vector<uint64_t>& ids) {
    if (cfg.plan == "uniform") return PartitionStrategy::uniform_random();
    if (cfg.plan == "sequential") return PartitionStrategy::sequential();
    if (cfg.plan == "risk") {
        std::unordered_map<uint64_t, double> scores;
        if (!cfg.risk_file.empty()) {
            std::ifstream in(cfg.risk_file);
            if (!in) {
                throw DataError("cannot open risk file: " + cfg.risk_file);
            }
            uint64_t id;
            double score;
            while (in >> id >> score) {
                scores[id] = score;
            }
        } else {
            for (uint64_t id : ids) {
                scores[id] = static_cast<double>(id);
            }
        }
        return PartitionStrategy::risk_profiled(std::move(scores));
    }
    throw UsageError("plan must be uniform, sequential, or risk");
}

Dataset load_train(const RunConfig& cfg) {
    const fs::path path = fs::path(cfg.run_dir) / "train.tsv";
    if (!fs::exists(path)) {
        throw StateError("no train.tsv in " + cfg.run_dir + " -- run `sisa ingest` first");
    }
    Dataset ds = import_dataset(path, schema_from_config(cfg));
    if (cfg.data_fraction < 1.0) {
        const size_t keep = static_cast<size_t>(cfg.data_fraction *
                                                static_cast<double>(ds.examples.size()));
        ds.examples.resize(std::max<size_t>(keep, 1));
    }
    return ds;
}

Dataset load_test(const RunConfig& cfg) {
    const fs::path path = fs::path(cfg.run_dir) / "test.tsv";
    if (!fs::exists(path)) {
        throw StateError("no test.tsv in " + cfg.run_dir + " -- run `sisa ingest` first");
    }
    return import_dataset(path, schema_from_config(cfg));
}

Ensemble load_ensemble(const RunConfig& cfg, const EngineConfig& engine) {
    const fs::path models_dir = fs::path(cfg.run_dir) / "models";
    Ensemble ens;
    ens.rule = cfg.vote == "soft" ? VoteRule::SoftMean : VoteRule::HardMajority;
    for (int s = 0; s < cfg.shards; ++s) {
        const fs::path path = models_dir / ("shard" + std::to_string(s) + ".ckpt");
        if (!fs::exists(path)) {
            throw StateError("no models found in " + cfg.run_dir + " -- run `sisa train` first");
        }
        const Checkpoint cp = read_checkpoint_file(path);
        ModelParams params = init_params(engine.dims, engine.mode, engine.train.global_seed, s);
        apply_trainable_payload(params, cp.payload);
        ens.models.push_back(std::move(params));
    }
    return ens;
}

void save_ensemble(const RunConfig& cfg, const Ensemble& ens) {
    const fs::path models_dir = fs::path(cfg.run_dir) / "models";
    fs::create_directories(models_dir);
    for (size_t s = 0; s < ens.models.size(); ++s) {
        write_model_file(models_dir / ("shard" + std::to_string(s) + ".ckpt"),
                         static_cast<int>(s), ens.models[s]);
    }
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    if (out.empty()) {
        throw UsageError("empty list: '" + text + "'");
    }
    return out;
}

int cmd_ingest(const RunConfig& cfg) {
    RunLock lock(cfg.run_dir);
    Dataset ds;
    if (cfg.task == "synth") {
        ds = synth_generate(cfg.num_classes, cfg.synth_vocab, cfg.synth_tokens, cfg.synth_n,
                            cfg.separation, cfg.seed);
        std::cout << "generated " << ds.size() << " synthetic examples\n";
    } else {
        if (cfg.tsv_path.empty()) {
            throw UsageError("--tsv is required for task " + cfg.task);
        }
        const LoadResult res = load_glue_tsv(cfg.tsv_path, schema_from_config(cfg), cfg.limit);
        ds = std::move(res.dataset);
        std::cout << "loaded " << ds.size() << " examples (" << res.skipped_rows
                  << " rows skipped)\n";
    }
    auto [train, test] = split_train_test(ds, cfg.test_fraction, cfg.seed);
    export_dataset(train, fs::path(cfg.run_dir) / "train.tsv");
    export_dataset(test, fs::path(cfg.run_dir) / "test.tsv");
    write_run_config(cfg);
    std::cout << "train: " << train.size() << "  test: " << test.size() << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    RunLock lock(cfg.run_dir);
    const Dataset train = load_train(cfg);
    const FeaturizedDataset fd = featurize_dataset(train, cfg.hash_dim, cfg.token_cap);
    const EngineConfig engine = engine_from_config(cfg, train.schema.num_classes);

    const PartitionStrategy strategy = strategy_from_config(cfg, fd.ids);
    const PartitionPlan plan = make_plan(fd.ids, cfg.shards, cfg.slices, strategy, cfg.seed);

    CheckpointStore store(fs::path(cfg.run_dir) / "checkpoints");
    const TrainAllResult result = train_all(plan, fd, engine, store);

    export_plan(plan, fs::path(cfg.run_dir) / "plan.tsv");
    save_ensemble(cfg, result.ensemble);
    write_ledger_csv(result.ledger, fs::path(cfg.run_dir) / "ledger.csv");
    write_run_config(cfg);
    std::cout << "trained " << cfg.shards << " shards x " << cfg.slices << " slices: "
              << result.ledger.gradient_steps << " gradient steps, "
              << store.total_bytes() << " checkpoint bytes, " << result.ledger.wall_clock_ms
              << " ms\n";
    return 0;
}

int cmd_request(const RunConfig& cfg, const std::string& out_file) {
    RunLock lock(cfg.run_dir);
    const fs::path plan_path = fs::path(cfg.run_dir) / "plan.tsv";
    if (!fs::exists(plan_path)) {
        throw StateError("no plan.tsv in " + cfg.run_dir + " -- run `sisa train` first");
    }
    const PartitionPlan plan = import_plan(plan_path);
    const RequestDistribution dist =
        parse_distribution(cfg.distribution, cfg.pareto_m, cfg.pareto_a);
    const RequestStream stream = sample_requests(plan, dist, cfg.num_requests, cfg.seed);
    const fs::path out =
        out_file.empty() ? fs::path(cfg.run_dir) / "requests.txt" : fs::path(out_file);
    export_requests(stream, out);
    std::cout << "sampled " << stream.ids.size() << ' ' << dist.name() << " requests into "
              << out.string() << '\n';
    return 0;
}

int cmd_unlearn(const RunConfig& cfg, const std::string& requests_file) {
    RunLock lock(cfg.run_dir);
    const fs::path plan_path = fs::path(cfg.run_dir) / "plan.tsv";
    if (!fs::exists(plan_path)) {
        throw StateError("no plan.tsv in " + cfg.run_dir + " -- run `sisa train` first");
    }
    const fs::path req_path = requests_file.empty() ? fs::path(cfg.run_dir) / "requests.txt"
                                                    : fs::path(requests_file);
    if (!fs::exists(req_path)) {
        throw StateError("no request stream at " + req_path.string() +
                         " -- run `sisa request` first");
    }

    const Dataset train = load_train(cfg);
    const FeaturizedDataset fd = featurize_dataset(train, cfg.hash_dim, cfg.token_cap);
    const EngineConfig engine = engine_from_config(cfg, train.schema.num_classes);

    PartitionPlan plan = import_plan(plan_path);
    Ensemble ensemble = load_ensemble(cfg, engine);
    const RequestStream stream = import_requests(req_path);
    CheckpointStore store(fs::path(cfg.run_dir) / "checkpoints");

    // One request at a time: the ledger gets one unlearn event per request.
    CostLedger total;
    for (uint64_t id : stream.ids) {
        RequestStream one;
        one.dist = stream.dist;
        one.seed = stream.seed;
        one.ids = {id};
        UnlearnResult res = unlearn(ensemble, store, plan, fd, one, engine);
        ensemble = std::move(res.ensemble);
        plan = std::move(res.plan);
        total.merge(std::move(res.ledger));
    }

    export_plan(plan, plan_path);
    save_ensemble(cfg, ensemble);
    append_ledger_csv(total, fs::path(cfg.run_dir) / "ledger.csv");
    {
        std::ofstream deleted(fs::path(cfg.run_dir) / "deleted.txt",
                              std::ios::binary | std::ios::app);
        for (uint64_t id : stream.ids) {
            deleted << id << '\n';
        }
    }
    write_run_config(cfg);
    std::cout << "unlearned " << stream.ids.size() << " ids: " << total.gradient_steps
              << " retraining steps, " << total.wall_clock_ms << " ms\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    RunLock lock(cfg.run_dir);
    const Dataset test = load_test(cfg);
    const FeaturizedDataset fd = featurize_dataset(test, cfg.hash_dim, cfg.token_cap);
    const EngineConfig engine = engine_from_config(cfg, test.schema.num_classes);
    const Ensemble ensemble = load_ensemble(cfg, engine);

    EvalReport report = evaluate(ensemble, fd);
    report.config_echo["config_shards"] = std::to_string(cfg.shards);
    report.config_echo["config_slices"] = std::to_string(cfg.slices);
    report.config_echo["config_mode"] = cfg.mode;
    report.config_echo["config_distribution"] = cfg.distribution;
    report.config_echo["config_seed"] = std::to_string(cfg.seed);
    write_eval_csv(report, fs::path(cfg.run_dir) / "eval.csv");
    std::cout << "accuracy " << report.accuracy << " (" << report.correct << '/'
              << report.n_test << ")\n";
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& slices_list,
                 const std::string& dists_list, const std::string& seeds_list) {
    RunLock lock(cfg.run_dir);
    const Dataset train = load_train(cfg);
    const Dataset test = load_test(cfg);

    ExperimentGrid grid;
    grid.slice_counts = parse_int_list(slices_list.empty() ? std::to_string(cfg.slices)
                                                           : slices_list);
    grid.request_counts = {cfg.num_requests};
    std::stringstream ds(dists_list.empty() ? cfg.distribution : dists_list);
    std::string dist_name;
    while (std::getline(ds, dist_name, ',')) {
        if (!dist_name.empty()) {
            grid.distributions.push_back(
                parse_distribution(dist_name, cfg.pareto_m, cfg.pareto_a));
        }
    }
    if (seeds_list.empty()) {
        grid.seeds = {cfg.seed};
    } else {
        for (int s : parse_int_list(seeds_list)) {
            grid.seeds.push_back(static_cast<uint64_t>(s));
        }
    }

    ExperimentConfig exp;
    exp.dataset_name = cfg.task;
    exp.engine = engine_from_config(cfg, train.schema.num_classes);
    exp.num_shards = cfg.shards;
    exp.num_slices = cfg.slices;
    exp.hash_dim = cfg.hash_dim;
    exp.token_cap = cfg.token_cap;
    exp.data_fraction = cfg.data_fraction;

    const fs::path out_dir = fs::path(cfg.run_dir) / "reports";
    run_experiment(grid, train, test, exp, out_dir);
    write_run_config(cfg);
    std::cout << "reports written to " << out_dir.string() << '\n';
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    RunLock lock(cfg.run_dir);
    const fs::path run_dir(cfg.run_dir);
    const fs::path out_dir = run_dir / "reports";
    fs::create_directories(out_dir);

    // memory.csv from the live checkpoint store.
    if (fs::exists(run_dir / "checkpoints")) {
        CheckpointStore store(run_dir / "checkpoints");
        std::ofstream mem(out_dir / "memory.csv", std::ios::binary | std::ios::trunc);
        mem << "mode,R,total_bytes\n";
        for (const auto& [kind, entry] : store.storage_report()) {
            mem << HeadMode{kind, 0}.name() << ',' << cfg.slices << ',' << entry.total_bytes
                << '\n';
        }
    }

    // retrain.csv from the run ledger's unlearn events.
    if (fs::exists(run_dir / "ledger.csv")) {
        std::ifstream ledger(run_dir / "ledger.csv");
        std::ofstream retrain(out_dir / "retrain.csv", std::ios::binary | std::ios::trunc);
        retrain << "dataset,mode,R,distribution,request_index,cumulative_steps,"
                   "incremental_steps,wall_ms\n";
        std::string line;
        std::getline(ledger, line);  // header
        int64_t cumulative = 0;
        int request_index = 0;
        while (std::getline(ledger, line)) {
            std::stringstream ss(line);
            std::string event, shard, from, to, steps, examples, wall;
            std::getline(ss, event, ',');
            std::getline(ss, shard, ',');
            std::getline(ss, from, ',');
            std::getline(ss, to, ',');
            std::getline(ss, steps, ',');
            std::getline(ss, examples, ',');
            std::getline(ss, wall, ',');
            if (event != "unlearn") continue;
            cumulative += std::stoll(steps);
            ++request_index;
            retrain << cfg.task << ',' << cfg.mode << ',' << cfg.slices << ','
                    << cfg.distribution << ',' << request_index << ',' << cumulative << ','
                    << steps << ',' << wall << '\n';
        }
    }

    // accuracy.csv echoes the latest evaluation, when one exists.
    if (fs::exists(run_dir / "eval.csv")) {
        std::ifstream eval_in(run_dir / "eval.csv");
        std::ofstream acc(out_dir / "accuracy.csv", std::ios::binary | std::ios::trunc);
        acc << "dataset,mode,R,distribution,request_index,accuracy\n";
        std::string line;
        while (std::getline(eval_in, line)) {
            if (line.rfind("accuracy,", 0) == 0) {
                acc << cfg.task << ',' << cfg.mode << ',' << cfg.slices << ','
                    << cfg.distribution << ",0," << line.substr(9) << '\n';
            }
        }
    }
    std::cout << "aggregated reports in " << out_dir.string() << '\n';
    return 0;
}

void add_common_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--run", cfg.run_dir, "run directory (the unit of state)")->required();
    sub->add_option("--config", cfg.config_file, "extra key = value config file (flags win)");
    sub->add_option("--task", cfg.task, "synth|sst2|qqp|mnli");
    sub->add_option("--tsv", cfg.tsv_path, "GLUE-style TSV input path");
    sub->add_option("--limit", cfg.limit, "max rows to ingest");
    sub->add_option("--synth-n", cfg.synth_n, "synthetic example count");
    sub->add_option("--classes", cfg.num_classes, "synthetic class count");
    sub->add_option("--vocab", cfg.synth_vocab, "synthetic vocabulary size");
    sub->add_option("--tokens-per-example", cfg.synth_tokens, "synthetic tokens per example");
    sub->add_option("--separation", cfg.separation, "class separation in [0,1]");
    sub->add_option("--test-fraction", cfg.test_fraction, "test split fraction");
    sub->add_option("--shards", cfg.shards, "number of shards S");
    sub->add_option("--slices", cfg.slices, "number of slices R per shard");
    sub->add_option("--mode", cfg.mode, "full|fc|adapter");
    sub->add_option("--bottleneck", cfg.bottleneck, "adapter bottleneck width");
    sub->add_option("--learning-rate", cfg.learning_rate, "SGD learning rate");
    sub->add_option("--batch", cfg.batch, "batch size");
    sub->add_option("--epochs", cfg.epochs, "epochs per slice step");
    sub->add_option("--hash-dim", cfg.hash_dim, "feature hash dimension (power of two)");
    sub->add_option("--hidden", cfg.hidden, "hidden width of the frozen backbone");
    sub->add_option("--token-cap", cfg.token_cap, "max tokens per text field");
    sub->add_option("--seed", cfg.seed, "run seed");
    sub->add_option("--distribution", cfg.distribution, "uniform|pareto|inverse_pareto");
    sub->add_option("--pareto-m", cfg.pareto_m, "pareto scale m");
    sub->add_option("--pareto-a", cfg.pareto_a, "pareto shape a");
    sub->add_option("--data-fraction", cfg.data_fraction, "leading fraction of train data");
    sub->add_option("--slice-mode", cfg.slice_mode, "per-slice|cumulative");
    sub->add_option("--plan", cfg.plan, "uniform|sequential|risk");
    sub->add_option("--risk-file", cfg.risk_file, "id<TAB>score file for risk placement");
    sub->add_option("--workers", cfg.workers, "shard training workers (0 = auto)");
    sub->add_option("--vote", cfg.vote, "hard|soft ensemble aggregation");
    sub->add_option("--requests", cfg.num_requests, "number of unlearning requests");
    sub->add_flag("--serial-kernels", cfg.serial_kernels,
                  "route linear algebra through the serial reference kernels");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sisa: exact machine unlearning via sharded, sliced training"};
    app.require_subcommand(1);

    RunConfig cfg;

    // Config sources, weakest first: $SISA_CONFIG_DIR/sisa.conf, the run
    // directory's own config, --config, then flags.
    std::string config_flag;
    std::string run_flag;
    for (int i = 1; i < argc; ++i) {
        const std::string arg(argv[i]);
        auto value_of = [&](const std::string& name) -> std::optional<std::string> {
            if (arg == name && i + 1 < argc) return std::string(argv[i + 1]);
            if (arg.rfind(name + "=", 0) == 0) return arg.substr(name.size() + 1);
            return std::nullopt;
        };
        if (auto v = value_of("--config")) config_flag = *v;
        if (auto v = value_of("--run")) run_flag = *v;
    }
    try {
        if (const char* dir = std::getenv("SISA_CONFIG_DIR")) {
            const fs::path conf = fs::path(dir) / "sisa.conf";
            if (fs::exists(conf)) apply_config_map(cfg, parse_config_file(conf));
        }
        if (!run_flag.empty() && fs::exists(fs::path(run_flag) / "config")) {
            apply_config_map(cfg, parse_config_file(fs::path(run_flag) / "config"));
        }
        if (!config_flag.empty()) {
            apply_config_map(cfg, parse_config_file(config_flag));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    std::string requests_file;
    std::string out_file;
    std::string slices_list, dists_list, seeds_list;

    CLI::App* ingest = app.add_subcommand("ingest", "materialize a dataset and its split");
    add_common_options(ingest, cfg);
    CLI::App* train = app.add_subcommand("train", "SISA-train all shards with checkpoints");
    add_common_options(train, cfg);
    CLI::App* request = app.add_subcommand("request", "sample an unlearning request stream");
    add_common_options(request, cfg);
    request->add_option("--out", out_file, "output request file");
    CLI::App* unlearn_cmd = app.add_subcommand("unlearn", "apply a request stream exactly");
    add_common_options(unlearn_cmd, cfg);
    unlearn_cmd->add_option("--requests-file", requests_file, "request stream to apply");
    CLI::App* eval = app.add_subcommand("eval", "evaluate the ensemble on the test split");
    add_common_options(eval, cfg);
    CLI::App* simulate = app.add_subcommand("simulate", "run the experiment grid");
    add_common_options(simulate, cfg);
    simulate->add_option("--grid-slices", slices_list, "comma list of R values");
    simulate->add_option("--grid-distributions", dists_list, "comma list of distributions");
    simulate->add_option("--grid-seeds", seeds_list, "comma list of seeds");
    CLI::App* report = app.add_subcommand("report", "aggregate ledgers into the CSV set");
    add_common_options(report, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    kernels::set_parallel_enabled(!cfg.serial_kernels);

    try {
        print_effective_config(cfg);
        if (ingest->parsed()) return cmd_ingest(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (request->parsed()) return cmd_request(cfg, out_file);
        if (unlearn_cmd->parsed()) return cmd_unlearn(cfg, requests_file);
        if (eval->parsed()) return cmd_eval(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg, slices_list, dists_list, seeds_list);
        if (report->parsed()) return cmd_report(cfg);
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const StateError& e) {
        std::cerr << "state error: " << e.what() << '\n';
        return 3;
    } catch (const StoreError& e) {
        std::cerr << "state error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
