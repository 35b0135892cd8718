#include "sisa/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sisa/errors.hpp"
#include "sisa/rng.hpp"

namespace sisa {

TaskSchema task_schema(const std::string& task_name) {
    if (task_name == "sst2") {
        return TaskSchema{"sst2", 1, 2, {"sentence"}, "label", {{"0", 0}, {"1", 1}}};
    }
    if (task_name == "qqp") {
        return TaskSchema{"qqp",  2, 2, {"question1", "question2"}, "is_duplicate",
                          {{"0", 0}, {"1", 1}}};
    }
    if (task_name == "mnli") {
        return TaskSchema{"mnli", 2, 3, {"premise", "hypothesis"}, "gold_label",
                          {{"entailment", 0}, {"neutral", 1}, {"contradiction", 2}}};
    }
    if (task_name == "synth") {
        return TaskSchema{"synth", 1, 2, {"text"}, "label", {{"0", 0}, {"1", 1}}};
    }
    throw DataError("unknown task schema: " + task_name);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, '\t')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == '\t') {
        fields.emplace_back();
    }
    return fields;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

TaskSchema synth_schema(int num_classes) {
    TaskSchema schema = task_schema("synth");
    schema.num_classes = num_classes;
    schema.label_map.clear();
    for (int c = 0; c < num_classes; ++c) {
        schema.label_map[std::to_string(c)] = c;
    }
    return schema;
}

}  // namespace

LoadResult load_glue_tsv(const std::filesystem::path& path, const TaskSchema& schema,
                         size_t limit) {
    if (limit == 0) {
        throw DataError("zero parseable rows requested");
    }
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset file: " + path.string());
    }

    std::string header;
    if (!std::getline(in, header)) {
        throw DataError("empty dataset file: " + path.string());
    }
    strip_cr(header);
    const std::vector<std::string> columns = split_tabs(header);

    auto column_index = [&](const std::string& name) {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            throw DataError("missing required column '" + name + "' in " + path.string());
        }
        return static_cast<size_t>(it - columns.begin());
    };

    std::vector<size_t> text_idx;
    for (const auto& col : schema.text_columns) {
        text_idx.push_back(column_index(col));
    }
    const size_t label_idx = column_index(schema.label_column);

    LoadResult result;
    result.dataset.schema = schema;
    std::string line;
    uint64_t next_id = 0;
    while (result.dataset.examples.size() < limit && std::getline(in, line)) {
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_tabs(line);
        size_t max_idx = label_idx;
        for (size_t ti : text_idx) max_idx = std::max(max_idx, ti);
        if (fields.size() <= max_idx) {
            ++result.skipped_rows;
            continue;
        }
        auto label_it = schema.label_map.find(fields[label_idx]);
        if (label_it == schema.label_map.end()) {
            // GLUE test splits carry hidden labels; skip rather than abort.
            ++result.skipped_rows;
            continue;
        }
        Example ex;
        ex.id = next_id++;
        for (size_t ti : text_idx) {
            ex.texts.push_back(fields[ti]);
        }
        ex.label = label_it->second;
        result.dataset.examples.push_back(std::move(ex));
    }
    if (result.dataset.examples.empty()) {
        throw DataError("zero parseable rows in " + path.string());
    }
    return result;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             uint64_t seed) {
    if (ds.examples.empty()) {
        throw DataError("cannot split an empty dataset");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError("test fraction must lie in (0, 1)");
    }
    const size_t n = ds.examples.size();
    const size_t test_count =
        static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n)));

    std::vector<size_t> perm = random_permutation(n, derive_stream(seed, "split"));
    std::vector<bool> is_test(n, false);
    for (size_t i = 0; i < test_count; ++i) {
        is_test[perm[i]] = true;
    }

    Dataset train{ds.schema, {}};
    Dataset test{ds.schema, {}};
    for (size_t i = 0; i < n; ++i) {
        (is_test[i] ? test : train).examples.push_back(ds.examples[i]);
    }
    return {std::move(train), std::move(test)};
}

Dataset synth_generate(int num_classes, int vocab_size, int tokens_per_example, size_t n,
                       double separation, uint64_t seed) {
    if (num_classes < 2) {
        throw DataError("synth_generate needs at least 2 classes");
    }
    if (vocab_size < num_classes) {
        throw DataError("vocab_size must be >= num_classes");
    }
    if (n == 0) {
        throw DataError("synth_generate needs n > 0");
    }
    if (tokens_per_example < 1) {
        throw DataError("tokens_per_example must be >= 1");
    }
    if (separation < 0.0 || separation > 1.0) {
        throw DataError("separation must lie in [0, 1]");
    }

    Dataset ds;
    ds.schema = synth_schema(num_classes);

    // Vocabulary is partitioned into one block per class. A token is drawn
    // from the example's class block with probability `separation`, otherwise
    // uniformly from the whole vocabulary, so separation=0 collapses all class
    // distributions into one and separation=1 makes them disjoint.
    const int block = vocab_size / num_classes;
    SplitMix64 rng(derive_stream(seed, "synth"));
    for (size_t i = 0; i < n; ++i) {
        Example ex;
        ex.id = static_cast<uint64_t>(i);
        ex.label = static_cast<int>(rng.next_below(static_cast<uint64_t>(num_classes)));
        std::string text;
        for (int t = 0; t < tokens_per_example; ++t) {
            int token;
            if (rng.next_unit() < separation) {
                token = ex.label * block + static_cast<int>(rng.next_below(block));
            } else {
                token = static_cast<int>(rng.next_below(static_cast<uint64_t>(vocab_size)));
            }
            if (t > 0) text += ' ';
            text += 'w';
            text += std::to_string(token);
        }
        ex.texts.push_back(std::move(text));
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

void export_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write dataset file: " + path.string());
    }
    for (const Example& ex : ds.examples) {
        out << ex.id << '\t' << ex.label;
        for (const std::string& text : ex.texts) {
            out << '\t' << text;
        }
        out << '\n';
    }
    if (!out) {
        throw DataError("write failure on " + path.string());
    }
}

Dataset import_dataset(const std::filesystem::path& path, const TaskSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open dataset file: " + path.string());
    }
    Dataset ds;
    ds.schema = schema;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_tabs(line);
        const size_t expected = 2 + static_cast<size_t>(schema.num_inputs);
        if (fields.size() != expected) {
            throw DataError("bad record at " + path.string() + ":" + std::to_string(line_no));
        }
        Example ex;
        try {
            ex.id = std::stoull(fields[0]);
            ex.label = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw DataError("bad record at " + path.string() + ":" + std::to_string(line_no));
        }
        if (ex.label < 0 || ex.label >= schema.num_classes) {
            throw DataError("label out of range at " + path.string() + ":" +
                            std::to_string(line_no));
        }
        for (int t = 0; t < schema.num_inputs; ++t) {
            ex.texts.push_back(fields[2 + static_cast<size_t>(t)]);
        }
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

FeatureVector featurize(const Example& ex, int32_t dim, int token_cap) {
    if (dim <= 0 || (dim & (dim - 1)) != 0) {
        throw DataError("feature dim must be a power of two");
    }
    if (token_cap < 1) {
        throw DataError("token_cap must be >= 1");
    }

    // Raw token counts per hashed index. Collisions simply accumulate.
    std::vector<std::pair<int32_t, float>> counts;
    for (size_t field = 0; field < ex.texts.size(); ++field) {
        const std::string& text = ex.texts[field];
        int emitted = 0;
        size_t i = 0;
        while (i < text.size() && emitted < token_cap) {
            // Token: maximal run of [a-z0-9] after ASCII lowercasing; bytes
            // >= 0x80 (UTF-8 continuations) count as token characters.
            auto is_token_char = [](unsigned char c) {
                return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
            };
            auto lower = [](unsigned char c) {
                return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c + 32) : c;
            };
            while (i < text.size() && !is_token_char(lower(static_cast<unsigned char>(text[i])))) {
                ++i;
            }
            if (i >= text.size()) break;
            uint64_t h = fnv1a_u64(static_cast<uint64_t>(field));
            while (i < text.size()) {
                unsigned char c = lower(static_cast<unsigned char>(text[i]));
                if (!is_token_char(c)) break;
                h ^= c;
                h *= kFnvPrime;
                ++i;
            }
            ++emitted;
            counts.emplace_back(static_cast<int32_t>(h & static_cast<uint64_t>(dim - 1)), 1.0f);
        }
    }

    std::sort(counts.begin(), counts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    FeatureVector fv;
    fv.dim = dim;
    for (const auto& [idx, val] : counts) {
        if (!fv.entries.empty() && fv.entries.back().first == idx) {
            fv.entries.back().second += val;
        } else {
            fv.entries.emplace_back(idx, val);
        }
    }

    double norm_sq = 0.0;
    for (const auto& [idx, val] : fv.entries) {
        norm_sq += static_cast<double>(val) * val;
    }
    if (norm_sq > 0.0) {
        const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
        for (auto& [idx, val] : fv.entries) {
            val *= inv;
        }
    }
    return fv;
}

size_t FeaturizedDataset::index_of(uint64_t id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
        throw NotFoundError("id " + std::to_string(id) + " not in dataset");
    }
    return it->second;
}

FeaturizedDataset featurize_dataset(const Dataset& ds, int32_t dim, int token_cap) {
    // Parameter validation happens before the parallel loop; featurize itself
    // cannot throw once dim and token_cap are known good.
    if (dim <= 0 || (dim & (dim - 1)) != 0) {
        throw DataError("feature dim must be a power of two");
    }
    if (token_cap < 1) {
        throw DataError("token_cap must be >= 1");
    }
    FeaturizedDataset fd;
    fd.schema = ds.schema;
    fd.ids.reserve(ds.examples.size());
    fd.labels.reserve(ds.examples.size());
    fd.features.resize(ds.examples.size());
    for (const Example& ex : ds.examples) {
        fd.ids.push_back(ex.id);
        fd.labels.push_back(ex.label);
    }
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < ds.examples.size(); ++i) {
        fd.features[i] = featurize(ds.examples[i], dim, token_cap);
    }
    for (size_t i = 0; i < fd.ids.size(); ++i) {
        if (!fd.by_id.emplace(fd.ids[i], i).second) {
            throw DataError("duplicate id " + std::to_string(fd.ids[i]));
        }
    }
    return fd;
}

}  // namespace sisa
