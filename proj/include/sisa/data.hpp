#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sisa {

// Column bindings and label mapping for one classification task.
struct TaskSchema {
    std::string name;
    int num_inputs = 1;   // 1 or 2 text fields per example
    int num_classes = 2;
    std::vector<std::string> text_columns;
    std::string label_column;
    std::map<std::string, int> label_map;  // raw label string -> class index
};

// Built-in schemas: "sst2", "qqp", "mnli", plus "synth" for generated data.
TaskSchema task_schema(const std::string& task_name);

struct Example {
    uint64_t id = 0;
    std::vector<std::string> texts;
    int label = 0;
};

struct Dataset {
    TaskSchema schema;
    std::vector<Example> examples;  // ingestion order, ids strictly unique

    size_t size() const { return examples.size(); }
};

struct LoadResult {
    Dataset dataset;
    size_t skipped_rows = 0;  // rows dropped for unknown labels / bad fields
};

// Reads a GLUE-style TSV (UTF-8, tab-separated, header row) and returns the
// first `limit` parseable rows in file order. Ids are assigned sequentially
// from 0; `limit` counts rows that survive filtering.
LoadResult load_glue_tsv(const std::filesystem::path& path, const TaskSchema& schema,
                         size_t limit);

// Deterministic split: |test| = round(test_fraction * |ds|); both halves keep
// ingestion order.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             uint64_t seed);

// Synthetic class-conditional bag-of-words data. separation=1 makes the class
// vocabularies disjoint (linearly separable); separation=0 makes all classes
// draw from the same distribution.
Dataset synth_generate(int num_classes, int vocab_size, int tokens_per_example, size_t n,
                       double separation, uint64_t seed);

// One record per line: id<TAB>label<TAB>text[<TAB>text2].
void export_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset import_dataset(const std::filesystem::path& path, const TaskSchema& schema);

// Hashed bag-of-words feature vector, L2-normalized, indices strictly increasing.
struct FeatureVector {
    int32_t dim = 0;
    std::vector<std::pair<int32_t, float>> entries;
};

// Lowercase alphanumeric tokenization, first `token_cap` tokens per text
// field, 64-bit FNV-1a hashing of (field_index, token) mod dim. `dim` must be
// a power of two. Pure function of its arguments.
FeatureVector featurize(const Example& ex, int32_t dim, int token_cap);

// Dataset featurized once up front; shared read-only across shard workers.
struct FeaturizedDataset {
    TaskSchema schema;
    std::vector<uint64_t> ids;
    std::vector<int> labels;
    std::vector<FeatureVector> features;
    std::unordered_map<uint64_t, size_t> by_id;

    size_t size() const { return ids.size(); }
    size_t index_of(uint64_t id) const;
};

FeaturizedDataset featurize_dataset(const Dataset& ds, int32_t dim, int token_cap);

}  // namespace sisa
