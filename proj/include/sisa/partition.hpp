#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace sisa {

// How training ids are dealt into shards and slices.
struct PartitionStrategy {
    enum class Kind { UniformRandom, Sequential, RiskProfiled };

    Kind kind = Kind::UniformRandom;
    // RiskProfiled only: higher risk means more likely to be unlearned, so
    // those ids are placed in the highest-numbered slices of their shard.
    std::unordered_map<uint64_t, double> risk_scores;

    static PartitionStrategy uniform_random() { return {Kind::UniformRandom, {}}; }
    static PartitionStrategy sequential() { return {Kind::Sequential, {}}; }
    static PartitionStrategy risk_profiled(std::unordered_map<uint64_t, double> scores) {
        return {Kind::RiskProfiled, std::move(scores)};
    }
    std::string name() const;
};

struct Location {
    int shard = 0;
    int slice = 0;
    int position = 0;  // rank within the slice

    bool operator==(const Location&) const = default;
};

// S x R assignment of example ids. Immutable; remove() returns a new plan.
// Slices shrink in place under deletion -- no rebalancing, so checkpoints of
// untouched slices stay valid.
struct PartitionPlan {
    int num_shards = 0;
    int num_slices = 0;
    std::vector<std::vector<std::vector<uint64_t>>> slices;  // [shard][slice] -> ids in order
    std::unordered_map<uint64_t, Location> index;

    size_t live_count() const;
    // All live ids in (shard, slice, position) order; position 1 in the
    // request position space is the first element of this list.
    std::vector<uint64_t> ids_in_order() const;
};

PartitionPlan make_plan(const std::vector<uint64_t>& ids, int num_shards, int num_slices,
                        const PartitionStrategy& strategy, uint64_t seed);

// Throws NotFoundError when the id is not (or no longer) in the plan.
Location locate(const PartitionPlan& plan, uint64_t id);

struct RemoveResult {
    PartitionPlan plan;
    // shard -> earliest slice index that contained a removed id; shards with
    // no removals are absent.
    std::map<int, int> affected;
};

// Removes all ids (validating the full set first; the input plan is never
// partially modified). Surviving ids keep their slice order.
RemoveResult remove(const PartitionPlan& plan, const std::vector<uint64_t>& ids);

// Line-oriented export: id<TAB>shard<TAB>slice<TAB>position, sorted by
// (shard, slice, position).
void export_plan(const PartitionPlan& plan, const std::filesystem::path& path);
PartitionPlan import_plan(const std::filesystem::path& path);

}  // namespace sisa
