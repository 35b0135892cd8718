#include "sisa/partition.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sisa/errors.hpp"
#include "sisa/rng.hpp"

namespace sisa {

std::string PartitionStrategy::name() const {
    switch (kind) {
        case Kind::UniformRandom: return "uniform";
        case Kind::Sequential:    return "sequential";
        case Kind::RiskProfiled:  return "risk";
    }
    return "?";
}

size_t PartitionPlan::live_count() const { return index.size(); }

std::vector<uint64_t> PartitionPlan::ids_in_order() const {
    std::vector<uint64_t> out;
    out.reserve(index.size());
    for (const auto& shard : slices) {
        for (const auto& slice : shard) {
            out.insert(out.end(), slice.begin(), slice.end());
        }
    }
    return out;
}

namespace {

// Contiguous dealing of n items into `parts` groups whose sizes differ by at
// most one, the remainder going to the lowest-indexed groups.
std::vector<size_t> deal_sizes(size_t n, int parts) {
    std::vector<size_t> sizes(static_cast<size_t>(parts), n / static_cast<size_t>(parts));
    for (size_t i = 0; i < n % static_cast<size_t>(parts); ++i) {
        ++sizes[i];
    }
    return sizes;
}

void rebuild_index(PartitionPlan& plan) {
    plan.index.clear();
    for (int s = 0; s < plan.num_shards; ++s) {
        for (int r = 0; r < plan.num_slices; ++r) {
            const auto& slice = plan.slices[s][r];
            for (int pos = 0; pos < static_cast<int>(slice.size()); ++pos) {
                if (!plan.index.emplace(slice[pos], Location{s, r, pos}).second) {
                    throw DataError("duplicate id " + std::to_string(slice[pos]) + " in plan");
                }
            }
        }
    }
}

}  // namespace

PartitionPlan make_plan(const std::vector<uint64_t>& ids, int num_shards, int num_slices,
                        const PartitionStrategy& strategy, uint64_t seed) {
    if (num_shards < 1 || num_slices < 1) {
        throw UsageError("shard and slice counts must be >= 1");
    }
    if (ids.size() < static_cast<size_t>(num_shards) * static_cast<size_t>(num_slices)) {
        throw DataError("need at least " + std::to_string(num_shards * num_slices) +
                        " ids for a " + std::to_string(num_shards) + "x" +
                        std::to_string(num_slices) + " plan, got " + std::to_string(ids.size()));
    }

    std::vector<uint64_t> order = ids;
    if (strategy.kind == PartitionStrategy::Kind::UniformRandom ||
        strategy.kind == PartitionStrategy::Kind::RiskProfiled) {
        const std::vector<size_t> perm = random_permutation(ids.size(), derive_stream(seed, "plan"));
        for (size_t i = 0; i < ids.size(); ++i) {
            order[i] = ids[perm[i]];
        }
    }

    PartitionPlan plan;
    plan.num_shards = num_shards;
    plan.num_slices = num_slices;
    plan.slices.assign(static_cast<size_t>(num_shards), {});

    const std::vector<size_t> shard_sizes = deal_sizes(ids.size(), num_shards);
    size_t cursor = 0;
    for (int s = 0; s < num_shards; ++s) {
        std::vector<uint64_t> shard_ids(order.begin() + static_cast<ptrdiff_t>(cursor),
                                        order.begin() + static_cast<ptrdiff_t>(cursor + shard_sizes[s]));
        cursor += shard_sizes[s];

        if (strategy.kind == PartitionStrategy::Kind::RiskProfiled) {
            // Ascending risk, ties by id: contiguous dealing then puts the
            // highest-risk ids into the highest-numbered slices, so an
            // expected unlearning request invalidates as little as possible.
            std::sort(shard_ids.begin(), shard_ids.end(), [&](uint64_t a, uint64_t b) {
                auto ra = strategy.risk_scores.find(a);
                auto rb = strategy.risk_scores.find(b);
                const double sa = ra == strategy.risk_scores.end() ? 0.0 : ra->second;
                const double sb = rb == strategy.risk_scores.end() ? 0.0 : rb->second;
                if (sa != sb) return sa < sb;
                return a < b;
            });
        }

        const std::vector<size_t> slice_sizes = deal_sizes(shard_ids.size(), num_slices);
        plan.slices[s].reserve(static_cast<size_t>(num_slices));
        size_t sc = 0;
        for (int r = 0; r < num_slices; ++r) {
            plan.slices[s].emplace_back(shard_ids.begin() + static_cast<ptrdiff_t>(sc),
                                        shard_ids.begin() + static_cast<ptrdiff_t>(sc + slice_sizes[r]));
            sc += slice_sizes[r];
        }
    }
    rebuild_index(plan);
    return plan;
}

Location locate(const PartitionPlan& plan, uint64_t id) {
    auto it = plan.index.find(id);
    if (it == plan.index.end()) {
        throw NotFoundError("id " + std::to_string(id) + " not in plan");
    }
    return it->second;
}

RemoveResult remove(const PartitionPlan& plan, const std::vector<uint64_t>& ids) {
    std::vector<uint64_t> missing;
    for (uint64_t id : ids) {
        if (!plan.index.contains(id)) {
            missing.push_back(id);
        }
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        std::string msg = "ids not in plan:";
        for (uint64_t id : missing) {
            msg += ' ' + std::to_string(id);
        }
        throw NotFoundError(msg);
    }

    RemoveResult result;
    result.plan = plan;
    for (uint64_t id : ids) {
        const Location loc = result.plan.index.at(id);
        auto& slice = result.plan.slices[loc.shard][loc.slice];
        slice.erase(std::find(slice.begin(), slice.end(), id));
        result.plan.index.erase(id);
        auto it = result.affected.find(loc.shard);
        if (it == result.affected.end()) {
            result.affected.emplace(loc.shard, loc.slice);
        } else {
            it->second = std::min(it->second, loc.slice);
        }
    }
    // Positions shift only inside slices that lost ids.
    for (const auto& [shard, first_slice] : result.affected) {
        for (int r = first_slice; r < result.plan.num_slices; ++r) {
            const auto& slice = result.plan.slices[shard][r];
            for (int pos = 0; pos < static_cast<int>(slice.size()); ++pos) {
                result.plan.index[slice[pos]] = Location{shard, r, pos};
            }
        }
    }
    return result;
}

void export_plan(const PartitionPlan& plan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write plan file: " + path.string());
    }
    out << "# shards=" << plan.num_shards << " slices=" << plan.num_slices << '\n';
    for (int s = 0; s < plan.num_shards; ++s) {
        for (int r = 0; r < plan.num_slices; ++r) {
            const auto& slice = plan.slices[s][r];
            for (int pos = 0; pos < static_cast<int>(slice.size()); ++pos) {
                out << slice[pos] << '\t' << s << '\t' << r << '\t' << pos << '\n';
            }
        }
    }
    if (!out) {
        throw DataError("write failure on " + path.string());
    }
}

PartitionPlan import_plan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open plan file: " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw DataError("empty plan file: " + path.string());
    }
    int num_shards = 0;
    int num_slices = 0;
    if (std::sscanf(header.c_str(), "# shards=%d slices=%d", &num_shards, &num_slices) != 2 ||
        num_shards < 1 || num_slices < 1) {
        throw DataError("bad plan header in " + path.string());
    }

    PartitionPlan plan;
    plan.num_shards = num_shards;
    plan.num_slices = num_slices;
    plan.slices.assign(static_cast<size_t>(num_shards),
                       std::vector<std::vector<uint64_t>>(static_cast<size_t>(num_slices)));
    std::string line;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        uint64_t id = 0;
        int s = 0, r = 0, pos = 0;
        std::istringstream ss(line);
        if (!(ss >> id >> s >> r >> pos) || s < 0 || s >= num_shards || r < 0 ||
            r >= num_slices || pos < 0) {
            throw DataError("bad plan record at " + path.string() + ":" + std::to_string(line_no));
        }
        auto& slice = plan.slices[s][r];
        if (pos != static_cast<int>(slice.size())) {
            throw DataError("plan records out of order at " + path.string() + ":" +
                            std::to_string(line_no));
        }
        slice.push_back(id);
    }
    rebuild_index(plan);
    return plan;
}

}  // namespace sisa
