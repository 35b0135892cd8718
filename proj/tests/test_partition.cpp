#include <doctest.h>

#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "sisa/errors.hpp"
#include "sisa/partition.hpp"
#include "sisa/rng.hpp"

using namespace sisa;

namespace {

std::vector<uint64_t> iota_ids(size_t n) {
    std::vector<uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

void check_exhaustive_and_balanced(const PartitionPlan& plan, const std::vector<uint64_t>& ids) {
    std::multiset<uint64_t> seen;
    size_t min_shard = SIZE_MAX, max_shard = 0;
    for (const auto& shard : plan.slices) {
        size_t shard_size = 0;
        size_t min_slice = SIZE_MAX, max_slice = 0;
        for (const auto& slice : shard) {
            shard_size += slice.size();
            min_slice = std::min(min_slice, slice.size());
            max_slice = std::max(max_slice, slice.size());
            for (uint64_t id : slice) seen.insert(id);
        }
        CHECK(max_slice - min_slice <= 1);
        min_shard = std::min(min_shard, shard_size);
        max_shard = std::max(max_shard, shard_size);
    }
    CHECK(max_shard - min_shard <= 1);
    CHECK(seen == std::multiset<uint64_t>(ids.begin(), ids.end()));
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("100 ids into 5 shards of 4 slices: 20 per shard, 5 per slice") {
    const auto ids = iota_ids(100);
    for (const auto strategy :
         {PartitionStrategy::uniform_random(), PartitionStrategy::sequential()}) {
        const PartitionPlan plan = make_plan(ids, 5, 4, strategy, 7);
        CHECK(plan.num_shards == 5);
        CHECK(plan.num_slices == 4);
        for (const auto& shard : plan.slices) {
            size_t total = 0;
            for (const auto& slice : shard) {
                CHECK(slice.size() == 5);
                total += slice.size();
            }
            CHECK(total == 20);
        }
        check_exhaustive_and_balanced(plan, ids);
    }
}

TEST_CASE("uneven counts stay balanced and exhaustive") {
    for (size_t n : {23u, 57u, 101u, 500u}) {
        const auto ids = iota_ids(n);
        const PartitionPlan plan = make_plan(ids, 5, 4, PartitionStrategy::uniform_random(), 3);
        check_exhaustive_and_balanced(plan, ids);
    }
}

TEST_CASE("make_plan is seed-deterministic") {
    const auto ids = iota_ids(64);
    const PartitionPlan a = make_plan(ids, 4, 4, PartitionStrategy::uniform_random(), 5);
    const PartitionPlan b = make_plan(ids, 4, 4, PartitionStrategy::uniform_random(), 5);
    const PartitionPlan c = make_plan(ids, 4, 4, PartitionStrategy::uniform_random(), 6);
    CHECK(a.slices == b.slices);
    CHECK(a.slices != c.slices);
}

TEST_CASE("sequential strategy preserves input order") {
    const auto ids = iota_ids(40);
    const PartitionPlan plan = make_plan(ids, 2, 2, PartitionStrategy::sequential(), 1);
    CHECK(plan.slices[0][0] == std::vector<uint64_t>({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
    CHECK(plan.slices[1][1] == std::vector<uint64_t>({30, 31, 32, 33, 34, 35, 36, 37, 38, 39}));
}

TEST_CASE("risk-profiled placement pushes high risk into late slices") {
    const auto ids = iota_ids(60);
    std::unordered_map<uint64_t, double> scores;
    for (uint64_t id : ids) scores[id] = static_cast<double>(id);
    const PartitionPlan plan = make_plan(ids, 3, 4, PartitionStrategy::risk_profiled(scores), 9);
    check_exhaustive_and_balanced(plan, ids);
    for (const auto& shard : plan.slices) {
        for (size_t r = 1; r < shard.size(); ++r) {
            // max id (== max risk) of slice r-1 <= min id of slice r
            const uint64_t prev_max = *std::max_element(shard[r - 1].begin(), shard[r - 1].end());
            const uint64_t next_min = *std::min_element(shard[r].begin(), shard[r].end());
            CHECK(prev_max <= next_min);
        }
    }
}

TEST_CASE("make_plan rejects undersized inputs") {
    CHECK_THROWS_AS(make_plan(iota_ids(5), 3, 2, PartitionStrategy::sequential(), 1), DataError);
    CHECK_THROWS_AS(make_plan(iota_ids(10), 0, 2, PartitionStrategy::sequential(), 1),
                    UsageError);
    CHECK_THROWS_AS(make_plan(iota_ids(10), 2, 0, PartitionStrategy::sequential(), 1),
                    UsageError);
}

TEST_CASE("locate is a left inverse of placement") {
    const auto ids = iota_ids(80);
    const PartitionPlan plan = make_plan(ids, 4, 4, PartitionStrategy::uniform_random(), 13);
    for (uint64_t id : ids) {
        const Location loc = locate(plan, id);
        CHECK(plan.slices[loc.shard][loc.slice][loc.position] == id);
    }
    CHECK_THROWS_AS(locate(plan, 12345), NotFoundError);
}

TEST_CASE("remove: single id, min rule, and validation") {
    const auto ids = iota_ids(100);
    const PartitionPlan plan = make_plan(ids, 5, 4, PartitionStrategy::sequential(), 1);

    // Shard 1 holds ids 20..39; its slice 3 holds 35..39.
    const RemoveResult one = remove(plan, {37});
    CHECK(one.affected == std::map<int, int>({{1, 3}}));
    CHECK_THROWS_AS(locate(one.plan, 37), NotFoundError);
    CHECK(one.plan.live_count() == 99);

    const RemoveResult two = remove(plan, {37, 21});  // slices 3 and 0 of shard 1
    CHECK(two.affected == std::map<int, int>({{1, 0}}));

    const RemoveResult none = remove(plan, {});
    CHECK(none.affected.empty());
    CHECK(none.plan.slices == plan.slices);

    CHECK_THROWS_AS(remove(plan, {999}), NotFoundError);
    CHECK_THROWS_AS(remove(one.plan, {37}), NotFoundError);  // already deleted
    // Validation failure leaves the original intact by construction (the
    // input is const); double-check the failed call had no side effects.
    CHECK(plan.live_count() == 100);
}

TEST_CASE("remove preserves surviving placements and order") {
    const auto ids = iota_ids(120);
    for (const auto strategy :
         {PartitionStrategy::uniform_random(), PartitionStrategy::sequential()}) {
        const PartitionPlan plan = make_plan(ids, 4, 5, strategy, 17);
        SplitMix64 rng(31);
        std::vector<uint64_t> victims;
        while (victims.size() < 10) {
            const uint64_t v = rng.next_below(120);
            if (std::find(victims.begin(), victims.end(), v) == victims.end()) {
                victims.push_back(v);
            }
        }
        const RemoveResult res = remove(plan, victims);
        CHECK(res.plan.live_count() == 110);
        for (uint64_t id : ids) {
            if (std::find(victims.begin(), victims.end(), id) != victims.end()) {
                CHECK_THROWS_AS(locate(res.plan, id), NotFoundError);
                continue;
            }
            const Location before = locate(plan, id);
            const Location after = locate(res.plan, id);
            CHECK(before.shard == after.shard);
            CHECK(before.slice == after.slice);
            // Survivor order within the slice is unchanged.
            const auto& old_slice = plan.slices[before.shard][before.slice];
            const auto& new_slice = res.plan.slices[after.shard][after.slice];
            size_t old_rank = 0;
            for (uint64_t other : old_slice) {
                if (other == id) break;
                if (std::find(victims.begin(), victims.end(), other) == victims.end()) {
                    ++old_rank;
                }
            }
            CHECK(new_slice[static_cast<size_t>(after.position)] == id);
            CHECK(static_cast<size_t>(after.position) == old_rank);
        }
    }
}

TEST_CASE("plan export/import round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "sisa_plan_test";
    std::filesystem::create_directories(dir);
    const auto ids = iota_ids(50);
    const PartitionPlan plan = make_plan(ids, 3, 3, PartitionStrategy::uniform_random(), 23);
    export_plan(plan, dir / "plan.tsv");
    const PartitionPlan back = import_plan(dir / "plan.tsv");
    CHECK(back.num_shards == plan.num_shards);
    CHECK(back.num_slices == plan.num_slices);
    CHECK(back.slices == plan.slices);
}

}  // TEST_SUITE
