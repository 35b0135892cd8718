#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "sisa/errors.hpp"
#include "sisa/requests.hpp"
#include "sisa/rng.hpp"

using namespace sisa;

namespace {

std::vector<uint64_t> iota_ids(size_t n) {
    std::vector<uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

}  // namespace

TEST_SUITE("requests") {

TEST_CASE("pareto_quantile against the closed form") {
    CHECK(pareto_quantile(0.0, 1.0, 1.16) == 1.0);
    CHECK(pareto_quantile(0.0, 2.5, 0.8) == 2.5);
    // Values frozen from an independent high-precision evaluation of
    // m / (1-u)^(1/a) at m=1, a=1.16.
    CHECK(pareto_quantile(0.5, 1.0, 1.16) == doctest::Approx(1.8176431200757231).epsilon(1e-12));
    CHECK(pareto_quantile(0.99, 1.0, 1.16) == doctest::Approx(52.983169062837087).epsilon(1e-12));
    CHECK(pareto_position_cap(1.0, 1.16) ==
          doctest::Approx(385.66204211634717).epsilon(1e-12));
    CHECK_THROWS_AS(pareto_quantile(1.0, 1.0, 1.16), DataError);
    CHECK_THROWS_AS(pareto_quantile(-0.1, 1.0, 1.16), DataError);
    CHECK_THROWS_AS(pareto_quantile(0.5, 0.0, 1.16), DataError);
}

TEST_CASE("position_of edge behavior") {
    // The distribution minimum maps to the first position for any n.
    CHECK(position_of(1.0, 1, 1.0, 1.16) == 1);
    CHECK(position_of(1.0, 10, 1.0, 1.16) == 1);
    CHECK(position_of(1.0, 10000, 1.0, 1.16) == 1);
    // Draws at or past the cap clamp to n.
    const double cap = pareto_position_cap(1.0, 1.16);
    CHECK(position_of(cap, 100, 1.0, 1.16) == 100);
    CHECK(position_of(cap * 50, 100, 1.0, 1.16) == 100);
    // Degenerate range.
    CHECK(position_of(7.3, 1, 1.0, 1.16) == 1);
    // Monotone in x.
    int64_t prev = 1;
    for (double x = 1.0; x < cap; x += 3.7) {
        const int64_t pos = position_of(x, 1000, 1.0, 1.16);
        CHECK(pos >= prev);
        prev = pos;
    }
}

TEST_CASE("pareto head concentration matches the integrated mass") {
    // Analytically, P(position <= 0.2 n) = 1 - (m + 0.2 (cap - m))^(-a)
    // ~= 0.9936 at m=1, a=1.16: far above the 75% requirement.
    const auto positions = draw_positions(RequestDistribution::pareto(), 10000, 1000, 99);
    size_t head = 0;
    for (int64_t p : positions) {
        CHECK(p >= 1);
        CHECK(p <= 10000);
        if (p <= 2000) ++head;
    }
    CHECK(static_cast<double>(head) / positions.size() >= 0.75);

    const double analytic = 1.0 - std::pow(1.0 + 0.2 * (pareto_position_cap(1.0, 1.16) - 1.0),
                                           -1.16);
    CHECK(analytic == doctest::Approx(0.9936).epsilon(1e-3));
    CHECK(static_cast<double>(head) / positions.size() ==
          doctest::Approx(analytic).epsilon(0.02));
}

TEST_CASE("inverse pareto mirrors pareto draws element-wise") {
    const int64_t n = 5000;
    const auto pareto = draw_positions(RequestDistribution::pareto(), n, 500, 1234);
    const auto inverse = draw_positions(RequestDistribution::inverse_pareto(), n, 500, 1234);
    REQUIRE(pareto.size() == inverse.size());
    for (size_t i = 0; i < pareto.size(); ++i) {
        CHECK(inverse[i] == n + 1 - pareto[i]);
    }
}

TEST_CASE("uniform draws hit every shard near-evenly (chi-square)") {
    const int64_t n = 10000;  // positions over a 5-shard plan: 2000 each
    const auto positions = draw_positions(RequestDistribution::uniform(), n, 10000, 777);
    std::vector<int64_t> shard_counts(5, 0);
    for (int64_t p : positions) {
        ++shard_counts[static_cast<size_t>((p - 1) / 2000)];
    }
    double chi2 = 0.0;
    for (int64_t c : shard_counts) {
        const double fraction = static_cast<double>(c) / static_cast<double>(positions.size());
        CHECK(fraction >= 0.15);
        CHECK(fraction <= 0.25);
        const double diff = static_cast<double>(c) - 2000.0;
        chi2 += diff * diff / 2000.0;
    }
    CHECK(chi2 <= 18.467);  // chi-square df=4 critical value at 0.001
}

TEST_CASE("sample_requests draws distinct live ids deterministically") {
    const PartitionPlan plan =
        make_plan(iota_ids(200), 5, 4, PartitionStrategy::uniform_random(), 3);
    const RequestStream a = sample_requests(plan, RequestDistribution::pareto(), 50, 9);
    const RequestStream b = sample_requests(plan, RequestDistribution::pareto(), 50, 9);
    CHECK(a.ids == b.ids);
    std::set<uint64_t> unique(a.ids.begin(), a.ids.end());
    CHECK(unique.size() == 50);
    for (uint64_t id : a.ids) {
        CHECK_NOTHROW(locate(plan, id));
    }
}

TEST_CASE("uniform exhaustion yields a permutation of the live ids") {
    const PartitionPlan plan = make_plan(iota_ids(60), 3, 2, PartitionStrategy::sequential(), 1);
    const RequestStream all = sample_requests(plan, RequestDistribution::uniform(), 60, 4);
    std::set<uint64_t> unique(all.ids.begin(), all.ids.end());
    CHECK(unique.size() == 60);
    CHECK(*unique.begin() == 0);
    CHECK(*unique.rbegin() == 59);
    CHECK_THROWS_AS(sample_requests(plan, RequestDistribution::uniform(), 61, 4), DataError);
}

TEST_CASE("request stream export/import round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "sisa_requests_test";
    std::filesystem::create_directories(dir);
    const PartitionPlan plan =
        make_plan(iota_ids(100), 5, 4, PartitionStrategy::uniform_random(), 3);
    const RequestStream stream =
        sample_requests(plan, RequestDistribution::inverse_pareto(), 16, 42);
    export_requests(stream, dir / "requests.txt");
    const RequestStream back = import_requests(dir / "requests.txt");
    CHECK(back.ids == stream.ids);
    CHECK(back.seed == stream.seed);
    CHECK(back.dist.kind == stream.dist.kind);
    CHECK(back.dist.m == stream.dist.m);
    CHECK(back.dist.a == stream.dist.a);
}

TEST_CASE("distribution parsing") {
    CHECK(parse_distribution("uniform", 1, 1.16).kind == RequestDistribution::Kind::Uniform);
    CHECK(parse_distribution("pareto", 1, 1.16).kind == RequestDistribution::Kind::Pareto);
    CHECK(parse_distribution("inverse_pareto", 1, 1.16).kind ==
          RequestDistribution::Kind::InversePareto);
    CHECK_THROWS_AS(parse_distribution("zipf", 1, 1.16), UsageError);
    CHECK_THROWS_AS(parse_distribution("pareto", 0, 1.16), UsageError);
}

}  // TEST_SUITE
