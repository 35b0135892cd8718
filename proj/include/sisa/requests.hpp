#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sisa/partition.hpp"

namespace sisa {

// Where unlearning requests land in the training order. Pareto(m, a)
// concentrates requests at early positions (early slices, expensive
// rollbacks); InversePareto mirrors it onto the late positions.
struct RequestDistribution {
    enum class Kind { Uniform, Pareto, InversePareto };

    Kind kind = Kind::Uniform;
    double m = 1.0;
    double a = 1.16;

    static RequestDistribution uniform() { return {Kind::Uniform, 1.0, 1.16}; }
    static RequestDistribution pareto(double m = 1.0, double a = 1.16) {
        return {Kind::Pareto, m, a};
    }
    static RequestDistribution inverse_pareto(double m = 1.0, double a = 1.16) {
        return {Kind::InversePareto, m, a};
    }
    std::string name() const;
};

RequestDistribution parse_distribution(const std::string& text, double m, double a);

// Inverse CDF of the Pareto(m, a) density p(x) = a m^a / x^(a+1):
// quantile(u) = m / (1-u)^(1/a).
double pareto_quantile(double u, double m, double a);

// Cap used to map unbounded Pareto draws onto finite position ranges.
double pareto_position_cap(double m, double a);

// Maps a draw x >= m onto a 1-based position in [1, n]: linear in x between m
// (position 1) and the 99.9th-percentile cap (position n), clamped above.
int64_t position_of(double x, int64_t n, double m, double a);

// Raw 1-based position draws, i.i.d. with replacement. InversePareto draws
// are exactly n_live + 1 - (the Pareto draw from the same stream), so
// seed-paired Pareto / InversePareto streams mirror each other element-wise.
std::vector<int64_t> draw_positions(const RequestDistribution& dist, int64_t n_live,
                                    size_t count, uint64_t seed);

struct RequestStream {
    std::vector<uint64_t> ids;  // distinct, in draw order
    RequestDistribution dist;
    uint64_t seed = 0;
};

// Draws positions from `dist` over the plan's live ids (slice-major
// enumeration), mapping each to an id and redrawing on duplicates until n
// distinct ids are collected.
RequestStream sample_requests(const PartitionPlan& plan, const RequestDistribution& dist,
                              size_t n, uint64_t seed);

// One id per line, preceded by a `# distribution=... m=... a=... n=... seed=...` header.
void export_requests(const RequestStream& stream, const std::filesystem::path& path);
RequestStream import_requests(const std::filesystem::path& path);

}  // namespace sisa
