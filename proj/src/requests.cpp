#include "sisa/requests.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "sisa/errors.hpp"
#include "sisa/rng.hpp"

namespace sisa {

std::string RequestDistribution::name() const {
    switch (kind) {
        case Kind::Uniform:       return "uniform";
        case Kind::Pareto:        return "pareto";
        case Kind::InversePareto: return "inverse_pareto";
    }
    return "?";
}

RequestDistribution parse_distribution(const std::string& text, double m, double a) {
    RequestDistribution dist;
    if (text == "uniform") {
        dist.kind = RequestDistribution::Kind::Uniform;
    } else if (text == "pareto") {
        dist.kind = RequestDistribution::Kind::Pareto;
    } else if (text == "inverse_pareto" || text == "inverse-pareto" || text == "invpareto") {
        dist.kind = RequestDistribution::Kind::InversePareto;
    } else {
        throw UsageError("unknown distribution '" + text +
                         "' (expected uniform|pareto|inverse_pareto)");
    }
    if (!(m > 0.0) || !(a > 0.0)) {
        throw UsageError("pareto parameters must satisfy m > 0, a > 0");
    }
    dist.m = m;
    dist.a = a;
    return dist;
}

double pareto_quantile(double u, double m, double a) {
    if (!(u >= 0.0 && u < 1.0)) {
        throw DataError("pareto quantile argument must lie in [0, 1)");
    }
    if (!(m > 0.0) || !(a > 0.0)) {
        throw DataError("pareto parameters must satisfy m > 0, a > 0");
    }
    return m / std::pow(1.0 - u, 1.0 / a);
}

double pareto_position_cap(double m, double a) { return pareto_quantile(0.999, m, a); }

int64_t position_of(double x, int64_t n, double m, double a) {
    if (n < 1) {
        throw DataError("position range must be >= 1");
    }
    const double cap = pareto_position_cap(m, a);
    if (x >= cap) {
        return n;
    }
    const double frac = (x - m) / (cap - m);
    const int64_t pos = static_cast<int64_t>(std::ceil(frac * static_cast<double>(n)));
    return std::clamp<int64_t>(pos, 1, n);
}

namespace {

int64_t draw_one(SplitMix64& rng, const RequestDistribution& dist, int64_t n_live) {
    switch (dist.kind) {
        case RequestDistribution::Kind::Uniform:
            return 1 + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n_live)));
        case RequestDistribution::Kind::Pareto:
            return position_of(pareto_quantile(rng.next_unit(), dist.m, dist.a), n_live, dist.m,
                               dist.a);
        case RequestDistribution::Kind::InversePareto:
            return n_live + 1 -
                   position_of(pareto_quantile(rng.next_unit(), dist.m, dist.a), n_live, dist.m,
                               dist.a);
    }
    return 1;
}

}  // namespace

std::vector<int64_t> draw_positions(const RequestDistribution& dist, int64_t n_live,
                                    size_t count, uint64_t seed) {
    if (n_live < 1) {
        throw DataError("no live positions to draw from");
    }
    std::vector<int64_t> out;
    out.reserve(count);
    SplitMix64 rng(derive_stream(seed, "requests"));
    for (size_t i = 0; i < count; ++i) {
        out.push_back(draw_one(rng, dist, n_live));
    }
    return out;
}

RequestStream sample_requests(const PartitionPlan& plan, const RequestDistribution& dist,
                              size_t n, uint64_t seed) {
    const std::vector<uint64_t> live = plan.ids_in_order();
    if (n > live.size()) {
        throw DataError("requested " + std::to_string(n) + " ids but only " +
                        std::to_string(live.size()) + " are live");
    }

    RequestStream stream;
    stream.dist = dist;
    stream.seed = seed;
    std::unordered_set<uint64_t> seen;
    SplitMix64 rng(derive_stream(seed, "requests"));
    const int64_t n_live = static_cast<int64_t>(live.size());
    while (stream.ids.size() < n) {
        const int64_t pos = draw_one(rng, dist, n_live);
        const uint64_t id = live[static_cast<size_t>(pos - 1)];
        if (seen.insert(id).second) {
            stream.ids.push_back(id);
        }
        // Duplicate draws are rejected and redrawn, preserving the shape of
        // the distribution conditioned on availability.
    }
    return stream;
}

void export_requests(const RequestStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write request file: " + path.string());
    }
    out << "# distribution=" << stream.dist.name() << " m=" << stream.dist.m
        << " a=" << stream.dist.a << " n=" << stream.ids.size() << " seed=" << stream.seed
        << '\n';
    for (uint64_t id : stream.ids) {
        out << id << '\n';
    }
    if (!out) {
        throw DataError("write failure on " + path.string());
    }
}

RequestStream import_requests(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open request file: " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw DataError("empty request file: " + path.string());
    }
    char dist_name[32] = {0};
    double m = 0.0, a = 0.0;
    unsigned long long n = 0, seed = 0;
    if (std::sscanf(header.c_str(), "# distribution=%31s m=%lf a=%lf n=%llu seed=%llu",
                    dist_name, &m, &a, &n, &seed) != 5) {
        throw DataError("bad request header in " + path.string());
    }
    RequestStream stream;
    stream.dist = parse_distribution(dist_name, m, a);
    stream.seed = seed;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            stream.ids.push_back(std::stoull(line));
        } catch (const std::exception&) {
            throw DataError("bad id line in " + path.string());
        }
    }
    if (stream.ids.size() != n) {
        throw DataError("request count mismatch in " + path.string());
    }
    return stream;
}

}  // namespace sisa
