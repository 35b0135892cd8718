#include <doctest.h>

#include <cstring>
#include <vector>

#include "sisa/kernels.hpp"
#include "sisa/rng.hpp"

using namespace sisa;

namespace {

std::vector<float> random_vec(size_t n, SplitMix64& rng) {
    std::vector<float> v(n);
    for (float& x : v) {
        x = rng.next_uniform(-1.0f, 1.0f);
    }
    return v;
}

FeatureVector random_sparse(int32_t dim, int nnz, SplitMix64& rng) {
    FeatureVector fv;
    fv.dim = dim;
    std::vector<int32_t> idx;
    while (static_cast<int>(idx.size()) < nnz) {
        const int32_t i = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(dim)));
        bool dup = false;
        for (int32_t j : idx) dup = dup || j == i;
        if (!dup) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end());
    for (int32_t i : idx) {
        fv.entries.emplace_back(i, rng.next_uniform(-1.0f, 1.0f));
    }
    return fv;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("affine matches a hand-computed product") {
    // y = W x + b with W = [[1,2],[3,4],[5,6]], x = [10, 100], b = [1,1,1]
    const float w[] = {1, 2, 3, 4, 5, 6};
    const float b[] = {1, 1, 1};
    const float x[] = {10, 100};
    float y[3];
    kernels::serial::affine(w, b, 3, 2, x, y);
    CHECK(y[0] == 211.0f);
    CHECK(y[1] == 431.0f);
    CHECK(y[2] == 651.0f);

    float yt[2];
    const float v[] = {1, 1, 1};
    kernels::serial::matvec_transpose(w, 3, 2, v, yt);
    CHECK(yt[0] == 9.0f);
    CHECK(yt[1] == 12.0f);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    SplitMix64 rng(404);
    const int rows = 97;
    const int cols = 513;  // past the parallel threshold, odd on purpose

    const std::vector<float> w = random_vec(static_cast<size_t>(rows) * cols, rng);
    const std::vector<float> b = random_vec(rows, rng);
    const std::vector<float> x = random_vec(cols, rng);
    const std::vector<float> v = random_vec(rows, rng);

    kernels::set_parallel_enabled(true);
    std::vector<float> y_par(rows), y_ser(rows);
    kernels::affine(w.data(), b.data(), rows, cols, x.data(), y_par.data());
    kernels::serial::affine(w.data(), b.data(), rows, cols, x.data(), y_ser.data());
    CHECK(std::memcmp(y_par.data(), y_ser.data(), sizeof(float) * y_par.size()) == 0);

    std::vector<float> t_par(cols), t_ser(cols);
    kernels::matvec_transpose(w.data(), rows, cols, v.data(), t_par.data());
    kernels::serial::matvec_transpose(w.data(), rows, cols, v.data(), t_ser.data());
    CHECK(std::memcmp(t_par.data(), t_ser.data(), sizeof(float) * t_par.size()) == 0);

    const FeatureVector sx = random_sparse(cols, 40, rng);
    std::vector<float> s_par(rows), s_ser(rows);
    kernels::affine_sparse(w.data(), b.data(), rows, cols, sx, s_par.data());
    kernels::serial::affine_sparse(w.data(), b.data(), rows, cols, sx, s_ser.data());
    CHECK(std::memcmp(s_par.data(), s_ser.data(), sizeof(float) * s_par.size()) == 0);
}

TEST_CASE("batch outer-product accumulation: serial vs parallel, fixed order") {
    SplitMix64 rng(811);
    const int rows = 64;
    const int cols = 300;
    const int batch = 16;

    std::vector<std::vector<float>> us, vs;
    std::vector<FeatureVector> xs;
    std::vector<const float*> u_ptrs, v_ptrs;
    std::vector<const FeatureVector*> x_ptrs;
    for (int e = 0; e < batch; ++e) {
        us.push_back(random_vec(rows, rng));
        vs.push_back(random_vec(cols, rng));
        xs.push_back(random_sparse(cols, 25, rng));
    }
    for (int e = 0; e < batch; ++e) {
        u_ptrs.push_back(us[e].data());
        v_ptrs.push_back(vs[e].data());
        x_ptrs.push_back(&xs[e]);
    }

    std::vector<float> g_par(static_cast<size_t>(rows) * cols, 0.0f);
    std::vector<float> g_ser(g_par);
    kernels::accumulate_outer_batch(g_par.data(), rows, cols, u_ptrs.data(), v_ptrs.data(),
                                    batch, 0.25f);
    kernels::serial::accumulate_outer_batch(g_ser.data(), rows, cols, u_ptrs.data(),
                                            v_ptrs.data(), batch, 0.25f);
    CHECK(std::memcmp(g_par.data(), g_ser.data(), sizeof(float) * g_par.size()) == 0);

    std::fill(g_par.begin(), g_par.end(), 0.0f);
    std::fill(g_ser.begin(), g_ser.end(), 0.0f);
    kernels::accumulate_outer_sparse_batch(g_par.data(), rows, cols, u_ptrs.data(),
                                           x_ptrs.data(), batch, 0.5f);
    kernels::serial::accumulate_outer_sparse_batch(g_ser.data(), rows, cols, u_ptrs.data(),
                                                   x_ptrs.data(), batch, 0.5f);
    CHECK(std::memcmp(g_par.data(), g_ser.data(), sizeof(float) * g_par.size()) == 0);
}

TEST_CASE("sgd updates apply and clear the gradient") {
    SplitMix64 rng(99);
    const int rows = 40, cols = 600;
    std::vector<float> w = random_vec(static_cast<size_t>(rows) * cols, rng);
    std::vector<float> g = random_vec(static_cast<size_t>(rows) * cols, rng);
    std::vector<float> w_ser = w, g_ser = g;

    kernels::sgd_update(w.data(), g.data(), rows * cols, 0.1f);
    kernels::serial::sgd_update(w_ser.data(), g_ser.data(), rows * cols, 0.1f);
    CHECK(std::memcmp(w.data(), w_ser.data(), sizeof(float) * w.size()) == 0);
    for (float x : g) CHECK(x == 0.0f);

    // Column-restricted update touches only the listed columns.
    std::vector<float> w2 = w, g2(w.size(), 1.0f);
    const std::vector<int32_t> touched = {3, 17, 599};
    kernels::sgd_update_columns(w2.data(), g2.data(), rows, cols, touched.data(),
                                static_cast<int>(touched.size()), 0.5f);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const size_t i = static_cast<size_t>(r) * cols + c;
            const bool hit = c == 3 || c == 17 || c == 599;
            CHECK(w2[i] == (hit ? w[i] - 0.5f : w[i]));
            CHECK(g2[i] == (hit ? 0.0f : 1.0f));
        }
    }
}

TEST_CASE("disabling the parallel path routes through the reference") {
    SplitMix64 rng(3);
    const int rows = 128, cols = 256;
    const std::vector<float> w = random_vec(static_cast<size_t>(rows) * cols, rng);
    const std::vector<float> x = random_vec(cols, rng);
    std::vector<float> y_on(rows), y_off(rows);

    kernels::set_parallel_enabled(false);
    kernels::affine(w.data(), nullptr, rows, cols, x.data(), y_off.data());
    kernels::set_parallel_enabled(true);
    kernels::affine(w.data(), nullptr, rows, cols, x.data(), y_on.data());
    CHECK(std::memcmp(y_on.data(), y_off.data(), sizeof(float) * y_on.size()) == 0);
}

}  // TEST_SUITE
