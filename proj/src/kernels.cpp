#include "sisa/kernels.hpp"

#include <atomic>

namespace sisa::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Below this many float ops a parallel region costs more than it saves.
constexpr long kParallelThreshold = 16384;
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }

namespace serial {

void affine_sparse(const float* w, const float* b, int rows, int cols,
                   const FeatureVector& x, float* y) {
    for (int r = 0; r < rows; ++r) {
        const float* row = w + static_cast<size_t>(r) * cols;
        float acc = b ? b[r] : 0.0f;
        for (const auto& [idx, val] : x.entries) {
            acc += row[idx] * val;
        }
        y[r] = acc;
    }
}

void affine(const float* w, const float* b, int rows, int cols, const float* x, float* y) {
    for (int r = 0; r < rows; ++r) {
        const float* row = w + static_cast<size_t>(r) * cols;
        float acc = b ? b[r] : 0.0f;
        for (int c = 0; c < cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
}

void matvec_transpose(const float* w, int rows, int cols, const float* v, float* y) {
    for (int c = 0; c < cols; ++c) {
        float acc = 0.0f;
        for (int r = 0; r < rows; ++r) {
            acc += w[static_cast<size_t>(r) * cols + c] * v[r];
        }
        y[c] = acc;
    }
}

void accumulate_outer_sparse_batch(float* g, int rows, int cols, const float* const* us,
                                   const FeatureVector* const* xs, int count, float scale) {
    for (int r = 0; r < rows; ++r) {
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int e = 0; e < count; ++e) {
            const float ue = scale * us[e][r];
            for (const auto& [idx, val] : xs[e]->entries) {
                grow[idx] += ue * val;
            }
        }
    }
}

void accumulate_outer_batch(float* g, int rows, int cols, const float* const* us,
                            const float* const* vs, int count, float scale) {
    for (int r = 0; r < rows; ++r) {
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int e = 0; e < count; ++e) {
            const float ue = scale * us[e][r];
            const float* ve = vs[e];
            for (int c = 0; c < cols; ++c) {
                grow[c] += ue * ve[c];
            }
        }
    }
}

void axpy(int n, float a, const float* x, float* y) {
    for (int i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void sgd_update(float* w, float* g, int n, float lr) {
    for (int i = 0; i < n; ++i) {
        w[i] -= lr * g[i];
        g[i] = 0.0f;
    }
}

void sgd_update_columns(float* w, float* g, int rows, int cols, const int32_t* touched,
                        int touched_count, float lr) {
    for (int r = 0; r < rows; ++r) {
        float* wrow = w + static_cast<size_t>(r) * cols;
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int t = 0; t < touched_count; ++t) {
            const int32_t c = touched[t];
            wrow[c] -= lr * grow[c];
            grow[c] = 0.0f;
        }
    }
}

}  // namespace serial

void affine_sparse(const float* w, const float* b, int rows, int cols,
                   const FeatureVector& x, float* y) {
    const long work = static_cast<long>(rows) * static_cast<long>(x.entries.size());
    if (!parallel_enabled() || work < kParallelThreshold) {
        serial::affine_sparse(w, b, rows, cols, x, y);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* row = w + static_cast<size_t>(r) * cols;
        float acc = b ? b[r] : 0.0f;
        for (const auto& [idx, val] : x.entries) {
            acc += row[idx] * val;
        }
        y[r] = acc;
    }
}

void affine(const float* w, const float* b, int rows, int cols, const float* x, float* y) {
    const long work = static_cast<long>(rows) * static_cast<long>(cols);
    if (!parallel_enabled() || work < kParallelThreshold) {
        serial::affine(w, b, rows, cols, x, y);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const float* row = w + static_cast<size_t>(r) * cols;
        float acc = b ? b[r] : 0.0f;
        for (int c = 0; c < cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
}

void matvec_transpose(const float* w, int rows, int cols, const float* v, float* y) {
    const long work = static_cast<long>(rows) * static_cast<long>(cols);
    if (!parallel_enabled() || work < kParallelThreshold) {
        serial::matvec_transpose(w, rows, cols, v, y);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cols; ++c) {
        float acc = 0.0f;
        for (int r = 0; r < rows; ++r) {
            acc += w[static_cast<size_t>(r) * cols + c] * v[r];
        }
        y[c] = acc;
    }
}

void accumulate_outer_sparse_batch(float* g, int rows, int cols, const float* const* us,
                                   const FeatureVector* const* xs, int count, float scale) {
    long nnz = 0;
    for (int e = 0; e < count; ++e) nnz += static_cast<long>(xs[e]->entries.size());
    if (!parallel_enabled() || static_cast<long>(rows) * nnz < kParallelThreshold) {
        serial::accumulate_outer_sparse_batch(g, rows, cols, us, xs, count, scale);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int e = 0; e < count; ++e) {
            const float ue = scale * us[e][r];
            for (const auto& [idx, val] : xs[e]->entries) {
                grow[idx] += ue * val;
            }
        }
    }
}

void accumulate_outer_batch(float* g, int rows, int cols, const float* const* us,
                            const float* const* vs, int count, float scale) {
    const long work = static_cast<long>(rows) * cols * count;
    if (!parallel_enabled() || work < kParallelThreshold) {
        serial::accumulate_outer_batch(g, rows, cols, us, vs, count, scale);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int e = 0; e < count; ++e) {
            const float ue = scale * us[e][r];
            const float* ve = vs[e];
            for (int c = 0; c < cols; ++c) {
                grow[c] += ue * ve[c];
            }
        }
    }
}

void axpy(int n, float a, const float* x, float* y) {
    if (!parallel_enabled() || n < kParallelThreshold) {
        serial::axpy(n, a, x, y);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void sgd_update(float* w, float* g, int n, float lr) {
    if (!parallel_enabled() || n < kParallelThreshold) {
        serial::sgd_update(w, g, n, lr);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        w[i] -= lr * g[i];
        g[i] = 0.0f;
    }
}

void sgd_update_columns(float* w, float* g, int rows, int cols, const int32_t* touched,
                        int touched_count, float lr) {
    const long work = static_cast<long>(rows) * touched_count;
    if (!parallel_enabled() || work < kParallelThreshold) {
        serial::sgd_update_columns(w, g, rows, cols, touched, touched_count, lr);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        float* wrow = w + static_cast<size_t>(r) * cols;
        float* grow = g + static_cast<size_t>(r) * cols;
        for (int t = 0; t < touched_count; ++t) {
            const int32_t c = touched[t];
            wrow[c] -= lr * grow[c];
            grow[c] = 0.0f;
        }
    }
}

}  // namespace sisa::kernels
