#pragma once

#include <cstddef>

#include "sisa/data.hpp"

// Data-parallel linear-algebra kernels used by the learner.
//
// Each kernel exists twice: a serial reference under kernels::serial and an
// OpenMP version that parallelizes only across independent outputs (rows of
// the destination). Every accumulator is still summed by a single thread in a
// fixed order, so the two variants produce bit-identical floats; the tests
// assert that and the bench target measures the difference in throughput.

namespace sisa::kernels {

// Runtime switch between the OpenMP kernels and the serial reference path.
// Results are bit-identical either way.
bool parallel_enabled();
void set_parallel_enabled(bool enabled);

namespace serial {

// y = W x + b with sparse x; W row-major (rows x cols).
void affine_sparse(const float* w, const float* b, int rows, int cols,
                   const FeatureVector& x, float* y);

// y = W x + b with dense x.
void affine(const float* w, const float* b, int rows, int cols, const float* x, float* y);

// y = W^T v; y has cols entries, each summed over rows in ascending order.
void matvec_transpose(const float* w, int rows, int cols, const float* v, float* y);

// g += scale * sum_e u_e (x_e)^T over sparse batch columns, examples ascending.
void accumulate_outer_sparse_batch(float* g, int rows, int cols, const float* const* us,
                                   const FeatureVector* const* xs, int count, float scale);

// g += scale * sum_e u_e (v_e)^T with dense v, examples ascending.
void accumulate_outer_batch(float* g, int rows, int cols, const float* const* us,
                            const float* const* vs, int count, float scale);

// y += a * x
void axpy(int n, float a, const float* x, float* y);

// w -= lr * g and g zeroed, over all n entries.
void sgd_update(float* w, float* g, int n, float lr);

// Same, restricted to the given sorted column set of a rows x cols matrix.
void sgd_update_columns(float* w, float* g, int rows, int cols, const int32_t* touched,
                        int touched_count, float lr);

}  // namespace serial

void affine_sparse(const float* w, const float* b, int rows, int cols,
                   const FeatureVector& x, float* y);
void affine(const float* w, const float* b, int rows, int cols, const float* x, float* y);
void matvec_transpose(const float* w, int rows, int cols, const float* v, float* y);
void accumulate_outer_sparse_batch(float* g, int rows, int cols, const float* const* us,
                                   const FeatureVector* const* xs, int count, float scale);
void accumulate_outer_batch(float* g, int rows, int cols, const float* const* us,
                            const float* const* vs, int count, float scale);
void axpy(int n, float a, const float* x, float* y);
void sgd_update(float* w, float* g, int n, float lr);
void sgd_update_columns(float* w, float* g, int rows, int cols, const int32_t* touched,
                        int touched_count, float lr);

}  // namespace sisa::kernels
