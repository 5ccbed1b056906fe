#pragma once

#include <span>

#include "tride/matrix.hpp"

// Dense kernels used by the embedding network and the retrieval code.
//
// Every kernel exists twice: `serial` is the straight-loop reference and
// `omp` splits independent output rows across OpenMP threads. Each output
// element is accumulated in the same order in both versions, so results are
// bitwise identical for any thread count.
namespace tride::kernels {

namespace serial {

/// Z = X W^T + b, with X n x in, W out x in.
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b);
/// dX = dZ W.
Matrix affine_backward_input(const Matrix& dz, const Matrix& w);
/// dW = dZ^T X, db = column sums of dZ (summed over rows in ascending order).
void affine_backward_params(const Matrix& x, const Matrix& dz, Matrix& dw, std::span<double> db);
/// Euclidean distances between every row of q and every row of g.
Matrix distance_matrix(const Matrix& q, const Matrix& g);

} // namespace serial

namespace omp {

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b);
Matrix affine_backward_input(const Matrix& dz, const Matrix& w);
void affine_backward_params(const Matrix& x, const Matrix& dz, Matrix& dw, std::span<double> db);
Matrix distance_matrix(const Matrix& q, const Matrix& g);

} // namespace omp

/// Sets the OpenMP thread count used by the `omp` kernels (0 keeps the default).
void set_threads(int threads);

} // namespace tride::kernels
