#include "tride/kernels.hpp"

#include <cmath>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tride/error.hpp"

namespace tride::kernels {

namespace {

void check_forward(const Matrix& x, const Matrix& w, std::span<const double> b)
{
    if (x.cols() != w.cols() || b.size() != w.rows())
        fail(ErrorKind::Shape, "affine_forward: input width or bias length does not match weights");
}

void check_backward_input(const Matrix& dz, const Matrix& w)
{
    if (dz.cols() != w.rows())
        fail(ErrorKind::Shape, "affine_backward_input: upstream width does not match weights");
}

void check_backward_params(const Matrix& x, const Matrix& dz, const Matrix& dw, std::span<double> db)
{
    if (x.rows() != dz.rows() || dw.rows() != dz.cols() || dw.cols() != x.cols() ||
        db.size() != dz.cols())
        fail(ErrorKind::Shape, "affine_backward_params: shape mismatch");
}

void check_distance(const Matrix& q, const Matrix& g)
{
    if (q.cols() != g.cols())
        fail(ErrorKind::Shape, "distance_matrix: dimension mismatch");
}

// Row kernels shared by both variants so the arithmetic order is identical.

inline void forward_row(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& z,
                        std::size_t r)
{
    const auto in = x.row(r);
    auto out = z.row(r);
    for (std::size_t o = 0; o < w.rows(); ++o) {
        const auto wr = w.row(o);
        double acc = 0.0;
        for (std::size_t i = 0; i < in.size(); ++i)
            acc += wr[i] * in[i];
        out[o] = acc + b[o];
    }
}

inline void backward_input_row(const Matrix& dz, const Matrix& w, Matrix& dx, std::size_t r)
{
    const auto g = dz.row(r);
    auto out = dx.row(r);
    for (std::size_t o = 0; o < w.rows(); ++o) {
        const double go = g[o];
        if (go == 0.0)
            continue;
        const auto wr = w.row(o);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += go * wr[i];
    }
}

inline void backward_params_row(const Matrix& x, const Matrix& dz, Matrix& dw,
                                std::span<double> db, std::size_t o)
{
    auto wrow = dw.row(o);
    for (double& v : wrow)
        v = 0.0;
    double bias = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double go = dz(r, o);
        bias += go;
        if (go == 0.0)
            continue;
        const auto in = x.row(r);
        for (std::size_t i = 0; i < wrow.size(); ++i)
            wrow[i] += go * in[i];
    }
    db[o] = bias;
}

inline void distance_row(const Matrix& q, const Matrix& g, Matrix& d, std::size_t r)
{
    const auto qr = q.row(r);
    for (std::size_t c = 0; c < g.rows(); ++c) {
        const auto gr = g.row(c);
        double acc = 0.0;
        for (std::size_t k = 0; k < qr.size(); ++k) {
            const double diff = qr[k] - gr[k];
            acc += diff * diff;
        }
        d(r, c) = std::sqrt(acc);
    }
}

} // namespace

namespace serial {

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b)
{
    check_forward(x, w, b);
    Matrix z(x.rows(), w.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
        forward_row(x, w, b, z, r);
    return z;
}

Matrix affine_backward_input(const Matrix& dz, const Matrix& w)
{
    check_backward_input(dz, w);
    Matrix dx(dz.rows(), w.cols());
    for (std::size_t r = 0; r < dz.rows(); ++r)
        backward_input_row(dz, w, dx, r);
    return dx;
}

void affine_backward_params(const Matrix& x, const Matrix& dz, Matrix& dw, std::span<double> db)
{
    check_backward_params(x, dz, dw, db);
    for (std::size_t o = 0; o < dz.cols(); ++o)
        backward_params_row(x, dz, dw, db, o);
}

Matrix distance_matrix(const Matrix& q, const Matrix& g)
{
    check_distance(q, g);
    Matrix d(q.rows(), g.rows());
    for (std::size_t r = 0; r < q.rows(); ++r)
        distance_row(q, g, d, r);
    return d;
}

} // namespace serial

namespace omp {

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b)
{
    check_forward(x, w, b);
    Matrix z(x.rows(), w.rows());
    const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r)
        forward_row(x, w, b, z, static_cast<std::size_t>(r));
    return z;
}

Matrix affine_backward_input(const Matrix& dz, const Matrix& w)
{
    check_backward_input(dz, w);
    Matrix dx(dz.rows(), w.cols());
    const auto n = static_cast<std::ptrdiff_t>(dz.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r)
        backward_input_row(dz, w, dx, static_cast<std::size_t>(r));
    return dx;
}

void affine_backward_params(const Matrix& x, const Matrix& dz, Matrix& dw, std::span<double> db)
{
    check_backward_params(x, dz, dw, db);
    const auto n = static_cast<std::ptrdiff_t>(dz.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < n; ++o)
        backward_params_row(x, dz, dw, db, static_cast<std::size_t>(o));
}

Matrix distance_matrix(const Matrix& q, const Matrix& g)
{
    check_distance(q, g);
    Matrix d(q.rows(), g.rows());
    const auto n = static_cast<std::ptrdiff_t>(q.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n; ++r)
        distance_row(q, g, d, static_cast<std::size_t>(r));
    return d;
}

} // namespace omp

void set_threads(int threads)
{
#ifdef _OPENMP
    if (threads > 0)
        omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

} // namespace tride::kernels
