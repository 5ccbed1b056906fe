#include "tride/metricspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tride/error.hpp"
#include "tride/kernels.hpp"

namespace tride {

namespace {

void check_aligned(const Matrix& x, const Matrix& y)
{
    if (x.rows() == 0 || y.rows() == 0)
        fail(ErrorKind::EmptyBatch, "metric over an empty batch");
    if (x.rows() != y.rows() || x.cols() != y.cols())
        fail(ErrorKind::Shape, "aligned batches differ in shape");
}

void check_triplet(const Matrix& a, const Matrix& p, const Matrix& n)
{
    check_aligned(a, p);
    check_aligned(a, n);
}

/// Adds coef * d(x_i, y_i)/d(x_i) into gx and the mirror into gy. Zero-length
/// pairs contribute nothing (subgradient 0).
void add_pair_grad(const Matrix& x, const Matrix& y, std::size_t i, double dist, double coef, Matrix& gx,
                   Matrix& gy)
{
    if (dist <= 0.0 || coef == 0.0)
        return;
    const auto xr = x.row(i);
    const auto yr = y.row(i);
    auto gxr = gx.row(i);
    auto gyr = gy.row(i);
    for (std::size_t c = 0; c < xr.size(); ++c) {
        const double u = coef * (xr[c] - yr[c]) / dist;
        gxr[c] += u;
        gyr[c] -= u;
    }
}

} // namespace

double pair_distance(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        fail(ErrorKind::Shape, "pair_distance dimension mismatch");
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        const double d = x[c] - y[c];
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<double> aligned_distances(const Matrix& x, const Matrix& y)
{
    check_aligned(x, y);
    std::vector<double> d(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        d[i] = pair_distance(x.row(i), y.row(i));
    return d;
}

double batch_distance(const Matrix& x, const Matrix& y)
{
    const auto d = aligned_distances(x, y);
    double sum = 0.0;
    for (double v : d)
        sum += v;
    return sum / static_cast<double>(d.size());
}

PairGradient batch_distance_grad(const Matrix& x, const Matrix& y)
{
    const auto d = aligned_distances(x, y);
    PairGradient g{0.0, Matrix(x.rows(), x.cols()), Matrix(y.rows(), y.cols())};
    const double inv = 1.0 / static_cast<double>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        g.value += d[i];
        add_pair_grad(x, y, i, d[i], inv, g.x, g.y);
    }
    g.value *= inv;
    return g;
}

PairGradient subset_distance_grad(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows)
{
    check_aligned(x, y);
    if (rows.empty())
        fail(ErrorKind::EmptyBatch, "subset distance over no rows");
    PairGradient g{0.0, Matrix(x.rows(), x.cols()), Matrix(y.rows(), y.cols())};
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i : rows) {
        if (i >= x.rows())
            fail(ErrorKind::Shape, "subset row out of range");
        const double d = pair_distance(x.row(i), y.row(i));
        g.value += d;
        add_pair_grad(x, y, i, d, inv, g.x, g.y);
    }
    g.value *= inv;
    return g;
}

double hardness(const Matrix& a, const Matrix& p, const Matrix& n)
{
    check_triplet(a, p, n);
    return batch_distance(a, p) - batch_distance(a, n);
}

double hardness(const TripletBatch& batch)
{
    return hardness(batch.emb_a, batch.emb_p, batch.emb_n);
}

TripletGradient hardness_grad(const Matrix& a, const Matrix& p, const Matrix& n)
{
    check_triplet(a, p, n);
    PairGradient ap = batch_distance_grad(a, p);
    PairGradient an = batch_distance_grad(a, n);
    TripletGradient g{ap.value - an.value, std::move(ap.x), std::move(ap.y), std::move(an.y)};
    auto ga = g.a.values();
    const auto gan = an.x.values();
    for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] -= gan[i];
    for (double& v : g.n.values())
        v = -v;
    return g;
}

double triplet_loss(const Matrix& a, const Matrix& p, const Matrix& n, const MetricConfig& cfg)
{
    const double raw = hardness(a, p, n) + cfg.margin;
    return cfg.hinge ? std::max(raw, 0.0) : raw;
}

double triplet_loss(const TripletBatch& batch, const MetricConfig& cfg)
{
    return triplet_loss(batch.emb_a, batch.emb_p, batch.emb_n, cfg);
}

TripletGradient triplet_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, const MetricConfig& cfg)
{
    TripletGradient g = hardness_grad(a, p, n);
    g.value += cfg.margin;
    if (cfg.hinge && g.value <= 0.0) {
        g.value = 0.0;
        for (Matrix* m : {&g.a, &g.p, &g.n})
            std::ranges::fill(m->values(), 0.0);
    }
    return g;
}

double proximity_weight(double d, double d_min, double lambda)
{
    if (d < d_min)
        fail(ErrorKind::Precondition, "proximity_weight requires d >= d_min");
    return std::exp(-lambda * (d - d_min));
}

double weighted_distance(const Matrix& a, const Matrix& x, double lambda)
{
    return weighted_distance_grad(a, x, lambda).value;
}

PairGradient weighted_distance_grad(const Matrix& a, const Matrix& x, double lambda)
{
    const auto d = aligned_distances(a, x);
    const double d_min = *std::ranges::min_element(d);
    std::vector<double> w(d.size());
    double wsum = 0.0;
    double num = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        w[i] = proximity_weight(d[i], d_min, lambda);
        wsum += w[i];
        num += w[i] * d[i];
    }
    PairGradient g{num / wsum, Matrix(a.rows(), a.cols()), Matrix(x.rows(), x.cols())};
    for (std::size_t i = 0; i < d.size(); ++i)
        add_pair_grad(a, x, i, d[i], w[i] / wsum, g.x, g.y);
    return g;
}

double collapseness(const Matrix& a, const Matrix& p, const Matrix& n, double lambda)
{
    check_triplet(a, p, n);
    return weighted_distance(a, p, lambda) - weighted_distance(a, n, lambda);
}

double collapseness(const TripletBatch& batch, double lambda)
{
    return collapseness(batch.emb_a, batch.emb_p, batch.emb_n, lambda);
}

TripletGradient collapseness_grad(const Matrix& a, const Matrix& p, const Matrix& n, double lambda)
{
    check_triplet(a, p, n);
    PairGradient ap = weighted_distance_grad(a, p, lambda);
    PairGradient an = weighted_distance_grad(a, n, lambda);
    TripletGradient g{ap.value - an.value, std::move(ap.x), std::move(ap.y), std::move(an.y)};
    auto ga = g.a.values();
    const auto gan = an.x.values();
    for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] -= gan[i];
    for (double& v : g.n.values())
        v = -v;
    return g;
}

double separability(const Matrix& a, const Matrix& p, const Matrix& n, double d_bar)
{
    if (!(d_bar > 0.0))
        fail(ErrorKind::Degenerate, "separability needs d_bar > 0");
    check_triplet(a, p, n);
    return (batch_distance(a, n) - batch_distance(a, p)) / d_bar;
}

double separability(const TripletBatch& batch, double d_bar)
{
    return separability(batch.emb_a, batch.emb_p, batch.emb_n, d_bar);
}

double mean_pairwise_distance(const Matrix& embeddings)
{
    const std::size_t n = embeddings.rows();
    if (n < 2)
        fail(ErrorKind::Degenerate, "mean pairwise distance needs at least two samples");
    const Matrix d = kernels::omp::distance_matrix(embeddings, embeddings);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            sum += d(i, j);
    return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

double entanglement(double d_intra, double d_inter)
{
    if (!(d_inter > 0.0))
        fail(ErrorKind::Degenerate, "entanglement needs a positive inter-class distance");
    return d_intra / d_inter;
}

ClassDistances class_distances(const Matrix& embeddings, std::span<const int> labels)
{
    if (labels.size() != embeddings.rows())
        fail(ErrorKind::Shape, "class_distances: one label per embedding required");
    const Matrix d = kernels::omp::distance_matrix(embeddings, embeddings);
    double intra = 0.0, inter = 0.0;
    std::size_t n_intra = 0, n_inter = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) {
                intra += d(i, j);
                ++n_intra;
            } else {
                inter += d(i, j);
                ++n_inter;
            }
        }
    if (n_intra == 0 || n_inter == 0)
        fail(ErrorKind::Degenerate, "class_distances needs intra- and inter-class pairs");
    return {intra / static_cast<double>(n_intra), inter / static_cast<double>(n_inter)};
}

} // namespace tride
