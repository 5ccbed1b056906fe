#pragma once

#include <span>
#include <vector>

#include "tride/matrix.hpp"

namespace tride {

/// Index triples over a dataset plus their current inputs and embeddings.
struct TripletBatch {
    std::vector<std::size_t> anchors;
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;

    Matrix inputs_a, inputs_p, inputs_n;
    Matrix emb_a, emb_p, emb_n;
    /// Unperturbed anchor inputs (A0) and their embeddings.
    Matrix original_a;
    Matrix emb_original_a;

    std::size_t size() const noexcept { return inputs_a.rows(); }
};

struct MetricConfig {
    double margin = 0.2;  // beta_T
    double lambda = 10.0; // attention factor
    bool hinge = true;
};

/// A scalar over (A, P, N) embeddings and its gradient with respect to each.
struct TripletGradient {
    double value = 0.0;
    Matrix a, p, n;
};

/// A scalar over two aligned embedding batches and its gradient.
struct PairGradient {
    double value = 0.0;
    Matrix x, y;
};

double pair_distance(std::span<const double> x, std::span<const double> y);
std::vector<double> aligned_distances(const Matrix& x, const Matrix& y);

/// Mean aligned-pair distance.
double batch_distance(const Matrix& x, const Matrix& y);
PairGradient batch_distance_grad(const Matrix& x, const Matrix& y);

/// Mean distance over the selected aligned pairs only.
PairGradient subset_distance_grad(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows);

double triplet_loss(const Matrix& a, const Matrix& p, const Matrix& n, const MetricConfig& cfg);
double triplet_loss(const TripletBatch& batch, const MetricConfig& cfg);
TripletGradient triplet_loss_grad(const Matrix& a, const Matrix& p, const Matrix& n, const MetricConfig& cfg);

/// d(A,P) - d(A,N), in [-2, 2] for unit embeddings.
double hardness(const Matrix& a, const Matrix& p, const Matrix& n);
double hardness(const TripletBatch& batch);
TripletGradient hardness_grad(const Matrix& a, const Matrix& p, const Matrix& n);

/// exp(-lambda (d - d_min)).
double proximity_weight(double d, double d_min, double lambda);

/// Anchor-proximity weighted mean of aligned distances; d_min is the batch minimum.
double weighted_distance(const Matrix& a, const Matrix& x, double lambda);
/// Gradient with the proximity weights held at their current values.
PairGradient weighted_distance_grad(const Matrix& a, const Matrix& x, double lambda);

/// d_w(A,P) - d_w(A,N). Positive values signal an impending collapse.
double collapseness(const Matrix& a, const Matrix& p, const Matrix& n, double lambda);
double collapseness(const TripletBatch& batch, double lambda);
TripletGradient collapseness_grad(const Matrix& a, const Matrix& p, const Matrix& n, double lambda);

/// (d(A,N) - d(A,P)) / d_bar.
double separability(const Matrix& a, const Matrix& p, const Matrix& n, double d_bar);
double separability(const TripletBatch& batch, double d_bar);

/// Mean distance over all unordered pairs of rows.
double mean_pairwise_distance(const Matrix& embeddings);

/// d_intra / d_inter.
double entanglement(double d_intra, double d_inter);

struct ClassDistances {
    double intra = 0.0;
    double inter = 0.0;
};

/// Mean intra-class and inter-class distances over all unordered pairs.
ClassDistances class_distances(const Matrix& embeddings, std::span<const int> labels);

} // namespace tride
