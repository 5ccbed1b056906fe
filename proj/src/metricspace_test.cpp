#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tride/error.hpp"
#include "tride/metricspace.hpp"

namespace tride {
namespace {

// Unit vector on the circle whose chord distance to (1, 0) is d.
std::vector<double> at_distance(double d)
{
    const double phi = 2.0 * std::asin(d / 2.0);
    return {std::cos(phi), std::sin(phi)};
}

Matrix rows(const std::vector<std::vector<double>>& r)
{
    Matrix m(r.size(), r.front().size());
    for (std::size_t i = 0; i < r.size(); ++i)
        std::copy(r[i].begin(), r[i].end(), m.row(i).begin());
    return m;
}

const std::vector<double> kOrigin = {1.0, 0.0};

Matrix random_unit(std::size_t n, std::size_t dim, Rng& rng)
{
    Matrix m(n, dim);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (double& v : m.row(r)) {
            v = rng.normal();
            s += v * v;
        }
        for (double& v : m.row(r))
            v /= std::sqrt(s);
    }
    return m;
}

TEST(PairDistance, Examples)
{
    const std::vector<double> x = {1, 0}, anti = {-1, 0}, orth = {0, 1};
    EXPECT_EQ(pair_distance(x, x), 0.0);
    EXPECT_DOUBLE_EQ(pair_distance(x, anti), 2.0);
    EXPECT_NEAR(pair_distance(x, orth), 1.414214, 1e-6);
    EXPECT_THROW(pair_distance(x, std::vector<double>{1, 0, 0}), Error);
}

TEST(BatchDistance, Examples)
{
    const Matrix a = rows({kOrigin, kOrigin});
    const Matrix b = rows({at_distance(0.4), at_distance(0.8)});
    EXPECT_NEAR(batch_distance(a, b), 0.6, 1e-12);
    EXPECT_EQ(batch_distance(a, a), 0.0);
    EXPECT_NEAR(batch_distance(rows({kOrigin}), rows({at_distance(0.4)})), 0.4, 1e-12);
    EXPECT_THROW(batch_distance(Matrix(0, 2), Matrix(0, 2)), Error);
}

TEST(TripletLoss, Examples)
{
    const Matrix a = rows({kOrigin});
    MetricConfig cfg;
    EXPECT_NEAR(triplet_loss(a, rows({at_distance(0.5)}), rows({at_distance(0.3)}), cfg), 0.4, 1e-12);
    EXPECT_NEAR(triplet_loss(a, rows({at_distance(0.5)}), rows({at_distance(0.5)}), cfg), 0.2, 1e-12);
    EXPECT_EQ(triplet_loss(a, rows({at_distance(0.1)}), rows({at_distance(0.9)}), cfg), 0.0);
    cfg.hinge = false;
    EXPECT_NEAR(triplet_loss(a, rows({at_distance(0.1)}), rows({at_distance(0.9)}), cfg), -0.6, 1e-12);
    EXPECT_THROW(triplet_loss(Matrix(0, 2), Matrix(0, 2), Matrix(0, 2), cfg), Error);
}

TEST(TripletLoss, HingeProperty)
{
    Rng rng(21);
    MetricConfig on, off;
    off.hinge = false;
    for (int t = 0; t < 200; ++t) {
        const Matrix a = random_unit(4, 3, rng), p = random_unit(4, 3, rng), n = random_unit(4, 3, rng);
        const double raw = triplet_loss(a, p, n, off);
        const double clamped = triplet_loss(a, p, n, on);
        EXPECT_GE(clamped, 0.0);
        if (raw >= 0.0)
            EXPECT_EQ(clamped, raw);
    }
}

TEST(Hardness, Examples)
{
    const Matrix a = rows({kOrigin});
    const Matrix anti = rows({{-1.0, 0.0}});
    EXPECT_EQ(hardness(a, a, a), 0.0);
    EXPECT_DOUBLE_EQ(hardness(a, a, anti), -2.0);
    EXPECT_DOUBLE_EQ(hardness(a, anti, a), 2.0);
}

TEST(Hardness, RangeProperty)
{
    Rng rng(22);
    for (int t = 0; t < 500; ++t) {
        const double h = hardness(random_unit(3, 4, rng), random_unit(3, 4, rng), random_unit(3, 4, rng));
        EXPECT_GE(h, -2.0);
        EXPECT_LE(h, 2.0);
    }
}

TEST(ProximityWeight, Examples)
{
    EXPECT_EQ(proximity_weight(0.3, 0.3, 10.0), 1.0);
    EXPECT_EQ(proximity_weight(1.7, 0.3, 0.0), 1.0);
    EXPECT_NEAR(proximity_weight(0.4, 0.3, 10.0), 0.367879, 1e-6);
    EXPECT_THROW(proximity_weight(0.2, 0.3, 1.0), Error);
}

TEST(WeightedDistance, Examples)
{
    const Matrix a = rows({kOrigin, kOrigin});
    const Matrix x = rows({at_distance(0.1), at_distance(0.3)});
    const double w = std::exp(-2.0);
    EXPECT_NEAR(weighted_distance(a, x, 10.0), (0.1 + 0.3 * w) / (1.0 + w), 1e-12);
    EXPECT_NEAR(weighted_distance(a, x, 10.0), 0.12384, 1e-5);
    EXPECT_NEAR(weighted_distance(a, x, 0.0), batch_distance(a, x), 1e-15);
    const Matrix same = rows({at_distance(0.7), at_distance(0.7)});
    EXPECT_NEAR(weighted_distance(a, same, 25.0), 0.7, 1e-12);
    EXPECT_THROW(weighted_distance(Matrix(0, 2), Matrix(0, 2), 1.0), Error);
}

TEST(WeightedDistance, BoundedAndMonotoneInLambda)
{
    Rng rng(23);
    for (int t = 0; t < 200; ++t) {
        const Matrix a = random_unit(6, 3, rng), x = random_unit(6, 3, rng);
        const auto d = oracle::distances(a, x);
        const double lo = *std::min_element(d.begin(), d.end());
        const double hi = *std::max_element(d.begin(), d.end());
        double previous = std::numeric_limits<double>::infinity();
        for (double lambda : {0.0, 0.5, 2.0, 10.0, 100.0}) {
            const double w = weighted_distance(a, x, lambda);
            EXPECT_GE(w, lo - 1e-15);
            EXPECT_LE(w, hi + 1e-15);
            EXPECT_LE(w, previous + 1e-15);
            previous = w;
        }
    }
}

TEST(Collapseness, FallsBackToHardnessWithoutAttention)
{
    Rng rng(24);
    for (int t = 0; t < 1000; ++t) {
        const Matrix a = random_unit(5, 4, rng), p = random_unit(5, 4, rng), n = random_unit(5, 4, rng);
        EXPECT_EQ(collapseness(a, p, n, 0.0), hardness(a, p, n));
    }
}

TEST(Collapseness, MatchesReference)
{
    Rng rng(25);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = random_unit(7, 5, rng), p = random_unit(7, 5, rng), n = random_unit(7, 5, rng);
        const auto dp = oracle::distances(a, p), dn = oracle::distances(a, n);
        const double want = oracle::weighted_mean(dp, oracle::proximity_weights(dp, 10.0)) -
                            oracle::weighted_mean(dn, oracle::proximity_weights(dn, 10.0));
        EXPECT_NEAR(collapseness(a, p, n, 10.0), want, 1e-13);
    }
    const Matrix a = rows({kOrigin});
    EXPECT_EQ(collapseness(a, a, a, 10.0), 0.0);
}

TEST(Collapseness, GradientWithFrozenWeights)
{
    Rng rng(26);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = random_unit(5, 4, rng), p = random_unit(5, 4, rng), n = random_unit(5, 4, rng);
        const double lambda = 10.0;
        const auto wp = oracle::proximity_weights(oracle::distances(a, p), lambda);
        const auto wn = oracle::proximity_weights(oracle::distances(a, n), lambda);
        const TripletGradient g = collapseness_grad(a, p, n, lambda);
        EXPECT_NEAR(g.value, collapseness(a, p, n, lambda), 1e-14);
        const auto frozen = [&](const Matrix& aa, const Matrix& pp, const Matrix& nn) {
            return oracle::weighted_mean(oracle::distances(aa, pp), wp) -
                   oracle::weighted_mean(oracle::distances(aa, nn), wn);
        };
        const auto fa = oracle::finite_difference([&](const Matrix& x) { return frozen(x, p, n); }, a, 1e-6);
        const auto fp = oracle::finite_difference([&](const Matrix& x) { return frozen(a, x, n); }, p, 1e-6);
        const auto fn = oracle::finite_difference([&](const Matrix& x) { return frozen(a, p, x); }, n, 1e-6);
        EXPECT_LT(oracle::relative_error(g.a.values(), fa), 1e-6);
        EXPECT_LT(oracle::relative_error(g.p.values(), fp), 1e-6);
        EXPECT_LT(oracle::relative_error(g.n.values(), fn), 1e-6);
    }
}

TEST(TripletLoss, GradientMatchesFiniteDifferences)
{
    Rng rng(27);
    MetricConfig cfg;
    cfg.hinge = false;
    const Matrix a = random_unit(4, 3, rng), p = random_unit(4, 3, rng), n = random_unit(4, 3, rng);
    const TripletGradient g = triplet_loss_grad(a, p, n, cfg);
    const auto fa = oracle::finite_difference([&](const Matrix& x) { return triplet_loss(x, p, n, cfg); }, a, 1e-6);
    EXPECT_LT(oracle::relative_error(g.a.values(), fa), 1e-6);
}

TEST(Separability, Examples)
{
    const Matrix a = rows({kOrigin});
    const Matrix p = rows({at_distance(0.2)}), n = rows({at_distance(0.6)});
    EXPECT_NEAR(separability(a, p, n, 0.4), 1.0, 1e-12);
    EXPECT_EQ(separability(a, p, p, 0.4), 0.0);
    EXPECT_NEAR(separability(a, n, p, 0.4), -1.0, 1e-12);
    EXPECT_THROW(separability(a, p, n, 0.0), Error);
}

TEST(Separability, ScaleInvariant)
{
    // Doubling every distance and d_bar leaves the value unchanged.
    const Matrix a = rows({kOrigin});
    const double s1 = separability(a, rows({at_distance(0.2)}), rows({at_distance(0.5)}), 0.3);
    const double s2 = separability(a, rows({at_distance(0.4)}), rows({at_distance(1.0)}), 0.6);
    EXPECT_NEAR(s1, s2, 1e-12);
}

TEST(MeanPairwiseDistance, Examples)
{
    EXPECT_EQ(mean_pairwise_distance(rows({kOrigin, kOrigin, kOrigin})), 0.0);
    EXPECT_DOUBLE_EQ(mean_pairwise_distance(rows({kOrigin, {-1.0, 0.0}})), 2.0);
    EXPECT_NEAR(mean_pairwise_distance(rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})), std::numbers::sqrt2, 1e-15);
    EXPECT_THROW(mean_pairwise_distance(rows({kOrigin})), Error);
}

TEST(Entanglement, Examples)
{
    EXPECT_NEAR(entanglement(0.226, 0.287), 0.79, 0.005);
    EXPECT_NEAR(entanglement(0.438, 0.664), 0.66, 0.005);
    EXPECT_EQ(entanglement(0.0, 0.5), 0.0);
    EXPECT_THROW(entanglement(0.3, 0.0), Error);
}

TEST(ClassDistances, SplitsIntraAndInter)
{
    const Matrix e = rows({{1, 0}, {1, 0}, {-1, 0}, {-1, 0}});
    const std::vector<int> labels = {0, 0, 1, 1};
    const ClassDistances cd = class_distances(e, labels);
    EXPECT_EQ(cd.intra, 0.0);
    EXPECT_DOUBLE_EQ(cd.inter, 2.0);
}

} // namespace
} // namespace tride
