#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "tride/error.hpp"
#include "tride/numcore.hpp"

namespace tride {
namespace {

EmbeddingModel small_model(std::uint64_t seed)
{
    return EmbeddingModel::initialize({6, 8, 7, 4}, seed);
}

TEST(Numcore, ForwardMatchesReference)
{
    Rng rng(11);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const EmbeddingModel model = small_model(seed);
        const Matrix x = oracle::random_matrix(9, 6, rng);
        const Matrix got = forward(model, x);
        const Matrix want = oracle::forward(model, x);
        for (std::size_t i = 0; i < got.size(); ++i)
            EXPECT_NEAR(got.values()[i], want.values()[i], 1e-13);
    }
}

TEST(Numcore, OutputsHaveUnitNorm)
{
    Rng rng(12);
    const Matrix e = forward(small_model(1), oracle::random_matrix(20, 6, rng));
    for (std::size_t r = 0; r < e.rows(); ++r) {
        double n = 0.0;
        for (double v : e.row(r))
            n += v * v;
        EXPECT_NEAR(n, 1.0, 1e-12);
    }
}

TEST(Numcore, InitializationIsSeededAndBounded)
{
    const EmbeddingModel a = small_model(3), b = small_model(3), c = small_model(4);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const Layer& layer : a.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        for (double w : layer.weight.values())
            EXPECT_LE(std::abs(w), limit);
        for (double v : layer.bias)
            EXPECT_EQ(v, 0.0);
    }
    EXPECT_EQ(a.parameter_count(), 6u * 8 + 8 + 8 * 7 + 7 + 7 * 4 + 4);
}

// Scalar probe: sum of upstream .* forward(x).
double probe(const EmbeddingModel& m, const Matrix& x, const Matrix& up)
{
    const Matrix e = oracle::forward(m, x);
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        s += e.values()[i] * up.values()[i];
    return s;
}

TEST(Numcore, InputGradientsMatchFiniteDifferences)
{
    Rng rng(13);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EmbeddingModel model = small_model(seed);
        const Matrix x = oracle::random_matrix(5, 6, rng);
        const Matrix up = oracle::random_matrix(5, 4, rng, -1, 1);
        const GradientBundle g = backward(model, x, up);
        const auto fd = oracle::finite_difference([&](const Matrix& xx) { return probe(model, xx, up); }, x, 1e-5);
        EXPECT_LT(oracle::relative_error(g.input_grads.values(), fd), 1e-4) << "seed " << seed;
    }
}

TEST(Numcore, ParameterGradientsMatchFiniteDifferences)
{
    Rng rng(14);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EmbeddingModel model = small_model(seed);
        const Matrix x = oracle::random_matrix(5, 6, rng);
        const Matrix up = oracle::random_matrix(5, 4, rng, -1, 1);
        const std::vector<double> analytic = flatten_parameters(backward(model, x, up).param_grads);

        std::vector<double> flat = flatten_parameters(model);
        Matrix params(1, flat.size(), flat);
        const auto fd = oracle::finite_difference(
            [&](const Matrix& p) {
                EmbeddingModel m = model;
                assign_parameters(m, p.values());
                return probe(m, x, up);
            },
            params, 1e-5);
        EXPECT_LT(oracle::relative_error(analytic, fd), 1e-4) << "seed " << seed;
    }
}

TEST(Numcore, FlattenAssignRoundTrip)
{
    EmbeddingModel m = small_model(5);
    std::vector<double> flat = flatten_parameters(m);
    ASSERT_EQ(flat.size(), m.parameter_count());
    for (double& v : flat)
        v += 1.0;
    assign_parameters(m, flat);
    EXPECT_EQ(flatten_parameters(m), flat);
    flat.pop_back();
    EXPECT_THROW(assign_parameters(m, flat), Error);
}

TEST(Numcore, CheckpointRoundTripIsExact)
{
    const EmbeddingModel m = small_model(6);
    EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(m)), m);

    const auto path = std::filesystem::temp_directory_path() / "tride_numcore_ckpt.json";
    save_checkpoint(m, path);
    EXPECT_EQ(load_checkpoint(path), m);
    std::filesystem::remove(path);
}

TEST(Numcore, CheckpointErrors)
{
    auto j = checkpoint_to_json(small_model(7));
    j["format_version"] = 999;
    EXPECT_THROW(checkpoint_from_json(j), Error);
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/ckpt.json"), Error);
}

TEST(Numcore, ShapeMismatchThrows)
{
    const EmbeddingModel m = small_model(8);
    EXPECT_THROW(forward(m, Matrix(2, 5)), Error);
    const Matrix x(2, 6, 0.5);
    EXPECT_THROW(backward(m, x, Matrix(2, 3)), Error);
}

TEST(Numcore, ZeroOutputUsesNormFloor)
{
    // All-zero weights give a zero pre-normalization vector; output stays finite.
    EmbeddingModel m = small_model(9);
    std::vector<double> zero(m.parameter_count(), 0.0);
    assign_parameters(m, zero);
    const Matrix x(3, 6, 0.5);
    const Matrix e = forward(m, x);
    EXPECT_TRUE(e.all_finite());
    const GradientBundle g = backward(m, x, Matrix(3, 4, 1.0));
    EXPECT_TRUE(g.input_grads.all_finite());
}

} // namespace
} // namespace tride
