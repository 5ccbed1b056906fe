#include <gtest/gtest.h>

#include <numbers>

#include "tride/error.hpp"
#include "tride/geometry.hpp"
#include "tride/rng.hpp"

namespace tride {
namespace {

using std::numbers::pi;

TEST(GammaTheta, Examples)
{
    EXPECT_DOUBLE_EQ(gamma_theta(pi), 2.0);
    EXPECT_NEAR(gamma_theta(0.0), 0.0, 1e-15);
    EXPECT_NEAR(gamma_theta(pi / 2), 1.414214, 1e-6);
    EXPECT_THROW(gamma_theta(-0.1), Error);
    EXPECT_THROW(gamma_theta(pi + 0.1), Error);
}

TEST(ClosedFormShift, Examples)
{
    EXPECT_DOUBLE_EQ(closed_form_shift({pi, 1.0, Phase::SIP}), 0.25);
    EXPECT_DOUBLE_EQ(closed_form_shift({pi, 1.0, Phase::ANP}), 0.5);
    EXPECT_NEAR(closed_form_shift({pi / 2, 1.0, Phase::CAP}), 0.707107, 1e-6);
    try {
        closed_form_shift({0.0, 1.0, Phase::ANP});
        FAIL() << "expected a singularity";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Singularity);
    }
}

TEST(ClosedFormShift, Relations)
{
    Rng rng(1);
    double previous_gamma = 0.0, previous_shift = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 200; ++i) {
        const double theta = pi * i / 200.0;
        const double dh = rng.uniform(1e-4, 1.0);
        const double anp = closed_form_shift({theta, dh, Phase::ANP});
        EXPECT_EQ(anp, closed_form_shift({theta, dh, Phase::CAP}));
        EXPECT_DOUBLE_EQ(closed_form_shift({theta, dh, Phase::SIP}), anp / 2);
        // Larger gamma needs a smaller shift for the same change.
        const double g = gamma_theta(theta), unit = closed_form_shift({theta, 1.0, Phase::ANP});
        EXPECT_GT(g, previous_gamma);
        EXPECT_LT(unit, previous_shift);
        previous_gamma = g;
        previous_shift = unit;
    }
}

TEST(ShiftRatio, Examples)
{
    EXPECT_DOUBLE_EQ(shift_ratio(pi, pi), 2.0);
    for (double t : {0.2, 1.0, 2.5})
        EXPECT_NEAR(shift_ratio(t, t), 2.0, 1e-14);
    EXPECT_NEAR(shift_ratio(pi, pi / 2), 2.828427, 1e-6);
    EXPECT_THROW(shift_ratio(pi, 0.0), Error);
}

TEST(Oracle, AgreesWithClosedFormToFirstOrder)
{
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const double theta = rng.uniform(0.3, pi);
        const double dh = rng.uniform(1e-6, 1e-3);
        for (Phase m : {Phase::ANP, Phase::CAP, Phase::SIP}) {
            const TripletGeometry g{theta, dh, m};
            const double measured = numeric_shift_oracle(g).shift;
            const double closed = closed_form_shift(g);
            EXPECT_LT(std::abs(measured - closed) / closed, 1e-3) << to_string(m) << " theta " << theta;
        }
    }
}

TEST(Oracle, SipNeedsHalfTheShift)
{
    for (double theta : {0.5, 1.5, pi}) {
        const double dh = 1e-4;
        const double sip = numeric_shift_oracle({theta, dh, Phase::SIP}).shift;
        EXPECT_NEAR(numeric_shift_oracle({theta, dh, Phase::ANP}).shift / sip, 2.0, 1e-2);
        EXPECT_NEAR(numeric_shift_oracle({theta, dh, Phase::CAP}).shift / sip, 2.0, 1e-2);
    }
}

TEST(Oracle, DegenerateAngleDoesNotConverge)
{
    try {
        numeric_shift_oracle({0.0, 1e-4, Phase::ANP});
        FAIL() << "expected an unbounded shift";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    }
}

TEST(GeometryGrid, CsvRows)
{
    const auto rows = geometry_grid({pi / 2, pi}, 1.0);
    ASSERT_EQ(rows.size(), 6u);
    for (const GeometryRow& r : rows)
        EXPECT_LT(r.rel_error, 1e-3);
    const std::string csv = geometry_csv(rows);
    EXPECT_EQ(csv.rfind("theta,method,delta_h,closed_form,measured,rel_error\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

} // namespace
} // namespace tride
