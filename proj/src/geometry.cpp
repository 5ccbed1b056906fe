#include "tride/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "tride/error.hpp"

namespace tride {

namespace {

using Vec2 = std::array<double, 2>;

double dist(const Vec2& x, const Vec2& y)
{
    return std::hypot(x[0] - y[0], x[1] - y[1]);
}

void check_geometry(const TripletGeometry& g)
{
    if (!(g.delta_h > 0.0) || !std::isfinite(g.delta_h))
        fail(ErrorKind::Domain, "hardness change must be positive and finite");
}

} // namespace

double gamma_theta(double theta)
{
    if (!(theta >= 0.0 && theta <= std::numbers::pi))
        fail(ErrorKind::Domain, "angle must lie in [0, pi]");
    return 2.0 * std::cos((std::numbers::pi - theta) / 2.0);
}

double closed_form_shift(const TripletGeometry& g)
{
    check_geometry(g);
    const double gamma = gamma_theta(g.theta);
    if (g.theta == 0.0 || gamma <= 0.0)
        fail(ErrorKind::Singularity, "no shift can change hardness at theta = 0");
    return g.method == Phase::SIP ? g.delta_h / (2.0 * gamma) : g.delta_h / gamma;
}

double shift_ratio(double theta1, double theta2)
{
    const double num = gamma_theta(theta1);
    const double den = gamma_theta(theta2) / 2.0;
    if (theta2 == 0.0 || den <= 0.0)
        fail(ErrorKind::Singularity, "shift ratio undefined at theta2 = 0");
    return num / den;
}

OracleResult numeric_shift_oracle(const TripletGeometry& g, double tolerance)
{
    check_geometry(g);
    gamma_theta(g.theta);
    const Vec2 a0{0.0, 0.0};
    const Vec2 p0{1.0, 0.0};
    const Vec2 n0{std::cos(g.theta), std::sin(g.theta)};
    auto hardness = [](const Vec2& a, const Vec2& p, const Vec2& n) { return dist(a, p) - dist(a, n); };

    // Gradient of hardness with respect to the anchor: e_n - e_p.
    Vec2 u{n0[0] - p0[0], n0[1] - p0[1]};
    const double norm = std::hypot(u[0], u[1]);
    if (norm > 0.0)
        u = {u[0] / norm, u[1] / norm};
    else
        u = {0.0, 1.0};

    const bool move_anchor = g.method != Phase::CAP;
    const bool move_pair = g.method != Phase::ANP;
    const double h0 = hardness(a0, p0, n0);
    auto gain = [&](double delta) {
        Vec2 a = a0, p = p0, n = n0;
        if (move_anchor) {
            a[0] += u[0] * delta;
            a[1] += u[1] * delta;
        }
        if (move_pair) {
            for (Vec2* q : {&p, &n}) {
                (*q)[0] -= u[0] * delta;
                (*q)[1] -= u[1] * delta;
            }
        }
        return hardness(a, p, n) - h0 - g.delta_h;
    };

    OracleResult out;
    double lo = 0.0;
    double hi = g.delta_h;
    while (gain(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++out.iterations > 200 || !std::isfinite(hi))
            fail(ErrorKind::Numeric, "shift oracle did not converge: hardness change unreachable (unbounded shift)");
    }
    while (hi - lo > tolerance * hi && out.iterations < 400) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (gain(mid) < 0.0 ? lo : hi) = mid;
        ++out.iterations;
    }
    out.shift = 0.5 * (lo + hi);
    return out;
}

std::vector<GeometryRow> geometry_grid(const std::vector<double>& thetas, double delta_h, double probe)
{
    if (!(probe > 0.0))
        fail(ErrorKind::Domain, "probe hardness change must be positive");
    std::vector<GeometryRow> rows;
    for (double theta : thetas)
        for (Phase method : {Phase::ANP, Phase::CAP, Phase::SIP}) {
            GeometryRow row;
            row.theta = theta;
            row.method = method;
            row.delta_h = delta_h;
            row.closed_form = closed_form_shift({theta, delta_h, method});
            row.measured = numeric_shift_oracle({theta, probe, method}).shift * (delta_h / probe);
            row.rel_error = std::abs(row.measured - row.closed_form) / row.closed_form;
            rows.push_back(row);
        }
    return rows;
}

std::string geometry_csv(const std::vector<GeometryRow>& rows)
{
    std::string out = "theta,method,delta_h,closed_form,measured,rel_error\n";
    char buf[256];
    for (const GeometryRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g,%.6e\n", r.theta, to_string(r.method), r.delta_h,
                      r.closed_form, r.measured, r.rel_error);
        out += buf;
    }
    return out;
}

} // namespace tride
