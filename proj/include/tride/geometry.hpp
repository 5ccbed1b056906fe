#pragma once

#include <string>
#include <vector>

#include "tride/adversary.hpp"

namespace tride {

/// One triplet's angle at the anchor and the hardness change a method must
/// produce. theta is the angle between the anchor-to-negative and
/// anchor-to-positive directions.
struct TripletGeometry {
    double theta = 0.0;
    double delta_h = 0.0;
    Phase method = Phase::SIP;
};

/// 2 cos((pi - theta) / 2): the hardness change per unit shift of one side.
double gamma_theta(double theta);

/// First-order shift each perturbed sample needs to change hardness by
/// delta_h. Throws a singularity error at theta = 0.
double closed_form_shift(const TripletGeometry& g);

/// 2 cos((pi - theta1) / 2) / cos((pi - theta2) / 2).
double shift_ratio(double theta1, double theta2);

struct OracleResult {
    double shift = 0.0;
    std::size_t iterations = 0;
};

/// Places a, p, n in the plane with |ap| = |an| = 1 and the given angle,
/// moves the method's targets along the hardness gradient by a common
/// distance and bisects that distance until the hardness change matches.
/// Throws a numeric error when no finite shift reaches delta_h.
OracleResult numeric_shift_oracle(const TripletGeometry& g, double tolerance = 1e-15);

struct GeometryRow {
    double theta = 0.0;
    Phase method = Phase::SIP;
    double delta_h = 0.0;
    double closed_form = 0.0;
    double measured = 0.0; // oracle at a small probe change, scaled to delta_h
    double rel_error = 0.0;
};

/// Evaluates every (theta, method) pair. The oracle runs at `probe` and is
/// scaled linearly to delta_h, which keeps the comparison first order.
std::vector<GeometryRow> geometry_grid(const std::vector<double>& thetas, double delta_h, double probe = 1e-4);

std::string geometry_csv(const std::vector<GeometryRow>& rows);

} // namespace tride
