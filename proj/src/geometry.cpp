// SPDX-License-Identifier: Apache-2.0
#include "isac/geometry.hpp"

#include <cmath>
#include <sstream>

namespace isac {

CVec steering_vector(double theta, int n) {
    if (n < 1) throw InvalidArgument("steering_vector: n must be >= 1");
    CVec a(n);
    const double s = std::sin(theta);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) a[i] = scale * std::polar(1.0, -kPi * i * s);
    return a;
}

CVec steering_vector_derivative(double theta, int n) {
    CVec a = steering_vector(theta, n);
    const double c = std::cos(theta);
    for (int i = 0; i < n; ++i) a[i] *= cd(0.0, -kPi * i * c);
    return a;
}

PolarPosition advance_positions(const PolarPosition& pos, const Velocity& vel, double dt,
                                double min_dist) {
    if (!(pos.dist > 0.0)) throw RangeUnderflow("advance_positions: input range must be > 0");
    const double step = vel.speed * dt;
    if (step == 0.0) return pos;
    // phi = theta - heading + pi; both relations are written in terms of it.
    const double phi = pos.theta - vel.heading + kPi;
    const double d2 = pos.dist * pos.dist + step * step - 2.0 * pos.dist * step * std::cos(phi);
    const double d_new = std::sqrt(std::max(d2, 0.0));
    if (d_new < min_dist) {
        std::ostringstream os;
        os << "advance_positions: range underflow (new range " << d_new << " m)";
        throw RangeUnderflow(os.str());
    }
    // sin(dtheta) = step sin(phi) / d', cos(dtheta) = (d - step cos(phi)) / d'.
    const double dtheta = std::atan2(step * std::sin(phi), pos.dist - step * std::cos(phi));
    return PolarPosition{wrap_angle(pos.theta + dtheta), d_new};
}

double kinematic_residual(const PolarPosition& from, const PolarPosition& to,
                          const Velocity& vel, double dt) {
    const double step = vel.speed * dt;
    const double phi = from.theta - vel.heading + kPi;
    const double r_sin = std::sin(to.theta - from.theta) - step * std::sin(phi) / to.dist;
    const double r_cos = (to.dist * to.dist - from.dist * from.dist) -
                         (step * step - 2.0 * from.dist * step * std::cos(phi));
    return std::max(std::abs(r_sin), std::abs(r_cos) / std::max(1.0, to.dist * to.dist));
}

}  // namespace isac
