// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "isac/common.hpp"

namespace isac {

/// Polar position relative to the array; theta in (-pi/2, pi/2), dist > 0.
struct PolarPosition {
    double theta = 0.0;
    double dist = 1.0;
};

/// Heading uses the same angular reference as PolarPosition::theta.
struct Velocity {
    double speed = 0.0;
    double heading = 0.0;
};

/// ULA response: entry i is exp(-j i pi sin(theta)) / sqrt(n), i = 0..n-1.
CVec steering_vector(double theta, int n);

/// Derivative of steering_vector with respect to theta.
CVec steering_vector_derivative(double theta, int n);

/// Kinematic update over dt: the sine relation fixes the bearing change and the
/// law of cosines fixes the range. Throws RangeUnderflow if the new range
/// falls below `min_dist`.
PolarPosition advance_positions(const PolarPosition& pos, const Velocity& vel, double dt,
                                double min_dist = 1e-9);

/// Residual of the two kinematic relations for a recorded transition.
double kinematic_residual(const PolarPosition& from, const PolarPosition& to,
                          const Velocity& vel, double dt);

inline double wrap_angle(double a) {
    return std::remainder(a, 2.0 * kPi);
}

}  // namespace isac
