// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "isac/common.hpp"

namespace isac {

/// F_m = analog * diag(digital.row(m)). Analog entries are unit-modulus; the
/// digital matrix is M x U with entry (m, u) = p_{m,u}.
struct HybridPrecoder {
    CMat analog;   // N_t x U
    CMat digital;  // M x U

    int n_tx() const { return static_cast<int>(analog.rows()); }
    int n_users() const { return static_cast<int>(analog.cols()); }
    int n_sub() const { return static_cast<int>(digital.rows()); }

    CMat equivalent(int m) const;
    std::vector<CMat> equivalent_all() const;
    /// sum_m ||F_m||_F^2.
    double total_power() const;
    /// Scales the digital part so that total_power() == target. No-op on an all-zero digital part.
    void normalize_power(double target = 1.0);
};

/// Analog part e^{j 2 pi k / 2^B} with uniform k; digital part equal magnitudes, unit power.
HybridPrecoder random_precoder(int n_tx, int n_users, int n_sub, int phase_bits, Rng& rng);

/// True when every analog phase lies on the B-bit grid within tol.
bool phases_on_grid(const CMat& analog, int phase_bits, double tol = 1e-9);

}  // namespace isac
