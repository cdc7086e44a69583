// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "isac/precoder.hpp"

namespace isac {

/// Nearest point of the B-bit phase set {2 pi k / 2^B}; ties go to the smaller k.
CMat quantize_phases(const CMat& analog, int phase_bits);

/// exact: column u is exp(j angle(sum_m conj(p_{m,u}) f_{m,u})), the minimizer of the
/// decomposition residual over unit-modulus F_RF for fixed digital coefficients.
/// weighted_inverse: exp(j angle(sum_m ||F_BB,m||_F^2 F_m F_BB,m^{-1})). Both agree for U = 1 or
/// equal-magnitude coefficients; only exact makes the alternating residual monotone.
enum class AnalogRule { exact, weighted_inverse };

/// Analog update with F_BB,m = diag(digital.row(m)). Throws SingularError on a zero digital
/// coefficient.
CMat analog_update(const std::vector<CMat>& F, const CMat& digital, AnalogRule rule = AnalogRule::exact);

/// Least-squares digital coefficients p_{m,u} = f_RF,u^H f_{m,u} / N_t rescaled to
/// sum |p|^2 = 1 / N_t. An all-zero result is returned unscaled.
CMat digital_update(const std::vector<CMat>& F, const CMat& analog);

/// sum_m ||F_m - F_RF diag(p_m)||_F^2.
double decomposition_residual(const std::vector<CMat>& F, const CMat& analog, const CMat& digital);

struct Decomposition {
    HybridPrecoder precoder;         // quantized analog part, unit total power
    std::vector<double> residuals;   // after each iteration, before quantization
    double final_residual = 0.0;     // after quantization
};

/// Alternates analog_update / digital_update from F_BB = I, quantizes the analog phases once, then
/// refits the digital part and renormalizes.
Decomposition alternating_decompose(const std::vector<CMat>& F, int n_iter, int phase_bits,
                                    AnalogRule rule = AnalogRule::exact);

}  // namespace isac
