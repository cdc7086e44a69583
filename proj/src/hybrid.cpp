// SPDX-License-Identifier: Apache-2.0
#include "isac/hybrid.hpp"

#include <cmath>

namespace isac {

namespace {

void check_stack(const std::vector<CMat>& F, const char* who) {
    if (F.empty()) throw ShapeError(std::string(who) + ": empty precoder list");
    for (const auto& f : F)
        if (f.rows() != F[0].rows() || f.cols() != F[0].cols())
            throw ShapeError(std::string(who) + ": inconsistent precoder shapes");
}

cd unit_phase(cd z) {
    const double a = std::abs(z);
    return a > 0.0 ? z / a : cd(1.0, 0.0);
}

}  // namespace

CMat quantize_phases(const CMat& analog, int phase_bits) {
    if (phase_bits < 1 || phase_bits > 16) throw InvalidArgument("quantize_phases: bits must be in [1,16]");
    const int levels = 1 << phase_bits;
    CMat out(analog.rows(), analog.cols());
    for (Eigen::Index i = 0; i < analog.size(); ++i) {
        const cd z = analog.data()[i];
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < levels; ++k) {
            const double d = std::norm(std::polar(1.0, 2.0 * kPi * k / levels) - z);
            // Strict comparison keeps the smaller index on ties; 1e-12 absorbs rounding.
            if (d < best_d - 1e-12) {
                best_d = d;
                best = k;
            }
        }
        out.data()[i] = std::polar(1.0, 2.0 * kPi * best / levels);
    }
    return out;
}

CMat analog_update(const std::vector<CMat>& F, const CMat& digital, AnalogRule rule) {
    check_stack(F, "analog_update");
    const int M = static_cast<int>(F.size());
    const Eigen::Index U = F[0].cols();
    if (digital.rows() != M || digital.cols() != U) throw ShapeError("analog_update: digital shape");
    CMat acc = CMat::Zero(F[0].rows(), U);
    for (int m = 0; m < M; ++m) {
        const double w = digital.row(m).squaredNorm();
        for (Eigen::Index u = 0; u < U; ++u) {
            const cd p = digital(m, u);
            if (p == cd(0.0, 0.0))
                throw SingularError("analog_update: digital coefficient (m=" + std::to_string(m) +
                                    ", u=" + std::to_string(u) + ") is zero");
            acc.col(u) += (rule == AnalogRule::exact ? std::conj(p) : w / p) * F[m].col(u);
        }
    }
    return acc.unaryExpr([](cd z) { return unit_phase(z); });
}

CMat digital_update(const std::vector<CMat>& F, const CMat& analog) {
    check_stack(F, "digital_update");
    const int M = static_cast<int>(F.size());
    const Eigen::Index U = F[0].cols();
    const double nt = static_cast<double>(analog.rows());
    if (analog.rows() != F[0].rows() || analog.cols() != U) throw ShapeError("digital_update: analog shape");
    CMat p(M, U);
    for (int m = 0; m < M; ++m)
        for (Eigen::Index u = 0; u < U; ++u) p(m, u) = analog.col(u).dot(F[m].col(u)) / nt;
    const double s = p.squaredNorm();
    if (s > 0.0) p *= std::sqrt(1.0 / (nt * s));
    return p;
}

double decomposition_residual(const std::vector<CMat>& F, const CMat& analog, const CMat& digital) {
    double r = 0.0;
    for (std::size_t m = 0; m < F.size(); ++m)
        r += (F[m] - analog * digital.row(static_cast<Eigen::Index>(m)).asDiagonal()).squaredNorm();
    return r;
}

Decomposition alternating_decompose(const std::vector<CMat>& F, int n_iter, int phase_bits,
                                    AnalogRule rule) {
    check_stack(F, "alternating_decompose");
    if (n_iter < 0) throw InvalidArgument("alternating_decompose: n_iter must be >= 0");
    const int M = static_cast<int>(F.size());
    const Eigen::Index U = F[0].cols();
    Decomposition out;
    CMat digital = CMat::Ones(M, U);
    CMat analog = analog_update(F, digital, rule);
    for (int it = 0; it < n_iter; ++it) {
        if (it > 0) analog = analog_update(F, digital, rule);
        digital = digital_update(F, analog);
        out.residuals.push_back(decomposition_residual(F, analog, digital));
        // A zero coefficient would make the next analog step singular; stop at the current point.
        if ((digital.array() == cd(0.0, 0.0)).any()) break;
    }
    out.precoder.analog = quantize_phases(analog, phase_bits);
    out.precoder.digital = digital_update(F, out.precoder.analog);
    out.precoder.normalize_power(1.0);
    out.final_residual = decomposition_residual(F, out.precoder.analog, out.precoder.digital);
    return out;
}

}  // namespace isac
