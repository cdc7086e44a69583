// SPDX-License-Identifier: Apache-2.0
#include "isac/precoder.hpp"

#include <cmath>

namespace isac {

CMat HybridPrecoder::equivalent(int m) const {
    return analog * digital.row(m).transpose().asDiagonal();
}

std::vector<CMat> HybridPrecoder::equivalent_all() const {
    std::vector<CMat> out;
    out.reserve(static_cast<std::size_t>(n_sub()));
    for (int m = 0; m < n_sub(); ++m) out.push_back(equivalent(m));
    return out;
}

double HybridPrecoder::total_power() const {
    double p = 0.0;
    for (int u = 0; u < n_users(); ++u) p += analog.col(u).squaredNorm() * digital.col(u).squaredNorm();
    return p;
}

void HybridPrecoder::normalize_power(double target) {
    const double p = total_power();
    if (p <= 0.0) return;
    digital *= std::sqrt(target / p);
}

HybridPrecoder random_precoder(int n_tx, int n_users, int n_sub, int phase_bits, Rng& rng) {
    HybridPrecoder f;
    const int levels = 1 << phase_bits;
    std::uniform_int_distribution<int> pick(0, levels - 1);
    f.analog.resize(n_tx, n_users);
    for (int i = 0; i < n_tx; ++i)
        for (int u = 0; u < n_users; ++u)
            f.analog(i, u) = std::polar(1.0, 2.0 * kPi * pick(rng) / levels);
    f.digital = CMat::Constant(n_sub, n_users, cd(1.0, 0.0));
    f.normalize_power(1.0);
    return f;
}

bool phases_on_grid(const CMat& analog, int phase_bits, double tol) {
    const double step = 2.0 * kPi / (1 << phase_bits);
    for (Eigen::Index i = 0; i < analog.size(); ++i) {
        const cd z = analog.data()[i];
        if (std::abs(std::abs(z) - 1.0) > tol) return false;
        const double k = std::arg(z) / step;
        if (std::abs(k - std::round(k)) * step > tol) return false;
    }
    return true;
}

}  // namespace isac
