// Covered: SINR (closed form, noise-only, term-by-term oracle, phase invariance),
// spectral efficiency, Fisher information vs finite differences, CRLB, utility, returns.
#include "doctest.h"

#include <cmath>

#include "isac/channel.hpp"
#include "isac/metrics.hpp"
#include "oracles.hpp"

using namespace isac;

namespace {

IciBlocks random_blocks(int M, int U, int nt, Rng& rng) {
    IciBlocks h;
    h.n_sub = M;
    for (int i = 0; i < M * M; ++i) {
        CMat b(U, nt);
        for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = complex_normal(rng, 1.0);
        h.blocks.push_back(b);
    }
    return h;
}

std::vector<CMat> random_precoder_blocks(int M, int U, int nt, Rng& rng) {
    std::vector<CMat> F;
    double p = 0.0;
    for (int m = 0; m < M; ++m) {
        CMat f(nt, U);
        for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] = complex_normal(rng, 1.0);
        p += f.squaredNorm();
        F.push_back(f);
    }
    for (auto& f : F) f /= std::sqrt(p);
    return F;
}

CMat random_psd(int n, Rng& rng) {
    CMat a(n, n);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = complex_normal(rng, 1.0);
    return a * a.adjoint();
}

}  // namespace

TEST_CASE("SINR closed form for a matched single-user beam") {
    SystemConfig c = desk_profile();
    c.n_tx = 8;
    c.n_users = 1;
    c.n_rf = 1;
    c.n_sub = 1;
    IciBlocks h;
    h.n_sub = 1;
    const CVec a = steering_vector(0.0, 8);
    h.blocks.push_back(std::sqrt(8.0) * a.transpose());
    std::vector<CMat> F{a};
    const double want = c.total_power_w() / c.noise_comm_w();
    CHECK(sinr(h, F, 0, 0, c.sinr_noise_term()) == doctest::Approx(want).epsilon(1e-12));
    // Matched filter for an arbitrary bearing uses the conjugate response.
    const CVec b = steering_vector(0.4, 8);
    h.blocks[0] = std::sqrt(8.0) * b.transpose();
    std::vector<CMat> G{b.conjugate()};
    CHECK(sinr(h, G, 0, 0, c.sinr_noise_term()) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("SINR noise-only denominator and term-by-term oracle") {
    Rng rng(3);
    const int M = 2, U = 2, nt = 3;
    IciBlocks h = random_blocks(M, U, nt, rng);
    auto F = random_precoder_blocks(M, U, nt, rng);
    const double noise = 0.37;

    auto lone = F;
    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u)
            if (!(m == 0 && u == 0)) lone[m].col(u).setZero();
    const double s00 = std::norm((h.row(0, 0, 0) * lone[0].col(0))(0));
    CHECK(sinr(h, lone, 0, 0, noise) == doctest::Approx(s00 / noise).epsilon(1e-14));

    for (int m = 0; m < M; ++m)
        for (int u = 0; u < U; ++u) {
            double num = 0.0, den = noise;
            for (int k = 0; k < M; ++k)
                for (int i = 0; i < U; ++i) {
                    cd acc = 0.0;
                    for (int a = 0; a < nt; ++a) acc += h.block(m, k)(u, a) * F[k](a, i);
                    const double p = std::norm(acc);
                    if (k == m && i == u) num = p;
                    else den += p;
                }
            CHECK(sinr(h, F, u, m, noise) == doctest::Approx(num / den).epsilon(1e-12));
            CHECK(sinr_table(h, F, noise)(m, u) == doctest::Approx(num / den).epsilon(1e-12));
        }
    CHECK_THROWS_AS(sinr(h, std::vector<CMat>{F[0]}, 0, 0, noise), ShapeError);
}

TEST_CASE("SINR invariant to a common column phase") {
    Rng rng(5);
    IciBlocks h = random_blocks(3, 2, 4, rng);
    auto F = random_precoder_blocks(3, 2, 4, rng);
    const RMat before = sinr_table(h, F, 0.1);
    for (auto& f : F) f.col(1) *= std::polar(1.0, 1.234);
    CHECK((sinr_table(h, F, 0.1) - before).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spectral efficiency") {
    SystemConfig c = desk_profile();
    c.n_sub = 3;
    c.n_users = 2;
    c.n_tx = 4;
    c.symbols_per_subframe = 2;
    Rng rng(8);
    std::vector<IciBlocks> sym{random_blocks(3, 2, 4, rng), random_blocks(3, 2, 4, rng)};
    auto F = random_precoder_blocks(3, 2, 4, rng);
    double acc = 0.0;
    for (const auto& h : sym)
        for (int m = 0; m < 3; ++m)
            for (int u = 0; u < 2; ++u) acc += std::log2(1.0 + sinr(h, F, u, m, c.sinr_noise_term()));
    CHECK(spectral_efficiency(sym, F, c) == doctest::Approx(acc / 2.0).epsilon(1e-12));
    std::vector<CMat> zero(3, CMat::Zero(4, 2));
    CHECK(spectral_efficiency(sym, zero, c) == 0.0);
}

TEST_CASE("Fisher information matches the finite-difference likelihood oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int nt = 1 + trial % 4;
        const int nr = 1 + (trial / 4) % 4;
        const double th = uniform(rng, -1.2, 1.2);
        const CMat R = random_psd(nt, rng);
        const cd alpha = complex_normal(rng, 1.0);
        const double noise = 0.3;
        const auto j = fisher_information_subcarrier(th, R, alpha, noise, nr);
        const double ref = oracle::fd_fisher(th, R, alpha, noise, nr);
        if (nt == 1 && nr == 1) {
            CHECK(j.value == 0.0);
            continue;
        }
        CHECK(std::abs(j.value - ref) <= 1e-3 * std::abs(ref));
    }
    const auto zero = fisher_information_subcarrier(0.1, CMat::Zero(3, 3), 1.0, 1.0, 3);
    CHECK(zero.value == 0.0);
    CHECK(zero.degenerate);
}

TEST_CASE("CRLB behaviour") {
    SystemConfig c = desk_profile();
    c.n_sub = 2;
    c.n_tx = 4;
    c.n_rx = 4;
    Rng rng(17);
    auto F = random_precoder_blocks(2, c.n_users, 4, rng);
    std::vector<cd> alpha{cd(1e-6, 2e-7), cd(-3e-7, 9e-7)};
    const double th = 0.25;
    const double fixed = crlb_fixed(th, F, alpha, c);
    AlphaSampler constant = [&](Rng&) { return alpha; };
    Rng r2(1);
    CHECK(crlb(th, F, constant, 50, r2, c) == doctest::Approx(fixed).epsilon(1e-12));

    SystemConfig c2 = c;
    c2.total_power_dbm += 10.0 * std::log10(2.0);
    CHECK(crlb_fixed(th, F, alpha, c2) == doctest::Approx(fixed / 2.0).epsilon(1e-9));

    std::vector<CMat> zero(2, CMat::Zero(4, c.n_users));
    CHECK(std::isinf(crlb_fixed(th, zero, alpha, c)));
    CHECK(std::isinf(crlb(th, zero, constant, 4, r2, c)));
}

TEST_CASE("CRLB Monte-Carlo converges") {
    SystemConfig c = desk_profile();
    c.n_sub = 2;
    Rng rng(19);
    auto F = random_precoder_blocks(2, c.n_users, c.n_tx, rng);
    const double th = -0.3, d = 40.0;
    AlphaSampler s = [&](Rng& r) {
        double u = uniform(r, 0.0, 1.0);
        while (u <= 0.0) u = uniform(r, 0.0, 1.0);
        const double rcs = c.rcs_sigma * std::sqrt(-2.0 * std::log(u));
        std::vector<cd> a;
        for (int m = 0; m < c.n_sub; ++m)
            a.push_back(reflection_coefficient(c.light_speed, c.subcarrier_freq(m), d, rcs, 0.0));
        return a;
    };
    Rng r1(100), r2(200);
    const double small = crlb(th, F, s, 10000, r1, c);
    const double large = crlb(th, F, s, 1000000, r2, c);
    CHECK(std::abs(small - large) <= 0.02 * large);
}

TEST_CASE("utility and discounted return") {
    UtilityWeights w{1.0, 4.0, 10.0};
    CHECK(isac_utility(2.0, 99.0, w) == doctest::Approx(0.5));
    w.psi = 0.0;
    CHECK(isac_utility(99.0, 5.0, w) == doctest::Approx(0.5));
    for (double psi : {0.0, 0.3, 1.0}) {
        w.psi = psi;
        CHECK(isac_utility(4.0, 10.0, w) == doctest::Approx(1.0));
    }
    CHECK_THROWS_AS(isac_utility(1.0, 1.0, UtilityWeights{0.5, 0.0, 1.0}), InvalidArgument);

    std::vector<double> r{1.0, 1.0, 1.0};
    CHECK(discounted_return(r, 0.5, 0) == doctest::Approx(1.75));
    std::vector<double> q{0.3, -0.7, 2.0, 0.1};
    CHECK(discounted_return(q, 0.0, 1) == doctest::Approx(-0.7));
    CHECK(discounted_return(q, 0.9, 1) == doctest::Approx(-0.7 + 0.9 * 2.0 + 0.81 * 0.1));
}
