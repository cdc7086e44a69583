// Covered: the interior-point kernel, the inner SDP against the minimax eigenvalue oracle, zero
// power, residuals, infeasibility, the outer tau search against random feasible precoders,
// rank-one restoration, analog/digital updates, quantization, alternating decomposition and
// the performance boundaries.
#include "doctest.h"

#include <cmath>

#include "isac/channel.hpp"
#include "isac/geometry.hpp"
#include "isac/hybrid.hpp"
#include "isac/metrics.hpp"
#include "isac/scenario.hpp"
#include "isac/sdp.hpp"
#include "isac/sdr.hpp"
#include "oracles.hpp"

using namespace isac;

namespace {

SystemConfig small_config(int nt, int U, int M) {
    SystemConfig c = desk_profile();
    c.n_tx = nt;
    c.n_rx = nt;
    c.n_users = U;
    c.n_rf = U;
    c.n_sub = M;
    return c;
}

IciBlocks random_blocks(int M, int U, int nt, Rng& rng, double ici = 0.1) {
    IciBlocks h;
    h.n_sub = M;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < M; ++k) {
            CMat b(U, nt);
            const double var = m == k ? 1.0 : ici * ici;
            for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = complex_normal(rng, var);
            h.blocks.push_back(b);
        }
    return h;
}

std::vector<cd> echo(const SystemConfig& c, double dist, double rcs) {
    std::vector<cd> a;
    for (int m = 0; m < c.n_sub; ++m)
        a.push_back(reflection_coefficient(c.light_speed, c.subcarrier_freq(m), dist, rcs, 0.3 * m));
    return a;
}

SdrProblem random_problem(const SystemConfig& c, Rng& rng, double psi) {
    const IciBlocks h = random_blocks(c.n_sub, c.n_users, c.n_tx, rng);
    const double th = uniform(rng, -1.0, 1.0);
    return make_sdr_problem(h, th, echo(c, uniform(rng, 20.0, 80.0), 10.0), c, UtilityWeights{psi, 1.0, 1.0});
}

std::vector<CMat> random_unit_precoder(int M, int U, int nt, Rng& rng) {
    std::vector<CMat> F;
    double p = 0.0;
    for (int m = 0; m < M; ++m) {
        CMat f(nt, U);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = complex_normal(rng, 1.0);
        p += f.squaredNorm();
        F.push_back(f);
    }
    for (auto& f : F) f /= std::sqrt(p);
    return F;
}

CMat random_psd(int n, int rank, Rng& rng) {
    CMat a(n, rank);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = complex_normal(rng, 1.0);
    return a * a.adjoint();
}

}  // namespace

TEST_CASE("interior point: largest eigenvalue and a small LP") {
    Rng rng(1);
    for (int n : {1, 3, 6}) {
        const CMat A = random_psd(n, n, rng);
        sdp::Problem p;
        p.add_block(n);
        p.b = RVec::Ones(1);
        p.add_entry(0, 0, CMat::Identity(n, n), RVec::Ones(n));
        p.C[0] = -A;
        const auto r = sdp::solve(p);
        REQUIRE(r.status == sdp::Status::optimal);
        const double lmax = Eigen::SelfAdjointEigenSolver<CMat>(A).eigenvalues().maxCoeff();
        CHECK(-r.primal_obj == doctest::Approx(lmax).epsilon(1e-7));
    }
    // min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0 -> 1.
    sdp::Problem lp;
    const int a = lp.add_block(1), b = lp.add_block(1);
    lp.b = RVec::Ones(1);
    lp.add_rank1(a, 0, CVec::Ones(1), 1.0);
    lp.add_rank1(b, 0, CVec::Ones(1), 1.0);
    lp.C[a] = CMat::Constant(1, 1, 1.0);
    lp.C[b] = CMat::Constant(1, 1, 2.0);
    const auto r = sdp::solve(lp);
    REQUIRE(r.status == sdp::Status::optimal);
    CHECK(r.primal_obj == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r.X[b](0, 0).real() == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("inner SDP without SINR target matches the minimax eigenvalue oracle") {
    Rng rng(2);
    for (int nt : {2, 4, 8}) {
        const SystemConfig c = small_config(nt, 1, 1);
        SdrProblem p = random_problem(c, rng, 0.0);
        const auto s = solve_inner_sdp(p, 0.0);
        REQUIRE(s.ok());
        const double want = p.sense_scale[0] * oracle::max_unit_fisher(p.A, p.dA);
        CHECK(std::abs(s.zeta - want) <= 1e-6 * want);
        CHECK(s.gap <= 1e-6);
        CHECK(sensing_values(p, s.W)[0] == doctest::Approx(s.zeta).epsilon(1e-6));
    }
}

TEST_CASE("zero power budget gives zero beams") {
    Rng rng(3);
    SdrProblem p = random_problem(small_config(4, 2, 2), rng, 0.0);
    p.power_budget = 0.0;
    const auto s = solve_inner_sdp(p, 0.0);
    CHECK(s.ok());
    CHECK(s.zeta == 0.0);
    for (const auto& w : s.W) CHECK(w.norm() == 0.0);
    CHECK(solve_inner_sdp(p, 0.5).status == SdrStatus::infeasible);
}

TEST_CASE("inner SDP residuals, duality gap and infeasible targets") {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        SdrProblem p = random_problem(small_config(4, 2, 3), rng, 0.0);
        const double tmax = max_common_sinr(p);
        REQUIRE(tmax > 0.0);
        CHECK(sinr_margin(p, 0.99 * tmax) > 0.0);
        CHECK(sinr_margin(p, 1.01 * tmax) < 0.0);
        for (double frac : {0.0, 0.5, 0.99}) {
            const auto s = solve_inner_sdp(p, frac * tmax);
            REQUIRE(s.ok());
            CHECK(s.gap <= 1e-6);
            CHECK(constraint_residuals(p, s.W, s.tau, s.zeta).max() <= 1e-7);
        }
        const auto bad = solve_inner_sdp(p, 1.05 * tmax);
        CHECK(bad.status == SdrStatus::infeasible);
    }
}

TEST_CASE("outer search: pure sensing and pure communication") {
    Rng rng(5);
    SdrProblem p = random_problem(small_config(4, 2, 2), rng, 0.0);
    const auto b = compute_boundaries(p);
    p.weights = UtilityWeights{0.0, b.se_bound, b.fisher_bound};
    const auto s0 = solve_digital_sdr(p);
    CHECK(s0.tau == 0.0);
    CHECK(s0.omega == doctest::Approx(1.0).epsilon(1e-9));
    p.weights.psi = 1.0;
    const auto s1 = solve_digital_sdr(p, {}, b.tau_max);
    REQUIRE(s1.ok());
    SdrOptions o;
    CHECK(s1.tau == doctest::Approx(b.tau_max * (1.0 - o.tau_margin)).epsilon(1e-12));
    CHECK(s1.omega == doctest::Approx(p.n_users * p.n_sub * std::log2(1.0 + s1.tau) / b.se_bound));
}

TEST_CASE("outer search dominates 1e5 random feasible precoders") {
    Rng rng(6);
    const SystemConfig c = small_config(4, 2, 2);
    const IciBlocks h = random_blocks(2, 2, 4, rng);
    const double th = 0.4;
    const auto alpha = echo(c, 40.0, 10.0);
    SdrProblem p = make_sdr_problem(h, th, alpha, c, UtilityWeights{0.5, 1.0, 1.0});
    const auto b = compute_boundaries(p);
    p.weights = UtilityWeights{0.5, b.se_bound, b.fisher_bound};
    const auto s = solve_digital_sdr(p, {}, b.tau_max);
    REQUIRE(s.ok());
    CHECK(s.omega == doctest::Approx(sdr_objective(p, s.tau, s.zeta)));

    double best = -1.0;
    for (int n = 0; n < 100000; ++n) {
        const auto F = random_unit_precoder(2, 2, 4, rng);
        const double tau = sinr_table(h, F, c.sinr_noise_term()).minCoeff();
        double zeta = std::numeric_limits<double>::infinity();
        for (int m = 0; m < 2; ++m)
            zeta = std::min(zeta, fisher_information_subcarrier(th, transmit_covariance(F[m], c), alpha[m],
                                                                c.noise_sense_w(), c.n_rx)
                                      .value);
        best = std::max(best, 0.5 * 4.0 * std::log2(1.0 + tau) / b.se_bound + 0.5 * 2.0 * zeta / b.fisher_bound);
    }
    CHECK(s.omega >= best);
}

TEST_CASE("rank-one restoration") {
    Rng rng(7);
    const int n = 5;
    for (int trial = 0; trial < 50; ++trial) {
        CVec g(n), f(n);
        for (int i = 0; i < n; ++i) {
            g[i] = complex_normal(rng, 1.0);
            f[i] = complex_normal(rng, 1.0);
        }
        const CMat W1 = f * f.adjoint();
        const CVec r1 = restore_rank1(W1, g);
        CHECK((r1 * r1.adjoint() - W1).norm() <= 1e-10 * W1.norm());

        const CMat W = random_psd(n, 1 + trial % n, rng);
        const CVec r = restore_rank1(W, g);
        const double before = g.dot(W * g).real();
        CHECK(std::abs(g.dot(r * r.adjoint() * g).real() - before) <= 1e-10 * before);
        CHECK(r.squaredNorm() <= W.trace().real() + 1e-10);
    }
    CHECK_THROWS_AS(restore_rank1(CMat::Zero(n, n), CVec::Ones(n)), SingularError);
}

TEST_CASE("restored SDR solutions keep the relaxed objective") {
    const SystemConfig c = desk_profile();
    for (std::uint64_t seed : {11u, 12u}) {
        const Scenario sc = generate_scenario(c, seed);
        const ChannelState st = init_channel(c, sc, seed);
        SdrProblem p = make_sdr_problem(intercarrier_response(st, c, 0), st.target.pos.theta, st.target.alpha, c,
                                        UtilityWeights{0.5, 1.0, 1.0});
        const auto b = compute_boundaries(p);
        p.weights = UtilityWeights{0.5, b.se_bound, b.fisher_bound};
        const auto s = solve_digital_sdr(p, {}, b.tau_max);
        REQUIRE(s.ok());
        const auto f = restore_rank1(p, s.W);
        std::vector<CMat> Wt;
        double relaxed_power = 0.0, restored_power = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            Wt.push_back(f[i] * f[i].adjoint());
            relaxed_power += s.W[i].trace().real();
            restored_power += f[i].squaredNorm();
        }
        CHECK(constraint_residuals(p, Wt, s.tau, s.zeta).max() <= 1e-6);
        CHECK(restored_power <= relaxed_power + 1e-9);
        const double zeta_t = sensing_values(p, Wt).minCoeff();
        const double omega_t = sdr_objective(p, s.tau, std::min(zeta_t, s.zeta));
        CHECK(std::abs(omega_t - s.omega) <= 1e-5 * std::abs(s.omega));
    }
}

TEST_CASE("phase quantization") {
    CMat a(1, 4);
    a << std::polar(1.0, 0.3), std::polar(1.0, kPi / 4), std::polar(1.0, kPi / 8), std::polar(1.0, -0.1);
    const CMat q = quantize_phases(a, 3);
    CHECK(std::abs(q(0, 0) - cd(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(q(0, 1) - a(0, 1)) < 1e-12);
    // pi/8 is equidistant from 0 and pi/4; the smaller index wins.
    CHECK(std::abs(q(0, 2) - cd(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(q(0, 3) - cd(1.0, 0.0)) < 1e-12);
    Rng rng(8);
    for (int bits = 1; bits <= 5; ++bits)
        for (int i = 0; i < 200; ++i) {
            CMat z(1, 1);
            z(0, 0) = std::polar(1.0, uniform(rng, -kPi, kPi));
            const CMat zq = quantize_phases(z, bits);
            CHECK(std::abs(std::arg(zq(0, 0) / z(0, 0))) <= kPi / (1 << bits) + 1e-12);
            CHECK(phases_on_grid(zq, bits));
        }
}

TEST_CASE("analog update") {
    Rng rng(9);
    CMat f(4, 2);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = complex_normal(rng, 1.0);
    const CMat single = analog_update({f}, CMat::Ones(1, 2));
    for (Eigen::Index i = 0; i < f.size(); ++i)
        CHECK(std::abs(single.data()[i] - f.data()[i] / std::abs(f.data()[i])) < 1e-12);

    // Shared phases with different amplitudes.
    CMat ph(4, 2);
    for (Eigen::Index i = 0; i < ph.size(); ++i) ph.data()[i] = std::polar(1.0, uniform(rng, -kPi, kPi));
    std::vector<CMat> F;
    for (int m = 0; m < 3; ++m) {
        CMat amp = CMat::Zero(4, 2);
        for (Eigen::Index i = 0; i < amp.size(); ++i) amp.data()[i] = ph.data()[i] * uniform(rng, 0.1, 2.0);
        F.push_back(amp);
    }
    CHECK((analog_update(F, CMat::Ones(3, 2)) - ph).norm() < 1e-12);

    // The two rules coincide for a single stream.
    std::vector<CMat> one;
    CMat d1(3, 1);
    for (int m = 0; m < 3; ++m) {
        one.push_back(F[m].col(0));
        d1(m, 0) = complex_normal(rng, 1.0);
    }
    CHECK((analog_update(one, d1, AnalogRule::exact) - analog_update(one, d1, AnalogRule::weighted_inverse)).norm() <
          1e-12);

    CMat dig = CMat::Ones(3, 2);
    dig(1, 0) = 0.0;
    try {
        analog_update(F, dig);
        FAIL("expected SingularError");
    } catch (const SingularError& e) {
        CHECK(std::string(e.what()).find("m=1, u=0") != std::string::npos);
    }
}

TEST_CASE("digital update") {
    Rng rng(10);
    CMat rf(4, 2);
    for (Eigen::Index i = 0; i < rf.size(); ++i) rf.data()[i] = std::polar(1.0, uniform(rng, -kPi, kPi));
    // Collinear targets: f_{m,u} = c f_RF,u with sum |c|^2 = 1 / N_t.
    CMat coef(2, 2);
    coef << 0.2, 0.3, 0.1, 0.0;
    coef *= std::sqrt(1.0 / (4.0 * coef.squaredNorm()));
    std::vector<CMat> F{rf * coef.row(0).asDiagonal(), rf * coef.row(1).asDiagonal()};
    CHECK((digital_update(F, rf) - coef).norm() < 1e-12);

    std::vector<CMat> equal{rf, rf};
    const CMat p = digital_update(equal, rf);
    for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(std::abs(p.data()[i] - 1.0 / std::sqrt(4.0 * 2 * 2)) < 1e-12);

    // Least squares on the sphere beats random coefficient vectors of the same norm.
    const auto G = random_unit_precoder(3, 2, 4, rng);
    const CMat best = digital_update(G, rf);
    const double r = decomposition_residual(G, rf, best);
    for (int n = 0; n < 1000; ++n) {
        CMat q(3, 2);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = complex_normal(rng, 1.0);
        q *= std::sqrt(1.0 / (4.0 * q.squaredNorm()));
        CHECK(r <= decomposition_residual(G, rf, q) + 1e-12);
    }
}

TEST_CASE("alternating decomposition") {
    Rng rng(11);
    // Realizable target with on-grid phases and positive coefficients.
    HybridPrecoder h;
    h.analog = quantize_phases(CMat::NullaryExpr(6, 2, [&]() { return std::polar(1.0, uniform(rng, -kPi, kPi)); }), 3);
    h.digital = CMat::NullaryExpr(4, 2, [&]() { return cd(uniform(rng, 0.2, 1.0), 0.0); });
    h.normalize_power(1.0);
    const auto d = alternating_decompose(h.equivalent_all(), 1, 3);
    CHECK(d.residuals.front() <= 1e-9);
    CHECK(d.final_residual <= 1e-9);
    CHECK(phases_on_grid(d.precoder.analog, 3));

    const auto zero = alternating_decompose(h.equivalent_all(), 0, 3);
    CHECK(zero.residuals.empty());
    CHECK(phases_on_grid(zero.precoder.analog, 3));
    CHECK(zero.precoder.total_power() == doctest::Approx(1.0).epsilon(1e-12));

    for (int run = 0; run < 100; ++run) {
        const auto F = random_unit_precoder(4, 3, 8, rng);
        const auto r = alternating_decompose(F, 10, 3);
        REQUIRE(r.residuals.size() == 10);
        for (std::size_t i = 1; i < r.residuals.size(); ++i)
            CHECK(r.residuals[i] <= r.residuals[i - 1] * (1.0 + 1e-12) + 1e-15);
        CHECK(r.precoder.total_power() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(phases_on_grid(r.precoder.analog, 3));
    }
}

TEST_CASE("boundaries") {
    Rng rng(12);
    const SystemConfig c = small_config(4, 2, 2);
    const IciBlocks h = random_blocks(2, 2, 4, rng);
    const double th = -0.2;
    const auto alpha = echo(c, 30.0, 10.0);
    const SdrProblem p = make_sdr_problem(h, th, alpha, c, UtilityWeights{0.5, 1.0, 1.0});
    const auto b = compute_boundaries(p);
    REQUIRE(b.se_bound > 0.0);
    REQUIRE(b.fisher_bound > 0.0);
    for (int n = 0; n < 1000; ++n) {
        const auto F = random_unit_precoder(2, 2, 4, rng);
        const double fisher = total_fisher(th, F, alpha, c);
        CHECK(fisher <= b.fisher_bound);
        const double tau = sinr_table(h, F, c.sinr_noise_term()).minCoeff();
        const double se = 4.0 * std::log2(1.0 + tau);
        CHECK(isac_utility(se, fisher, UtilityWeights{0.5, b.se_bound, b.fisher_bound}) <= 1.0 + 1e-9);
    }
}

TEST_CASE("single-user line of sight: SE bound covers matched filtering") {
    SystemConfig c = small_config(8, 1, 4);
    c.n_paths = 1;
    ChannelState st;
    PathComponent los;
    los.aod = 0.3;
    // Zero delay and Doppler keep the channel flat, so matched filtering gives equal SINRs.
    los.delay_s = 0.0;
    st.users.push_back(UserChannel{{los}});
    st.target.pos = {-0.4, 50.0};
    st.target.alpha = echo(c, 50.0, 10.0);
    const IciBlocks h = intercarrier_response(st, c, 0);
    const SdrProblem p = make_sdr_problem(h, -0.4, st.target.alpha, c, UtilityWeights{1.0, 1.0, 1.0});
    const auto b = compute_boundaries(p);
    std::vector<CMat> F;
    for (int m = 0; m < c.n_sub; ++m) F.push_back(h.row(m, m, 0).adjoint().normalized() / std::sqrt(double(c.n_sub)));
    // Equality holds here; the slack is the interior-point tolerance.
    CHECK(b.se_bound >= spectral_efficiency({h}, F, c) * (1.0 - 1e-6));
}
