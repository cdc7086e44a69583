// Covered: beamspace observation, the position estimator surrogate, user identification, the
// occupancy grid, both action parameterizations and the frame protocol.
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "isac/design.hpp"
#include "isac/env.hpp"
#include "oracles.hpp"

using namespace isac;

namespace {

SystemConfig short_frame(int T = 6) {
    SystemConfig c = desk_profile();
    c.subframes_per_frame = T;
    return c;
}

HybridPrecoder unit_precoder(const SystemConfig& c, Rng& rng) {
    HybridPrecoder f = random_precoder(c.n_tx, c.n_users, c.n_sub, c.phase_bits, rng);
    for (Eigen::Index i = 0; i < f.digital.size(); ++i) f.digital.data()[i] *= uniform(rng, 0.2, 1.0);
    f.normalize_power(1.0);
    return f;
}

}  // namespace

TEST_CASE("beamspace observation of an on-grid path is one-sparse") {
    const int nt = 8;
    const CMat D = beamspace_dictionary(nt, nt);
    CHECK((D.adjoint() * D - CMat::Identity(nt, nt)).norm() < 1e-12);
    for (int g = 0; g < nt; ++g) {
        std::vector<CMat> taps(3, CMat::Zero(2, nt));
        const double theta = std::asin(-1.0 + 2.0 * g / nt);
        for (int i = 0; i < nt; ++i) taps[0](1, i) = 0.7 * std::conj(oracle::steering_entry(theta, nt, i));
        const RMat s = channel_observation(taps, D);
        REQUIRE(s.rows() == 3);
        REQUIRE(s.cols() == 2 * nt);
        for (Eigen::Index r = 0; r < s.rows(); ++r)
            for (Eigen::Index k = 0; k < s.cols(); ++k) {
                const bool hit = r == 0 && k == g * 2 + 1;
                CHECK(s(r, k) == doctest::Approx(hit ? 0.7 : 0.0).epsilon(1e-12));
            }
    }
}

TEST_CASE("target angle error variance follows the clamped CRLB") {
    SystemConfig c = desk_profile();
    const std::vector<PolarPosition> users{{0.3, 40.0}, {-0.5, 60.0}};
    const PolarPosition target{0.1, 50.0};
    for (double crlb_v : {1e-4, 1e-9, 10.0}) {
        const double expect = std::clamp(crlb_v, c.angle_error_floor_rad2, c.angle_error_cap_rad2);
        Rng rng(7);
        const int N = 20000;
        double s = 0.0, s2 = 0.0, su = 0.0;
        for (int k = 0; k < N; ++k) {
            const auto e = estimate_positions(users, target, crlb_v, c, rng);
            REQUIRE(e.objects.size() == 3);
            for (std::size_t i = 0; i < e.objects.size(); ++i) {
                if (e.truth[i] == 2) {
                    const double d = e.objects[i].theta - target.theta;
                    s += d;
                    s2 += d * d;
                } else if (e.truth[i] == 0) {
                    su += std::pow(e.objects[i].theta - users[0].theta, 2);
                }
            }
        }
        const double var = s2 / N - (s / N) * (s / N);
        CHECK(std::abs(var / expect - 1.0) < 0.05);
        CHECK(std::abs(su / N / c.angle_error_floor_rad2 - 1.0) < 0.05);
    }
}

TEST_CASE("identification is invariant to the order of the estimates") {
    SystemConfig c = desk_profile();
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<PolarPosition> objs, ref;
        for (int i = 0; i < 4; ++i) objs.push_back({uniform(rng, -1.2, 1.2), uniform(rng, 10.0, 100.0)});
        for (int u = 0; u < 3; ++u) ref.push_back({uniform(rng, -1.2, 1.2), uniform(rng, 10.0, 100.0)});
        const auto a = identify_users(objs, ref, c);
        std::vector<int> perm{0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<PolarPosition> p(4);
        for (int i = 0; i < 4; ++i) p[static_cast<std::size_t>(i)] = objs[static_cast<std::size_t>(perm[i])];
        const auto b = identify_users(p, ref, c);
        for (int u = 0; u < 3; ++u) CHECK(perm[static_cast<std::size_t>(b.users[u])] == a.users[u]);
        CHECK(perm[static_cast<std::size_t>(b.target)] == a.target);
    }
    // Exact references recover the exact assignment.
    const std::vector<PolarPosition> objs{{0.5, 30.0}, {-0.2, 80.0}, {0.1, 55.0}};
    const auto id = identify_users(objs, {{-0.2, 80.0}, {0.1, 55.0}}, c);
    CHECK(id.users == std::vector<int>{1, 2});
    CHECK(id.target == 0);
    CHECK_THROWS_AS(identify_users(objs, {{0.0, 1.0}}, c), StateError);
}

TEST_CASE("occupancy grid") {
    GridSpec g;
    const double wx = (g.theta_max - g.theta_min) / g.n_x;
    const double wy = (g.d_max - g.d_min) / g.n_y;
    const PolarPosition center{g.theta_min + 5.5 * wx, g.d_min + 3.5 * wy};
    auto r = position_spectrum({center}, std::nullopt, g);
    CHECK(r.grid.sum() == 1.0);
    CHECK(r.grid(5, 3) == 1.0);
    CHECK_FALSE(r.clamped);
    r = position_spectrum({center}, center, g);
    CHECK(r.grid(5, 3) == 2.0);
    CHECK(r.grid.sum() == 2.0);
    r = position_spectrum({{0.0, 500.0}}, PolarPosition{-2.0, 10.0}, g);
    CHECK(r.clamped);
    CHECK(r.grid(g.n_x / 2, g.n_y - 1) == 1.0);
    CHECK(r.grid(0, static_cast<int>(10.0 / wy)) == 2.0);
}

TEST_CASE("action dimensions do not depend on the number of users") {
    for (int U = 1; U <= 4; ++U) {
        SystemConfig c = desk_profile();
        c.n_users = U;
        c.n_rf = U;
        CHECK(action_dim(ActionType::user_dim, c) == c.u_max + c.n_tx + c.n_sub);
        CHECK(action_dim(ActionType::antenna_dim, c) == c.n_tx + c.n_sub);
    }
    SystemConfig c = desk_profile();
    Rng rng(1);
    for (auto t : {ActionType::user_dim, ActionType::antenna_dim}) {
        const auto a = random_action(t, c, rng);
        CHECK_NOTHROW(validate_action(a, c));
        CHECK(a.select.sum() == doctest::Approx(1.0));
        const auto b = HybridAction::unflatten(t, a.flatten(), c);
        CHECK(b.flatten() == a.flatten());
        auto bad = a;
        bad.digital[0] = 1.5;
        CHECK_THROWS_AS(validate_action(bad, c), InvalidArgument);
    }
}

TEST_CASE("user-dimension actions keep phases on the grid and unit power") {
    SystemConfig c = desk_profile();
    Rng rng(11);
    HybridPrecoder f = unit_precoder(c, rng);
    const int levels = 1 << c.phase_bits;
    for (int k = 0; k < 100000; ++k) {
        const auto a = random_action(ActionType::user_dim, c, rng);
        const HybridPrecoder g = apply_action_user_dim(f, a, c, rng);
        if (k % 97 == 0) {
            // Exactly one column moves, each element by one grid step.
            int moved = 0;
            for (int u = 0; u < c.n_users; ++u) {
                const bool changed = (g.analog.col(u) - f.analog.col(u)).norm() > 1e-12;
                moved += changed;
                if (changed)
                    for (int i = 0; i < c.n_tx; ++i) {
                        const double d = std::abs(std::arg(g.analog(i, u) / f.analog(i, u)));
                        CHECK(d == doctest::Approx(2.0 * kPi / levels).epsilon(1e-9));
                    }
            }
            CHECK(moved == 1);
        }
        f = g;
        if (k % 1000 == 0) {
            CHECK(phases_on_grid(f.analog, c.phase_bits, 1e-12));
            CHECK(f.total_power() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(phases_on_grid(f.analog, c.phase_bits, 1e-12));
    CHECK((f.analog.array().abs() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(f.total_power() == doctest::Approx(1.0).epsilon(1e-12));

    // Zero selection mass falls back to a uniform choice.
    auto a = random_action(ActionType::user_dim, c, rng);
    a.select.setZero();
    std::vector<int> hits(static_cast<std::size_t>(c.n_users), 0);
    for (int k = 0; k < 2000; ++k) {
        const auto g = apply_action_user_dim(f, a, c, rng);
        for (int u = 0; u < c.n_users; ++u) hits[static_cast<std::size_t>(u)] += (g.analog.col(u) - f.analog.col(u)).norm() > 0;
    }
    for (int h : hits) CHECK(h > 800);
}

TEST_CASE("antenna-dimension actions") {
    SystemConfig c = desk_profile();
    Rng rng(5);
    HybridPrecoder f = unit_precoder(c, rng);
    for (int k = 0; k < 100000; ++k) {
        f = apply_action_antenna_dim(f, random_action(ActionType::antenna_dim, c, rng), c, rng, 0.1);
        if (k % 1000 == 0) {
            CHECK(phases_on_grid(f.analog, c.phase_bits, 1e-12));
            CHECK(f.total_power() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    // eta_r = 0 leaves a quantized unit-power precoder unchanged.
    const auto a = random_action(ActionType::antenna_dim, c, rng);
    const auto same = apply_action_antenna_dim(f, a, c, rng, 0.0);
    CHECK((same.analog - f.analog).norm() < 1e-12);
    CHECK((same.digital - f.digital).norm() < 1e-12);

    // Positive a_BB[m] grows subcarrier m by (1 + eta); negative multiplies by |1 + eta e^{j pi^2}|.
    auto b = a;
    for (int m = 0; m < c.n_sub; ++m) b.digital[m] = m == 0 ? 0.5 : -0.5;
    const double eta = 0.3;
    const auto g = apply_action_antenna_dim(f, b, c, rng, eta);
    const double shrink = std::abs(1.0 + eta * std::polar(1.0, kPi * kPi));
    for (int u = 0; u < c.n_users; ++u) {
        const double before = std::abs(f.digital(0, u)) / std::abs(f.digital(1, u));
        const double after = std::abs(g.digital(0, u)) / std::abs(g.digital(1, u));
        CHECK(after / before == doctest::Approx((1.0 + eta) / shrink).epsilon(1e-9));
        CHECK(std::arg(g.digital(3, u) / f.digital(3, u)) == doctest::Approx(0.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(apply_action_user_dim(f, a, c, rng), InvalidArgument);
}

TEST_CASE("frame protocol") {
    SystemConfig c = short_frame(4);
    auto data = std::make_shared<ScenarioData>(c, 21);
    EnvOptions o;
    o.psi = 0.5;
    IsacEnv env(data, o, 99);
    Rng prng(4);
    const Policy random_policy = [&](const Observation&, Environment& e) {
        return random_action(e.action_type(), e.config(), prng);
    };
    const auto rec = run_episode(env, random_policy);
    REQUIRE(rec.transitions.size() == 4);
    CHECK(rec.transitions.back().terminal);
    CHECK_FALSE(rec.transitions.front().terminal);
    CHECK_THROWS_AS(env.step(random_action(ActionType::user_dim, c, prng), *std::make_unique<StepInfo>()),
                    StateError);
    for (const auto& i : rec.info) {
        CHECK(i.se >= 0.0);
        CHECK(i.reward == doctest::Approx(0.5 * i.se / i.se_bound + 0.5 * i.fisher / i.fisher_bound));
    }
    const auto& obs = rec.transitions[0].obs;
    CHECK(obs.s_h.rows() == c.n_delay);
    CHECK(obs.s_h.cols() == c.n_users * c.dict_size);
    CHECK(obs.s_p[0].sum() == 0.0);
    CHECK(obs.s_p[2].maxCoeff() == 2.0);

    // Same seeds reproduce the episode.
    Rng prng2(4);
    IsacEnv env2(data, o, 99);
    const auto rec2 = run_episode(env2, [&](const Observation&, Environment& e) {
        return random_action(e.action_type(), e.config(), prng2);
    });
    for (std::size_t k = 0; k < rec.info.size(); ++k) CHECK(rec2.info[k].reward == rec.info[k].reward);

    std::ostringstream os;
    rec.write_jsonl(os, true);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j["subframe"].get<int>() == lines);
        ++lines;
    }
    CHECK(lines == 4);

    // Ablations zero the removed stream.
    o.obs_mode = ObsMode::co;
    IsacEnv co(data, o, 1);
    CHECK(co.reset().s_p[2].sum() == 0.0);
    o.obs_mode = ObsMode::po;
    IsacEnv po(data, o, 1);
    CHECK(po.reset().s_h.norm() == 0.0);
}

TEST_CASE("noise-free preamble equals the optimized design on the true state") {
    SystemConfig c = short_frame(2);
    c.csi_error_var = 0.0;
    c.scan_error_sigma_deg = 0.0;
    ScenarioData data(c, 5);
    const auto& st = data.state(0);
    const auto d = optimize_precoder(intercarrier_response(st, c, 0), st.target.pos.theta, st.target.alpha, c, 0.3);
    const auto& f = data.preamble_precoder(0.3);
    CHECK((f.analog - d.precoder.analog).norm() < 1e-12);
    CHECK((f.digital - d.precoder.digital).norm() < 1e-12);
    CHECK(data.preamble_target_angle() == st.target.pos.theta);
}
