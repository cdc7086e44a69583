// Covered: steering vectors, kinematics, scenario generation, channel evolution,
// time-domain taps, inter-carrier blocks, target response, config parsing.
#include "doctest.h"

#include <cmath>

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/scenario.hpp"
#include "oracles.hpp"

using namespace isac;

namespace {

SystemConfig small_config() {
    SystemConfig c = desk_profile();
    c.n_tx = 4;
    c.n_users = 2;
    c.n_rf = 2;
    c.n_sub = 8;
    c.n_delay = 3;
    c.cp_len = 2;
    c.n_paths = 3;
    c.subframes_per_frame = 10;
    return c;
}

double rel_err(const CMat& a, const CMat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("steering vector entries and norm") {
    const CVec a = steering_vector(0.0, 4);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - cd(0.5, 0.0)) < 1e-15);
    const CVec b = steering_vector(kPi / 2, 2);
    CHECK(std::abs(b[1] - cd(-1.0 / std::sqrt(2.0), 0.0)) < 1e-15);
    const CVec c = steering_vector(0.3, 32);
    double err = 0.0;
    for (int i = 0; i < 32; ++i) err = std::max(err, std::abs(c[i] - oracle::steering_entry(0.3, 32, i)));
    CHECK(err < 1e-14);
    CHECK(std::abs(c.norm() - 1.0) < 1e-14);
    CHECK_THROWS_AS(steering_vector(0.1, 0), InvalidArgument);
}

TEST_CASE("steering derivative matches central difference") {
    const double th = 0.41;
    const double h = 1e-6;
    const CVec fd = (steering_vector(th + h, 8) - steering_vector(th - h, 8)) / (2 * h);
    CHECK((fd - steering_vector_derivative(th, 8)).norm() < 1e-8);
}

TEST_CASE("advance_positions agrees with Cartesian oracle") {
    PolarPosition p{0.0, 50.0};
    Velocity v{10.0, 0.0};
    const auto got = advance_positions(p, v, 1.0);
    const auto ref = oracle::cartesian_advance(p, v, 1.0);
    CHECK(std::abs(got.dist - ref.dist) < 1e-12);
    CHECK(std::abs(got.theta - ref.theta) < 1e-12);
    CHECK(std::abs(got.dist - 60.0) < 1e-12);

    const auto same = advance_positions(p, Velocity{0.0, 1.0}, 5.0);
    CHECK(same.theta == p.theta);
    CHECK(same.dist == p.dist);

    Rng rng(7);
    double worst_d = 0.0, worst_t = 0.0;
    for (int i = 0; i < 10000; ++i) {
        PolarPosition q{uniform(rng, -1.4, 1.4), uniform(rng, 5.0, 100.0)};
        Velocity w{uniform(rng, 0.0, 30.0), uniform(rng, -kPi, kPi)};
        const double dt = uniform(rng, 0.0, 0.5);
        const auto a = advance_positions(q, w, dt);
        const auto b = oracle::cartesian_advance(q, w, dt);
        worst_d = std::max(worst_d, std::abs(a.dist - b.dist));
        worst_t = std::max(worst_t, std::abs(wrap_angle(a.theta - b.theta)));
    }
    CHECK(worst_d < 1e-9);
    CHECK(worst_t < 1e-9);
}

TEST_CASE("advance_positions range underflow") {
    PolarPosition p{0.0, 10.0};
    Velocity toward{10.0, kPi};  // straight at the array
    CHECK_THROWS_AS(advance_positions(p, toward, 1.0), RangeUnderflow);
}

TEST_CASE("scenario generation is deterministic and kinematically consistent") {
    const SystemConfig c = desk_profile();
    const auto a = generate_scenario(c, 11);
    const auto b = generate_scenario(c, 11);
    CHECK(scenario_to_json(a).dump() == scenario_to_json(b).dump());
    CHECK(scenario_to_json(a).dump() != scenario_to_json(generate_scenario(c, 12)).dump());
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = generate_scenario(c, seed);
        auto check = [&](const Trajectory& t) {
            REQUIRE(static_cast<int>(t.pos.size()) == c.subframes_per_frame + 1);
            for (int n = 0; n < c.subframes_per_frame; ++n) {
                worst = std::max(worst, kinematic_residual(t.pos[n], t.pos[n + 1], t.vel[n], s.dt));
                CHECK(in_coverage(c, t.pos[n + 1]));
                CHECK(t.vel[n].speed >= c.speed_min_mps);
                CHECK(t.vel[n].speed <= c.speed_max_mps);
            }
        };
        for (const auto& u : s.users) check(u);
        check(s.target);
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("zero speed range freezes positions") {
    SystemConfig c = desk_profile();
    c.speed_min_mps = 0.0;
    c.speed_max_mps = 0.0;
    const auto s = generate_scenario(c, 3);
    for (const auto& u : s.users)
        for (const auto& p : u.pos) {
            CHECK(p.theta == u.pos[0].theta);
            CHECK(p.dist == u.pos[0].dist);
        }
}

TEST_CASE("scenario rejects coverage smaller than the admissible range") {
    SystemConfig c = desk_profile();
    c.grid.d_max = 50.0;
    CHECK_THROWS_AS(generate_scenario(c, 1), ConfigError);
    SystemConfig bad = desk_profile();
    bad.cp_len = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("channel evolution") {
    SystemConfig c = small_config();
    SUBCASE("frozen environment keeps every path parameter") {
        c.gain_walk_sigma = 0.0;
        c.speed_min_mps = c.speed_max_mps = 0.0;
        const auto s = generate_scenario(c, 5);
        const auto h0 = init_channel(c, s, 5);
        const auto h1 = evolve_channel(h0, c, s, 1, 5);
        for (int u = 0; u < c.n_users; ++u)
            for (std::size_t p = 0; p < h0.users[u].paths.size(); ++p) {
                const auto& a = h0.users[u].paths[p];
                const auto& b = h1.users[u].paths[p];
                CHECK(a.gain == b.gain);
                CHECK(a.delay_s == b.delay_s);
                CHECK(a.aod == b.aod);
                CHECK(b.doppler_norm == 0.0);
            }
    }
    SUBCASE("dominant delay and doppler formulas") {
        const auto s = generate_scenario(c, 9);
        auto h = init_channel(c, s, 9);
        h = evolve_channel(h, c, s, 1, 9);
        const auto& los = h.users[0].paths[0];
        CHECK(los.delay_s == doctest::Approx(2.0 * s.users[0].pos[1].dist / c.light_speed).epsilon(1e-14));
        for (const auto& u : h.users)
            for (const auto& p : u.paths) {
                CHECK(p.delay_s >= 0.0);
                CHECK(p.delay_s <= (c.n_delay - 1) * c.sample_period() + 1e-18);
            }
    }
    SUBCASE("scalar doppler and delay values") {
        SystemConfig t = paper_profile();
        CHECK(doppler_norm(t, 20.0, kPi / 6) == doctest::Approx(0.006112881314025738).epsilon(1e-12));
        CHECK(2.0 * 75.0 / t.light_speed == doctest::Approx(5.00346142797228e-07).epsilon(1e-12));
    }
}

TEST_CASE("time-domain taps") {
    SystemConfig c = small_config();
    const auto s = generate_scenario(c, 21);
    auto h = init_channel(c, s, 21);
    SUBCASE("single path") {
        for (auto& u : h.users) {
            u.paths.resize(1);
            u.paths[0] = PathComponent{};
            u.paths[0].aod = 0.2;
        }
        const auto taps = time_domain_channel(h, c, 0.0);
        const CVec a = steering_vector(0.2, c.n_tx);
        const double ts = c.sample_period();
        for (int d = 0; d < c.n_delay; ++d) {
            const Eigen::RowVectorXcd want = std::sqrt(double(c.n_tx)) * raised_cosine(d * ts, ts) * a.transpose();
            CHECK((taps[d].row(0) - want).norm() < 1e-14);
        }
    }
    SUBCASE("doppler rotates every entry by w dt") {
        for (auto& u : h.users) u.paths.resize(1);
        h.users[0].paths[0].doppler_norm = 0.37;
        const auto t1 = time_domain_channel(h, c, 3.0);
        const auto t2 = time_domain_channel(h, c, 8.0);
        for (int i = 0; i < c.n_tx; ++i)
            if (std::abs(t1[0](0, i)) > 1e-12)
                CHECK(std::abs(std::arg(t2[0](0, i) / t1[0](0, i)) - std::remainder(0.37 * 5.0, 2 * kPi)) < 1e-12);
    }
    SUBCASE("direct per-element oracle") {
        const auto taps = time_domain_channel(h, c, 17.0);
        double err = 0.0;
        for (int d = 0; d < c.n_delay; ++d)
            for (int u = 0; u < c.n_users; ++u)
                for (int i = 0; i < c.n_tx; ++i)
                    err = std::max(err, std::abs(taps[d](u, i) - oracle::tap_entry(h, c, d, u, i, 17.0)));
        CHECK(err < 1e-12);
    }
}

TEST_CASE("inter-carrier response") {
    SystemConfig c = small_config();
    const auto s = generate_scenario(c, 33);
    auto h = init_channel(c, s, 33);
    SUBCASE("zero doppler collapses to the tap DFT") {
        for (auto& u : h.users)
            for (auto& p : u.paths) p.doppler_norm = 0.0;
        const auto blocks = intercarrier_response(h, c, 2);
        const auto taps = time_domain_channel(h, c, 0.0);
        for (int m = 0; m < c.n_sub; ++m)
            for (int k = 0; k < c.n_sub; ++k) {
                if (m != k) {
                    CHECK(blocks.block(m, k).norm() <= 1e-10);
                    continue;
                }
                CMat want = CMat::Zero(c.n_users, c.n_tx);
                for (int d = 0; d < c.n_delay; ++d)
                    want += taps[d] * std::polar(1.0, -2.0 * kPi * m * d / c.n_sub);
                CHECK(rel_err(blocks.block(m, m), want) < 1e-12);
            }
    }
    SUBCASE("flat time-invariant channel is identical across subcarriers") {
        for (auto& u : h.users)
            for (auto& p : u.paths) {
                p.doppler_norm = 0.0;
                p.delay_s = 0.0;
            }
        SystemConfig one = c;
        one.n_delay = 1;
        const auto blocks = intercarrier_response(h, one, 0);
        for (int m = 1; m < c.n_sub; ++m) CHECK(rel_err(blocks.block(m, m), blocks.block(0, 0)) < 1e-12);
    }
    SUBCASE("stacked model matches brute-force OFDM with doppler") {
        for (auto& u : h.users)
            for (auto& p : u.paths) p.doppler_norm = 0.05 * std::sin(p.aod + 0.3);
        Rng rng(4);
        CMat x(c.n_tx, c.n_sub);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = complex_normal(rng, 1.0);
        for (int sym = 0; sym < 3; ++sym) {
            const auto blocks = intercarrier_response(h, c, sym);
            const CMat y = apply_stacked_model(blocks, x);
            const CMat ref = oracle::ofdm_time_domain(h, c, sym, x);
            CHECK(rel_err(y, ref) < 1e-8);
        }
    }
}

TEST_CASE("target response") {
    const CMat g = target_response(0.0, 1.0, 4, 8);
    for (Eigen::Index i = 0; i < g.size(); ++i)
        CHECK(std::abs(g.data()[i] - cd(1.0 / std::sqrt(32.0), 0.0)) < 1e-15);
    const CMat g2 = target_response(0.7, cd(0.3, -1.1), 6, 5);
    Eigen::JacobiSVD<CMat> svd(g2);
    CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
    const cd a1 = reflection_coefficient(3e8, 28e9, 40.0, 5.0, 0.2);
    const cd a2 = reflection_coefficient(3e8, 28e9, 80.0, 5.0, 0.2);
    CHECK(std::abs(a2) == doctest::Approx(std::abs(a1) / 4.0).epsilon(1e-14));
}

TEST_CASE("config round trip and key checking") {
    SystemConfig c = paper_profile();
    nlohmann::json j;
    to_json(j, c);
    SystemConfig d = desk_profile();
    apply_json(d, j);
    nlohmann::json j2;
    to_json(j2, d);
    CHECK(j.dump() == j2.dump());
    CHECK_THROWS_AS(apply_json(d, nlohmann::json{{"n_tx_typo", 3}}), ConfigError);
    CHECK_THROWS_AS(apply_json(d, nlohmann::json{{"n_tx", "eight"}}), ConfigError);
    CHECK_NOTHROW(c.validate());
    CHECK_NOTHROW(desk_profile().validate());
}
