// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "isac/harness.hpp"

using namespace isac;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("isac_harness_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof b);
    return b;
}

// Short frames keep the per-subframe boundary solves affordable.
ExperimentSpec tiny_spec(const fs::path& out) {
    ExperimentSpec s;
    s.name = "tiny";
    s.config = {{"subframes_per_frame", 3}};
    s.output_dir = out.string();
    s.checkpoint_dir = (out / "ck").string();
    s.eval_episodes = 1;
    return s;
}

}  // namespace

TEST_CASE("table CSV and JSON round trips are lossless") {
    Table t;
    t.columns = {{"x", ColumnKind::real}, {"n", ColumnKind::integer}, {"label", ColumnKind::text}};
    t.rows = {{0.1, std::int64_t{-3}, std::string("plain")},
              {1.0 / 3.0, std::int64_t{1} << 40, std::string("comma, \"quoted\"\nline")},
              {-2.5e-300, std::int64_t{0}, std::string("")},
              {std::nan(""), std::int64_t{7}, std::string("nan row")}};
    std::ostringstream os;
    write_csv(os, t);
    const std::string csv = os.str();
    CHECK(csv.rfind("x,n,label\r\n", 0) == 0);
    std::istringstream is(csv);
    const Table back = read_csv(is, t.columns);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t r = 0; r < 3; ++r) CHECK(back.rows[r] == t.rows[r]);
    for (std::size_t r = 0; r < 3; ++r)
        CHECK(bits(std::get<double>(back.rows[r][0])) == bits(std::get<double>(t.rows[r][0])));
    CHECK(std::isnan(std::get<double>(back.rows[3][0])));

    const Table jb = table_from_json(table_to_json(t), t.columns);
    for (std::size_t r = 0; r < 3; ++r) CHECK(jb.rows[r] == t.rows[r]);
    CHECK(std::isnan(std::get<double>(jb.rows[3][0])));
}

TEST_CASE("empty tables emit a header and an empty array") {
    const Table t = ResultTable{}.to_table();
    std::ostringstream os;
    write_csv(os, t);
    CHECK(os.str() == "axis_value,seed,mean_se,mean_crlb,cumulative_reward,wall_clock_per_subframe\r\n");
    CHECK(table_to_json(t).dump() == "[]");
    std::istringstream is(os.str());
    CHECK(read_csv(is, t.columns).rows.empty());
}

TEST_CASE("malformed tables are rejected") {
    Table t;
    t.columns = {{"x", ColumnKind::real}};
    t.rows = {{std::int64_t{1}}};
    CHECK_THROWS_AS(t.validate(), InvalidArgument);
    std::istringstream wrong_header("y\r\n1\r\n");
    CHECK_THROWS_AS(read_csv(wrong_header, {{"x", ColumnKind::real}}), IoError);
    std::istringstream bad_value("x\r\n1.5abc\r\n");
    CHECK_THROWS_AS(read_csv(bad_value, {{"x", ColumnKind::real}}), IoError);

    ResultTable dup;
    dup.rows = {{0.0, 1, 1.0, 1.0, 1.0, 0.0}, {0.0, 1, 2.0, 1.0, 1.0, 0.0}};
    CHECK_THROWS_AS(dup.validate(), InvalidArgument);
    ResultTable inf;
    inf.rows = {{0.0, 1, HUGE_VAL, 1.0, 1.0, 0.0}};
    CHECK_THROWS_AS(inf.validate(), NumericalError);
}

TEST_CASE("experiment specs round trip and hash stably") {
    ExperimentSpec s;
    s.name = "snr";
    s.axis = SweepAxis::snr;
    s.grid = {10.0, 20.0};
    s.seeds = {1, 2, 3};
    s.method = Method::opt_based;
    nlohmann::json j;
    to_json(j, s);
    const ExperimentSpec back = spec_from_json(j);
    CHECK(back.hash() == s.hash());
    CHECK(back.hash().size() == 16);

    ExperimentSpec other = s;
    other.seeds = {1, 2};
    CHECK(other.hash() != s.hash());
    CHECK(other.training_hash() == s.training_hash());
    other.grid = {0.0};
    CHECK(other.training_hash() == s.training_hash());
    other.train.lr = 5e-4;
    CHECK(other.training_hash() != s.training_hash());

    j["unknown_key"] = 1;
    CHECK_THROWS_AS(spec_from_json(j), ConfigError);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"method", "sgd"}}), ConfigError);

    ExperimentSpec bad;
    bad.axis = SweepAxis::psi;
    bad.grid = {1.5};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ExperimentSpec{};
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ExperimentSpec{};
    bad.task = Task::train;
    bad.method = Method::random;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("grid points map onto the configuration") {
    ExperimentSpec s;
    const SystemConfig base = s.base_config();

    s.axis = SweepAxis::snr;
    for (double snr : {-5.0, 0.0, 17.5}) {
        const SystemConfig c = point_setup(s, snr).config;
        CHECK(c.total_power_dbm - c.noise_comm_dbm == doctest::Approx(snr));
        CHECK(c.noise_sense_dbm - base.noise_sense_dbm == doctest::Approx(c.noise_comm_dbm - base.noise_comm_dbm));
        CHECK(c.total_power_dbm == base.total_power_dbm);
    }

    s.axis = SweepAxis::users;
    const SystemConfig u = point_setup(s, base.n_rf + 2).config;
    CHECK(u.n_users == base.n_rf + 2);
    CHECK(u.n_rf == base.n_rf + 2);

    s.axis = SweepAxis::velocity;
    const SystemConfig v = point_setup(s, 12.0).config;
    CHECK(v.speed_min_mps == 12.0);
    CHECK(v.speed_max_mps == 12.0);

    s.axis = SweepAxis::psi;
    CHECK(point_setup(s, 0.25).psi == 0.25);
    CHECK(point_setup(s, 0.25).config.n_users == base.n_users);
}

TEST_CASE("pareto frontier keeps exactly the non-dominated points") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<BoundaryPoint> pts;
        for (int i = 0; i < 12; ++i) pts.push_back({double(i), uniform(rng, 0, 10), uniform(rng, 0, 1)});
        const auto front = pareto_frontier(pts);
        // Brute-force dominance as the oracle.
        std::size_t expected = 0;
        for (const auto& p : pts) {
            bool dominated = false;
            for (const auto& q : pts)
                dominated |= q.mean_se >= p.mean_se && q.mean_crlb <= p.mean_crlb &&
                             (q.mean_se > p.mean_se || q.mean_crlb < p.mean_crlb);
            if (!dominated) {
                ++expected;
                bool found = false;
                for (const auto& f : front) found |= f.weight == p.weight;
                CHECK(found);
            }
        }
        CHECK(front.size() == expected);
        for (std::size_t i = 1; i < front.size(); ++i) {
            CHECK(front[i].mean_se > front[i - 1].mean_se);
            CHECK(front[i].mean_crlb >= front[i - 1].mean_crlb);
        }
    }
}

TEST_CASE("orthogonal schedule gives each design its share of subframes") {
    for (int T : {1, 7, 40})
        for (double share : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            int comm = 0;
            for (int n = 0; n < T; ++n) comm += orthogonal_uses_comm(n, share) ? 1 : 0;
            CHECK(comm == static_cast<int>(std::floor(T * share + 1e-9)));
        }
}

TEST_CASE("line fit recovers exact lines") {
    const LinearFit f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    const LinearFit flat = fit_line({2, 4, 8}, {5, 5, 5});
    CHECK(flat.slope == 0.0);
    CHECK_THROWS_AS(fit_line({1, 1}, {0, 1}), InvalidArgument);
}

TEST_CASE("action-update tallies scale with the action type") {
    const fs::path dir = scratch_dir("bench");
    ExperimentSpec s = tiny_spec(dir);
    s.task = Task::bench;
    s.bench_users = {2, 4, 8};
    s.bench_ntx = {8, 16};
    s.bench_repeats = 1;
    s.bench_methods = {Method::drl_uu, Method::drl_au};
    const SystemConfig base = s.base_config();
    const std::vector<ComplexityRow> rows = measure_complexity(s);
    REQUIRE(rows.size() == 12);
    for (int n_tx : s.bench_ntx) {
        std::vector<double> u, uu, um, au;
        for (const auto& r : rows) {
            if (r.n_tx != n_tx) continue;
            if (r.method == Method::drl_uu) u.push_back(r.n_users), uu.push_back(r.update_flops);
            else um.push_back(double(r.n_users) * r.n_sub), au.push_back(r.update_flops);
        }
        const LinearFit fu = fit_line(u, uu);
        CHECK(fu.slope == 0.0);
        CHECK(uu.front() > 0.0);
        const LinearFit fa = fit_line(um, au);
        CHECK(fa.slope > 0.0);
        CHECK(fa.r2 == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const auto& r : rows) {
        CHECK(r.actor_flops > 0.0);
        CHECK(r.wall_mean_s == 0.0);  // record_timing is off
        CHECK(r.n_sub == base.n_sub);
    }
    fs::remove_all(dir);
}

TEST_CASE("sweeps are reproducible and emit stable files") {
    const fs::path dir = scratch_dir("sweep");
    ExperimentSpec s = tiny_spec(dir);
    s.method = Method::random;
    s.axis = SweepAxis::psi;
    s.grid = {0.2, 0.8};
    s.seeds = {4, 9};
    const ResultTable a = run_sweep(s);
    REQUIRE(a.rows.size() == 4);
    for (const auto& r : a.rows) {
        CHECK(r.mean_se > 0.0);
        CHECK(r.mean_crlb > 0.0);
        CHECK(r.wall_clock_per_subframe == 0.0);
    }
    // The same (value, seed) pair evaluates identically on its own.
    const ResultRow single = evaluate_point(s, 0.8, 9);
    CHECK(bits(single.mean_se) == bits(a.rows[3].mean_se));
    CHECK(bits(single.cumulative_reward) == bits(a.rows[3].cumulative_reward));

    const EmitPaths p1 = emit(a.to_table(), s, "sweep");
    const std::string csv1 = slurp(p1.csv), json1 = slurp(p1.json);
    ExperimentSpec s2 = s;
    s2.workers = 2;
    const ResultTable b = run_sweep(s2);
    const EmitPaths p2 = emit(b.to_table(), s, "sweep");
    CHECK(p2.csv == p1.csv);
    CHECK(slurp(p2.csv) == csv1);
    CHECK(slurp(p2.json) == json1);
    CHECK(p1.csv.filename().string() == "tiny_sweep_" + s.hash() + "_seed4-9.csv");

    std::ifstream in(p1.csv, std::ios::binary);
    const ResultTable back = ResultTable::from_table(read_csv(in, ResultTable::columns()));
    REQUIRE(back.rows.size() == a.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(bits(back.rows[i].mean_crlb) == bits(a.rows[i].mean_crlb));

    s.method = Method::drl_uu;
    CHECK_THROWS_AS(evaluate_point(s, 0.2, 4), NotFoundError);
    fs::remove_all(dir);
}

TEST_CASE("boundary task reports joint, frontier and orthogonal series") {
    const fs::path dir = scratch_dir("boundary");
    ExperimentSpec s = tiny_spec(dir);
    s.task = Task::boundary;
    s.method = Method::opt_based;
    s.grid = {0.0, 0.5, 1.0};
    s.orthogonal_grid = {0.0, 0.5, 1.0};
    const BoundaryResult b = run_boundary(s);
    REQUIRE(b.joint.size() == 3);
    REQUIRE(b.orthogonal.size() == 3);
    CHECK(!b.frontier.empty());
    // Share 0 and share 1 replay the psi = 0 and psi = 1 designs on the same scenario.
    CHECK(b.orthogonal[0].mean_se == doctest::Approx(b.joint[0].mean_se).epsilon(1e-9));
    CHECK(b.orthogonal[2].mean_se == doctest::Approx(b.joint[2].mean_se).epsilon(1e-9));
    CHECK(b.joint[2].mean_se >= b.joint[0].mean_se);
    CHECK(b.joint[2].mean_se >= b.joint[1].mean_se * (1.0 - 1e-6));
    // The joint interior design is at least as good on both axes as time sharing at half share.
    CHECK(b.joint[1].mean_se >= b.orthogonal[1].mean_se);
    CHECK(b.joint[1].mean_crlb <= b.orthogonal[1].mean_crlb);
    const auto paths = run_task(s);
    REQUIRE(paths.size() == 1);
    std::ifstream in(paths[0].csv, std::ios::binary);
    CHECK(read_csv(in, BoundaryResult::columns()).rows.size() ==
          b.joint.size() + b.frontier.size() + b.orthogonal.size());
    fs::remove_all(dir);
}

TEST_CASE("placeholders and scenario files are written") {
    const fs::path dir = scratch_dir("misc");
    ExperimentSpec s = tiny_spec(dir);
    s.seeds = {1, 2};
    const auto ph = emit_placeholders(s);
    REQUIRE(ph.size() == 2);
    for (const auto& p : ph) {
        CHECK(slurp(p.json) == "[]\n");
        CHECK(slurp(p.csv).find("\r\n") == slurp(p.csv).size() - 2);
    }
    const auto files = generate_scenarios(s);
    REQUIRE(files.size() == 2);
    const auto j = nlohmann::json::parse(slurp(files[1]));
    CHECK(j.at("seed") == 2);
    CHECK(j.contains("scenario"));
    fs::remove_all(dir);
}
