// SPDX-License-Identifier: Apache-2.0
// Experiment driver: training, evaluation sweeps, trade-off boundaries, complexity measurement and
// table emission. Every random draw derives from the spec seeds.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "isac/agent.hpp"
#include "isac/env.hpp"

namespace isac {

enum class Method { drl_uu, drl_au, opt_based, random };
enum class SweepAxis { none, snr, psi, users, velocity };
enum class Task { train, sweep, boundary, bench };

const char* to_string(Method m);
const char* to_string(SweepAxis a);
const char* to_string(Task t);
Method parse_method(const std::string& s);
SweepAxis parse_axis(const std::string& s);
Task parse_task(const std::string& s);

/// Action type driven by a DRL method; InvalidArgument for the other methods.
ActionType method_action_type(Method m);

struct ExperimentSpec {
    std::string name = "experiment";
    Task task = Task::sweep;
    std::string profile = "desk";
    nlohmann::json config = nlohmann::json::object();  // overrides applied on top of the profile
    Method method = Method::drl_uu;
    ObsMode obs = ObsMode::pc;
    ActionType random_type = ActionType::user_dim;  // action space of the random baseline
    SweepAxis axis = SweepAxis::none;
    std::vector<double> grid{0.0};
    std::vector<std::uint64_t> seeds{1};
    double psi = 0.5;
    int eval_episodes = 2;
    int workers = 1;
    /// Wall-clock columns are zero unless set; timings are the only non-reproducible output.
    bool record_timing = false;
    std::vector<double> orthogonal_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<int> bench_users{2, 4, 8};
    std::vector<int> bench_ntx{8, 16};
    int bench_repeats = 3;
    std::vector<Method> bench_methods{Method::drl_uu, Method::drl_au, Method::opt_based};
    std::string output_dir = "results";
    std::string checkpoint_dir = "checkpoints";
    TrainConfig train{};

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
    SystemConfig base_config() const;
    /// 16 hex digits of FNV-1a over the canonical JSON form.
    std::string hash() const;
    /// Hash over the fields that determine a trained network (not grid, seeds or outputs).
    std::string training_hash() const;
};

void to_json(nlohmann::json& j, const ExperimentSpec& s);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::string& path);

/// Configuration and reward weight of one grid point. SNR moves both noise powers by the same dB
/// offset from the profile (P_t fixed); users sets U and raises N_RF to match; velocity pins every
/// speed to the value.
struct PointSetup {
    SystemConfig config;
    double psi = 0.5;
};
PointSetup point_setup(const ExperimentSpec& spec, double value);

/// Environment options of the spec method: the DRL action type, random_type for the random
/// baseline and Type I for the optimization-based design (which bypasses actions).
EnvOptions env_options(const ExperimentSpec& spec, double psi);

/// Relative directories resolve under $ISAC_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_dir(const std::string& dir);
std::filesystem::path checkpoint_path(const ExperimentSpec& spec, double value, std::uint64_t seed);

/// Seeds of the derived random streams of one (grid point, seed) pair.
std::uint64_t training_episode_seed(std::uint64_t seed, int episode);
std::uint64_t evaluation_episode_seed(std::uint64_t seed, int episode);

// ---- tables -------------------------------------------------------------------------------

enum class ColumnKind { real, integer, text };
struct Column {
    std::string name;
    ColumnKind kind;
};
using Cell = std::variant<double, std::int64_t, std::string>;

/// Typed rows; every row has one cell per column and the cell type matches the column kind.
struct Table {
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    void validate() const;
    bool operator==(const Table& o) const;
};

/// Header row, then one CRLF record per row; reals with 17 significant digits.
void write_csv(std::ostream& os, const Table& t);
/// Parses against the given columns; the header must match them. Throws IoError.
Table read_csv(std::istream& is, const std::vector<Column>& columns);
/// Array of row objects keyed by column name.
nlohmann::json table_to_json(const Table& t);
Table table_from_json(const nlohmann::json& j, const std::vector<Column>& columns);

struct ResultRow {
    double axis_value = 0.0;
    std::uint64_t seed = 0;
    double mean_se = 0.0;
    double mean_crlb = 0.0;
    double cumulative_reward = 0.0;
    double wall_clock_per_subframe = 0.0;
};

/// One row per (axis value, seed), all entries finite.
struct ResultTable {
    std::vector<ResultRow> rows;
    void validate() const;
    Table to_table() const;
    static ResultTable from_table(const Table& t);
    static const std::vector<Column>& columns();
};

struct EmitPaths {
    std::filesystem::path csv, json;
};

/// Writes `<dir>/<spec.name>_<kind>_<hash>_seed<seeds>.{csv,json}`. Throws IoError.
EmitPaths emit(const Table& t, const ExperimentSpec& spec, const std::string& kind);

// ---- training and evaluation --------------------------------------------------------------

struct TrainedPoint {
    std::unique_ptr<PsacAgent> agent;
    std::vector<EpisodeLog> log;
};

/// Trains a DRL method on the (value, seed) scenario; episode e uses training_episode_seed.
TrainedPoint train_point(const ExperimentSpec& spec, double value, std::uint64_t seed,
                         std::shared_ptr<ScenarioData> data = nullptr,
                         const std::function<void(const EpisodeLog&)>& on_episode = {});

/// Trains every (value, seed) pair, saves checkpoints and emits the learning curves (kind "train").
EmitPaths run_training(const ExperimentSpec& spec, const std::function<void(const std::string&)>& progress = {});

/// Evaluates the spec method over eval_episodes on the (value, seed) scenario. DRL methods use
/// `agent` when given and the checkpoint otherwise (NotFoundError when it is missing).
ResultRow evaluate_point(const ExperimentSpec& spec, double value, std::uint64_t seed,
                         std::shared_ptr<ScenarioData> data = nullptr, PsacAgent* agent = nullptr);

ResultTable run_sweep(const ExperimentSpec& spec);

// ---- trade-off boundary -------------------------------------------------------------------

struct BoundaryPoint {
    double weight = 0.0;  // psi for joint points, communication share for the orthogonal reference
    double mean_se = 0.0;
    double mean_crlb = 0.0;
};

struct BoundaryResult {
    std::vector<BoundaryPoint> joint;       // one per psi, averaged over seeds
    std::vector<BoundaryPoint> frontier;    // non-dominated joint points sorted by SE
    std::vector<BoundaryPoint> orthogonal;  // time sharing of the psi = 1 and psi = 0 designs
    Table to_table() const;
    static const std::vector<Column>& columns();
};

/// Points not dominated in (higher SE, lower CRLB), sorted by SE; CRLB is non-decreasing along it.
std::vector<BoundaryPoint> pareto_frontier(std::vector<BoundaryPoint> points);

/// Subframe n uses the communication design when floor((n + 1) share) > floor(n share).
bool orthogonal_uses_comm(int n, double share);

/// Joint points from the spec method over the psi grid plus the orthogonal reference from the
/// optimization-based designs at psi = 1 and psi = 0.
BoundaryResult run_boundary(const ExperimentSpec& spec);

// ---- complexity ---------------------------------------------------------------------------

/// Multiply and add count of one batch-1 actor forward pass (conv, batch norm, activations,
/// pooling, dense layers).
double actor_forward_flops(const NetworkShapes& shapes, const NetworkDims& dims);

struct ComplexityRow {
    Method method = Method::drl_uu;
    int n_tx = 0, n_users = 0, n_sub = 0;
    double actor_flops = 0.0;   // DRL methods only
    double decode_flops = 0.0;  // index sampling per update
    double update_flops = 0.0;  // precoder increment per update
    double normalize_flops = 0.0;
    double wall_mean_s = 0.0;   // per subframe
    double wall_std_s = 0.0;
    int repeats = 0;
};

/// For each of bench_methods: DRL methods over bench_users x bench_ntx (untrained networks, measured
/// op tallies and timing), the optimization-based design over bench_ntx at the profile user count.
std::vector<ComplexityRow> measure_complexity(const ExperimentSpec& spec);
Table complexity_table(const std::vector<ComplexityRow>& rows);

/// Ordinary least-squares slope and coefficient of determination of y on x.
struct LinearFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// ---- drivers ------------------------------------------------------------------------------

/// Runs the spec task and emits its tables; returns the written paths.
std::vector<EmitPaths> run_task(const ExperimentSpec& spec, const std::function<void(const std::string&)>& progress = {});

/// Writes one scenario description (trajectories and configuration) per seed.
std::vector<std::filesystem::path> generate_scenarios(const ExperimentSpec& spec);

/// Header-only placeholder series for the external MP-based and Greedy-based baselines.
std::vector<EmitPaths> emit_placeholders(const ExperimentSpec& spec);

}  // namespace isac
