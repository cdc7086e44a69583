// SPDX-License-Identifier: Apache-2.0
#include "isac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "isac/design.hpp"
#include "isac/io.hpp"

namespace isac {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> names, const char* what) {
    for (const auto& [n, e] : names)
        if (s == n) return e;
    std::string list;
    for (const auto& [n, e] : names) list += (list.empty() ? "" : ", ") + std::string(n);
    throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected " + list + ")");
}

std::string compact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Runs f(i) for i in [0, n) on up to `workers` threads; results land by index.
template <class R>
std::vector<R> parallel_map(int n, int workers, const std::function<R(int)>& f) {
    std::vector<R> out(static_cast<std::size_t>(n));
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[static_cast<std::size_t>(i)] = f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct GridTask {
    double value;
    std::uint64_t seed;
};

std::vector<GridTask> grid_tasks(const ExperimentSpec& spec) {
    std::vector<GridTask> tasks;
    for (double v : spec.grid)
        for (auto s : spec.seeds) tasks.push_back({v, s});
    return tasks;
}

double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace

// ---- enums ----------------------------------------------------------------------------------

const char* to_string(Method m) {
    switch (m) {
        case Method::drl_uu: return "drl-uu";
        case Method::drl_au: return "drl-au";
        case Method::opt_based: return "opt-based";
        case Method::random: return "random";
    }
    return "?";
}

const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::none: return "none";
        case SweepAxis::snr: return "snr";
        case SweepAxis::psi: return "psi";
        case SweepAxis::users: return "users";
        case SweepAxis::velocity: return "velocity";
    }
    return "?";
}

const char* to_string(Task t) {
    switch (t) {
        case Task::train: return "train";
        case Task::sweep: return "sweep";
        case Task::boundary: return "boundary";
        case Task::bench: return "bench";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    return parse_enum<Method>(s,
                              {{"drl-uu", Method::drl_uu},
                               {"drl-au", Method::drl_au},
                               {"opt-based", Method::opt_based},
                               {"random", Method::random}},
                              "method");
}

SweepAxis parse_axis(const std::string& s) {
    return parse_enum<SweepAxis>(s,
                                 {{"none", SweepAxis::none},
                                  {"snr", SweepAxis::snr},
                                  {"psi", SweepAxis::psi},
                                  {"users", SweepAxis::users},
                                  {"velocity", SweepAxis::velocity}},
                                 "sweep axis");
}

Task parse_task(const std::string& s) {
    return parse_enum<Task>(
        s, {{"train", Task::train}, {"sweep", Task::sweep}, {"boundary", Task::boundary}, {"bench", Task::bench}},
        "task");
}

ActionType method_action_type(Method m) {
    if (m == Method::drl_uu) return ActionType::user_dim;
    if (m == Method::drl_au) return ActionType::antenna_dim;
    throw InvalidArgument(std::string("method '") + to_string(m) + "' has no learned action type");
}

// ---- spec -----------------------------------------------------------------------------------

void ExperimentSpec::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("experiment spec: " + what);
    };
    require(!name.empty() && name.find_first_of("/\\ ") == std::string::npos, "name must be a non-empty token");
    require(!grid.empty(), "grid must be non-empty");
    require(!seeds.empty(), "seeds must be non-empty");
    for (double v : grid) require(std::isfinite(v), "grid values must be finite");
    if (axis == SweepAxis::psi)
        for (double v : grid) require(v >= 0.0 && v <= 1.0, "psi grid values must lie in [0, 1]");
    if (axis == SweepAxis::users)
        for (double v : grid) require(v >= 1.0 && v == std::floor(v), "user grid values must be positive integers");
    if (axis == SweepAxis::velocity)
        for (double v : grid) require(v >= 0.0, "velocity grid values must be >= 0");
    require(psi >= 0.0 && psi <= 1.0, "psi must lie in [0, 1]");
    require(eval_episodes >= 1, "eval_episodes >= 1");
    require(workers >= 1, "workers >= 1");
    require(bench_repeats >= 1, "bench_repeats >= 1");
    require(!orthogonal_grid.empty(), "orthogonal_grid must be non-empty");
    for (double b : orthogonal_grid) require(b >= 0.0 && b <= 1.0, "orthogonal_grid values must lie in [0, 1]");
    require(!bench_users.empty() && !bench_ntx.empty() && !bench_methods.empty(), "bench grids must be non-empty");
    for (Method m : bench_methods) require(m != Method::random, "bench_methods cannot include random");
    if (task == Task::train)
        require(method == Method::drl_uu || method == Method::drl_au, "the train task needs a DRL method");
    train.validate();
    for (double v : grid) point_setup(*this, v).config.validate();
}

SystemConfig ExperimentSpec::base_config() const {
    SystemConfig c = profile_by_name(profile);
    apply_json(c, config);
    c.validate();
    return c;
}

void to_json(json& j, const ExperimentSpec& s) {
    json bench_methods = json::array();
    for (Method m : s.bench_methods) bench_methods.push_back(to_string(m));
    json train;
    to_json(train, s.train);
    j = {{"name", s.name},
         {"task", to_string(s.task)},
         {"profile", s.profile},
         {"config", s.config},
         {"method", to_string(s.method)},
         {"obs", to_string(s.obs)},
         {"random_type", to_string(s.random_type)},
         {"axis", to_string(s.axis)},
         {"grid", s.grid},
         {"seeds", s.seeds},
         {"psi", s.psi},
         {"eval_episodes", s.eval_episodes},
         {"workers", s.workers},
         {"record_timing", s.record_timing},
         {"orthogonal_grid", s.orthogonal_grid},
         {"bench_users", s.bench_users},
         {"bench_ntx", s.bench_ntx},
         {"bench_repeats", s.bench_repeats},
         {"bench_methods", bench_methods},
         {"output_dir", s.output_dir},
         {"checkpoint_dir", s.checkpoint_dir},
         {"train", train}};
}

ExperimentSpec spec_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
    ExperimentSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const json& v = it.value();
        try {
            if (k == "name") v.get_to(s.name);
            else if (k == "task") s.task = parse_task(v.get<std::string>());
            else if (k == "profile") v.get_to(s.profile);
            else if (k == "config") {
                if (!v.is_object()) throw ConfigError("experiment spec: config must be an object");
                s.config = v;
            } else if (k == "method") s.method = parse_method(v.get<std::string>());
            else if (k == "obs") s.obs = parse_obs_mode(v.get<std::string>());
            else if (k == "random_type") s.random_type = parse_action_type(v.get<std::string>());
            else if (k == "axis") s.axis = parse_axis(v.get<std::string>());
            else if (k == "grid") v.get_to(s.grid);
            else if (k == "seeds") v.get_to(s.seeds);
            else if (k == "psi") v.get_to(s.psi);
            else if (k == "eval_episodes") v.get_to(s.eval_episodes);
            else if (k == "workers") v.get_to(s.workers);
            else if (k == "record_timing") v.get_to(s.record_timing);
            else if (k == "orthogonal_grid") v.get_to(s.orthogonal_grid);
            else if (k == "bench_users") v.get_to(s.bench_users);
            else if (k == "bench_ntx") v.get_to(s.bench_ntx);
            else if (k == "bench_repeats") v.get_to(s.bench_repeats);
            else if (k == "bench_methods") {
                s.bench_methods.clear();
                for (const auto& m : v) s.bench_methods.push_back(parse_method(m.get<std::string>()));
            }
            else if (k == "output_dir") v.get_to(s.output_dir);
            else if (k == "checkpoint_dir") v.get_to(s.checkpoint_dir);
            else if (k == "train") apply_json(s.train, v);
            else throw ConfigError("unknown experiment spec key '" + k + "'");
        } catch (const json::exception& e) {
            throw ConfigError("experiment spec key '" + k + "': " + e.what());
        } catch (const InvalidArgument& e) {
            throw ConfigError("experiment spec key '" + k + "': " + e.what());
        }
    }
    return s;
}

ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read experiment spec '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("experiment spec '" + path + "': " + e.what());
    }
    return spec_from_json(j);
}

std::string ExperimentSpec::hash() const {
    json j;
    to_json(j, *this);
    return hex64(fnv1a64(j.dump()));
}

std::string ExperimentSpec::training_hash() const {
    json train_j;
    to_json(train_j, train);
    json j = {{"profile", profile}, {"config", config}, {"method", to_string(method)},
              {"obs", to_string(obs)}, {"axis", to_string(axis)}, {"train", train_j}};
    if (axis != SweepAxis::psi) j["psi"] = psi;
    return hex64(fnv1a64(j.dump()));
}

PointSetup point_setup(const ExperimentSpec& spec, double value) {
    PointSetup p{spec.base_config(), spec.psi};
    SystemConfig& c = p.config;
    switch (spec.axis) {
        case SweepAxis::none: break;
        case SweepAxis::psi: p.psi = value; break;
        case SweepAxis::snr: {
            const double offset = value - (c.total_power_dbm - c.noise_comm_dbm);
            c.noise_comm_dbm -= offset;
            c.noise_sense_dbm -= offset;
            break;
        }
        case SweepAxis::users:
            c.n_users = static_cast<int>(value);
            c.n_rf = std::max(c.n_rf, c.n_users);
            break;
        case SweepAxis::velocity:
            c.speed_min_mps = value;
            c.speed_max_mps = value;
            break;
    }
    return p;
}

fs::path resolve_output_dir(const std::string& dir) {
    fs::path p(dir);
    if (p.is_relative())
        if (const char* root = std::getenv("ISAC_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
    return p;
}

fs::path checkpoint_path(const ExperimentSpec& spec, double value, std::uint64_t seed) {
    std::string name = std::string(to_string(spec.method)) + "-" + to_string(spec.obs) + "-" + to_string(spec.axis);
    if (spec.axis != SweepAxis::none) name += compact(value);
    name += "-" + spec.training_hash() + "-seed" + std::to_string(seed) + ".ckpt";
    return resolve_output_dir(spec.checkpoint_dir) / name;
}

std::uint64_t training_episode_seed(std::uint64_t seed, int episode) {
    return mix_seed(seed, 100000 + static_cast<std::uint64_t>(episode));
}

std::uint64_t evaluation_episode_seed(std::uint64_t seed, int episode) {
    return mix_seed(seed, 200000 + static_cast<std::uint64_t>(episode));
}

// ---- tables ---------------------------------------------------------------------------------

void Table::validate() const {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != columns.size())
            throw InvalidArgument("table row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                  " cells for " + std::to_string(columns.size()) + " columns");
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto want = static_cast<std::size_t>(columns[c].kind);
            if (rows[r][c].index() != want)
                throw InvalidArgument("table cell (" + std::to_string(r) + ", " + columns[c].name +
                                      ") does not match the column type");
        }
    }
}

bool Table::operator==(const Table& o) const {
    if (columns.size() != o.columns.size() || rows != o.rows) return false;
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c].name != o.columns[c].name || columns[c].kind != o.columns[c].kind) return false;
    return true;
}

namespace {

std::string cell_text(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

Cell parse_cell(const std::string& s, ColumnKind kind) {
    try {
        std::size_t used = 0;
        switch (kind) {
            case ColumnKind::real: {
                if (s == "nan") return std::nan("");
                if (s == "inf") return HUGE_VAL;
                if (s == "-inf") return -HUGE_VAL;
                const double v = std::stod(s, &used);
                if (used != s.size()) break;
                return v;
            }
            case ColumnKind::integer: {
                const long long v = std::stoll(s, &used);
                if (used != s.size()) break;
                return static_cast<std::int64_t>(v);
            }
            case ColumnKind::text: return s;
        }
    } catch (const std::exception&) {
    }
    throw IoError("table: cannot parse field '" + s + "'");
}

// RFC 4180 record split; returns false at end of input.
bool read_record(std::istream& is, std::vector<std::string>& fields) {
    fields.clear();
    if (is.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    for (;;) {
        const int ch = is.get();
        if (ch == std::char_traits<char>::eof()) {
            if (quoted) throw IoError("csv: unterminated quoted field");
            fields.push_back(field);
            return true;
        }
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    field += '"';
                    is.get();
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && is.peek() == '\n') is.get();
            fields.push_back(field);
            return true;
        } else {
            field += c;
        }
    }
}

}  // namespace

void write_csv(std::ostream& os, const Table& t) {
    t.validate();
    CsvWriter w(os);
    std::vector<std::string> header;
    for (const auto& c : t.columns) header.push_back(c.name);
    w.row(header);
    for (const auto& r : t.rows) {
        std::vector<std::string> f;
        for (const auto& c : r) f.push_back(cell_text(c));
        w.row(f);
    }
}

Table read_csv(std::istream& is, const std::vector<Column>& columns) {
    Table t;
    t.columns = columns;
    std::vector<std::string> fields;
    if (!read_record(is, fields)) throw IoError("csv: missing header row");
    if (fields.size() != columns.size()) throw IoError("csv: header has " + std::to_string(fields.size()) + " fields");
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (fields[c] != columns[c].name) throw IoError("csv: unexpected header field '" + fields[c] + "'");
    while (read_record(is, fields)) {
        if (fields.size() != columns.size()) throw IoError("csv: record with " + std::to_string(fields.size()) + " fields");
        std::vector<Cell> row;
        for (std::size_t c = 0; c < columns.size(); ++c) row.push_back(parse_cell(fields[c], columns[c].kind));
        t.rows.push_back(std::move(row));
    }
    return t;
}

json table_to_json(const Table& t) {
    t.validate();
    json arr = json::array();
    for (const auto& r : t.rows) {
        json o = json::object();
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto& name = t.columns[c].name;
            if (const auto* d = std::get_if<double>(&r[c])) {
                // JSON has no non-finite numbers; those travel as strings.
                if (std::isfinite(*d)) o[name] = *d;
                else o[name] = format_double(*d);
            } else if (const auto* i = std::get_if<std::int64_t>(&r[c])) {
                o[name] = *i;
            } else {
                o[name] = std::get<std::string>(r[c]);
            }
        }
        arr.push_back(std::move(o));
    }
    return arr;
}

Table table_from_json(const json& j, const std::vector<Column>& columns) {
    if (!j.is_array()) throw IoError("table JSON must be an array of row objects");
    Table t;
    t.columns = columns;
    for (const auto& o : j) {
        if (!o.is_object() || o.size() != columns.size()) throw IoError("table JSON row does not match the columns");
        std::vector<Cell> row;
        for (const auto& c : columns) {
            if (!o.contains(c.name)) throw IoError("table JSON row lacks '" + c.name + "'");
            const json& v = o.at(c.name);
            switch (c.kind) {
                case ColumnKind::real:
                    row.emplace_back(v.is_string() ? std::get<double>(parse_cell(v.get<std::string>(), c.kind))
                                                   : v.get<double>());
                    break;
                case ColumnKind::integer: row.emplace_back(v.get<std::int64_t>()); break;
                case ColumnKind::text: row.emplace_back(v.get<std::string>()); break;
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

const std::vector<Column>& ResultTable::columns() {
    static const std::vector<Column> cols{{"axis_value", ColumnKind::real},
                                          {"seed", ColumnKind::integer},
                                          {"mean_se", ColumnKind::real},
                                          {"mean_crlb", ColumnKind::real},
                                          {"cumulative_reward", ColumnKind::real},
                                          {"wall_clock_per_subframe", ColumnKind::real}};
    return cols;
}

void ResultTable::validate() const {
    std::map<std::pair<double, std::uint64_t>, int> seen;
    for (const auto& r : rows) {
        for (double v : {r.axis_value, r.mean_se, r.mean_crlb, r.cumulative_reward, r.wall_clock_per_subframe})
            if (!std::isfinite(v)) throw NumericalError("result table: non-finite entry");
        if (++seen[{r.axis_value, r.seed}] > 1)
            throw InvalidArgument("result table: duplicate (axis value, seed) row");
    }
}

Table ResultTable::to_table() const {
    Table t;
    t.columns = columns();
    for (const auto& r : rows)
        t.rows.push_back({r.axis_value, static_cast<std::int64_t>(r.seed), r.mean_se, r.mean_crlb,
                          r.cumulative_reward, r.wall_clock_per_subframe});
    return t;
}

ResultTable ResultTable::from_table(const Table& t) {
    if (!(t.columns.size() == columns().size())) throw InvalidArgument("result table: column mismatch");
    t.validate();
    ResultTable out;
    for (const auto& r : t.rows)
        out.rows.push_back({std::get<double>(r[0]), static_cast<std::uint64_t>(std::get<std::int64_t>(r[1])),
                            std::get<double>(r[2]), std::get<double>(r[3]), std::get<double>(r[4]),
                            std::get<double>(r[5])});
    return out;
}

EmitPaths emit(const Table& t, const ExperimentSpec& spec, const std::string& kind) {
    t.validate();
    const fs::path dir = resolve_output_dir(spec.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::string seeds;
    for (auto s : spec.seeds) seeds += (seeds.empty() ? "" : "-") + std::to_string(s);
    const std::string stem = spec.name + "_" + kind + "_" + spec.hash() + "_seed" + seeds;
    EmitPaths p{dir / (stem + ".csv"), dir / (stem + ".json")};
    {
        std::ofstream out(p.csv, std::ios::binary);
        if (!out) throw IoError("cannot write '" + p.csv.string() + "'");
        write_csv(out, t);
        if (!out) throw IoError("write failed for '" + p.csv.string() + "'");
    }
    {
        std::ofstream out(p.json, std::ios::binary);
        if (!out) throw IoError("cannot write '" + p.json.string() + "'");
        out << table_to_json(t).dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + p.json.string() + "'");
    }
    return p;
}

// ---- training and evaluation ----------------------------------------------------------------

EnvOptions env_options(const ExperimentSpec& spec, double psi) {
    EnvOptions eo;
    eo.action_type = spec.method == Method::random ? spec.random_type
                     : (spec.method == Method::drl_uu || spec.method == Method::drl_au)
                         ? method_action_type(spec.method)
                         : ActionType::user_dim;
    eo.obs_mode = spec.obs;
    eo.psi = psi;
    return eo;
}

namespace {

std::shared_ptr<ScenarioData> scenario_for(const PointSetup& p, std::uint64_t seed, std::shared_ptr<ScenarioData> data) {
    if (data) {
        if (data->seed() != seed) throw InvalidArgument("scenario data seed does not match the evaluated seed");
        return data;
    }
    return std::make_shared<ScenarioData>(p.config, seed);
}

NetworkShapes shapes_for(const std::shared_ptr<ScenarioData>& data, const EnvOptions& eo) {
    IsacEnv probe(data, eo, 0);
    return NetworkShapes::from(probe.reset(), eo.action_type, data->config());
}

}  // namespace

TrainedPoint train_point(const ExperimentSpec& spec, double value, std::uint64_t seed,
                         std::shared_ptr<ScenarioData> data, const std::function<void(const EpisodeLog&)>& on_episode) {
    const ActionType type = method_action_type(spec.method);
    const PointSetup p = point_setup(spec, value);
    data = scenario_for(p, seed, std::move(data));
    EnvOptions eo = env_options(spec, p.psi);
    eo.action_type = type;
    TrainedPoint out;
    out.agent = std::make_unique<PsacAgent>(shapes_for(data, eo), spec.train, mix_seed(seed, 3));
    out.log = out.agent->train(
        [&](int e) { return std::make_unique<IsacEnv>(data, eo, training_episode_seed(seed, e)); }, on_episode);
    return out;
}

namespace {

const std::vector<Column>& training_columns() {
    static const std::vector<Column> cols{
        {"axis_value", ColumnKind::real},   {"seed", ColumnKind::integer},       {"episode", ColumnKind::integer},
        {"cumulative_reward", ColumnKind::real}, {"critic_loss", ColumnKind::real}, {"actor_loss", ColumnKind::real},
        {"lambda", ColumnKind::real},       {"grad_norm", ColumnKind::real},     {"grad_norm_min", ColumnKind::real},
        {"syncs", ColumnKind::integer}};
    return cols;
}

}  // namespace

EmitPaths run_training(const ExperimentSpec& spec, const std::function<void(const std::string&)>& progress) {
    spec.validate();
    method_action_type(spec.method);
    const auto tasks = grid_tasks(spec);
    auto logs = parallel_map<std::vector<EpisodeLog>>(static_cast<int>(tasks.size()), spec.workers, [&](int i) {
        const auto& t = tasks[static_cast<std::size_t>(i)];
        TrainedPoint tp = train_point(spec, t.value, t.seed);
        const fs::path ck = checkpoint_path(spec, t.value, t.seed);
        std::error_code ec;
        fs::create_directories(ck.parent_path(), ec);
        if (ec) throw IoError("cannot create checkpoint directory '" + ck.parent_path().string() + "'");
        tp.agent->save(ck.string());
        if (progress) progress("trained " + ck.string());
        return tp.log;
    });
    Table t;
    t.columns = training_columns();
    for (std::size_t i = 0; i < tasks.size(); ++i)
        for (const auto& l : logs[i])
            t.rows.push_back({tasks[i].value, static_cast<std::int64_t>(tasks[i].seed),
                              static_cast<std::int64_t>(l.episode), l.cumulative_reward, l.critic_loss, l.actor_loss,
                              l.lambda, l.grad_norm, finite_or(l.grad_norm_min, l.grad_norm),
                              static_cast<std::int64_t>(l.syncs)});
    return emit(t, spec, "train");
}

ResultRow evaluate_point(const ExperimentSpec& spec, double value, std::uint64_t seed,
                         std::shared_ptr<ScenarioData> data, PsacAgent* agent) {
    const PointSetup p = point_setup(spec, value);
    data = scenario_for(p, seed, std::move(data));
    const EnvOptions eo = env_options(spec, p.psi);
    const SystemConfig& c = data->config();

    std::unique_ptr<PsacAgent> loaded;
    if ((spec.method == Method::drl_uu || spec.method == Method::drl_au) && !agent) {
        const fs::path ck = checkpoint_path(spec, value, seed);
        if (!fs::exists(ck))
            throw NotFoundError("missing checkpoint '" + ck.string() + "'; run the train task for this spec first");
        loaded = std::make_unique<PsacAgent>(shapes_for(data, eo), spec.train, mix_seed(seed, 3));
        loaded->load(ck.string());
        agent = loaded.get();
    }

    double se = 0.0, crlb = 0.0, reward = 0.0, wall = 0.0;
    long subframes = 0, timed = 0;
    for (int k = 0; k < spec.eval_episodes; ++k) {
        const std::uint64_t es = evaluation_episode_seed(seed, k);
        IsacEnv env(data, eo, es);
        Observation obs = env.reset();
        Rng policy_rng(mix_seed(es, 9));
        while (!env.done()) {
            StepInfo info;
            if (spec.method == Method::opt_based) {
                const auto t0 = Clock::now();
                const HybridPrecoder& f = data->optimized_precoder(p.psi, env.subframe());
                // Designs are cached per scenario, so only the first episode measures their cost.
                if (k == 0) {
                    wall += seconds_since(t0);
                    ++timed;
                }
                obs = env.step_with_precoder(f, info);
            } else {
                const auto t0 = Clock::now();
                const HybridAction a = spec.method == Method::random ? random_action(eo.action_type, c, policy_rng)
                                                                     : agent->act(obs, c);
                wall += seconds_since(t0);
                ++timed;
                obs = env.step(a, info);
            }
            se += info.se;
            crlb += info.crlb;
            reward += info.reward;
            ++subframes;
        }
    }
    ResultRow r;
    r.axis_value = value;
    r.seed = seed;
    r.mean_se = se / static_cast<double>(subframes);
    r.mean_crlb = crlb / static_cast<double>(subframes);
    r.cumulative_reward = reward / spec.eval_episodes;
    r.wall_clock_per_subframe = spec.record_timing && timed > 0 ? wall / static_cast<double>(timed) : 0.0;
    return r;
}

ResultTable run_sweep(const ExperimentSpec& spec) {
    spec.validate();
    const auto tasks = grid_tasks(spec);
    ResultTable t;
    t.rows = parallel_map<ResultRow>(static_cast<int>(tasks.size()), spec.workers, [&](int i) {
        return evaluate_point(spec, tasks[static_cast<std::size_t>(i)].value, tasks[static_cast<std::size_t>(i)].seed);
    });
    t.validate();
    return t;
}

// ---- trade-off boundary ---------------------------------------------------------------------

const std::vector<Column>& BoundaryResult::columns() {
    static const std::vector<Column> cols{{"series", ColumnKind::text},
                                          {"weight", ColumnKind::real},
                                          {"mean_se", ColumnKind::real},
                                          {"mean_crlb", ColumnKind::real}};
    return cols;
}

Table BoundaryResult::to_table() const {
    Table t;
    t.columns = columns();
    auto add = [&t](const char* series, const std::vector<BoundaryPoint>& pts) {
        for (const auto& p : pts) t.rows.push_back({std::string(series), p.weight, p.mean_se, p.mean_crlb});
    };
    add("joint", joint);
    add("frontier", frontier);
    add("orthogonal", orthogonal);
    return t;
}

std::vector<BoundaryPoint> pareto_frontier(std::vector<BoundaryPoint> points) {
    // Descending SE, ties by ascending CRLB; a point survives when its CRLB beats every point with
    // at least its SE.
    std::sort(points.begin(), points.end(), [](const BoundaryPoint& a, const BoundaryPoint& b) {
        return a.mean_se != b.mean_se ? a.mean_se > b.mean_se : a.mean_crlb < b.mean_crlb;
    });
    std::vector<BoundaryPoint> out;
    double best_crlb = HUGE_VAL;
    for (const auto& p : points)
        if (p.mean_crlb < best_crlb) {
            out.push_back(p);
            best_crlb = p.mean_crlb;
        }
    std::reverse(out.begin(), out.end());
    return out;
}

bool orthogonal_uses_comm(int n, double share) {
    return std::floor((n + 1) * share + 1e-12) > std::floor(n * share + 1e-12);
}

BoundaryResult run_boundary(const ExperimentSpec& spec_in) {
    ExperimentSpec spec = spec_in;
    spec.axis = SweepAxis::psi;
    spec.validate();
    BoundaryResult out;
    const int n_seeds = static_cast<int>(spec.seeds.size());

    const ResultTable joint = run_sweep(spec);
    for (double psi : spec.grid) {
        BoundaryPoint p{psi, 0.0, 0.0};
        for (const auto& r : joint.rows)
            if (r.axis_value == psi) p.mean_se += r.mean_se / n_seeds, p.mean_crlb += r.mean_crlb / n_seeds;
        out.joint.push_back(p);
    }
    out.frontier = pareto_frontier(out.joint);

    // Time sharing between the communication-only and sensing-only designs on the same scenarios.
    const SystemConfig config = spec.base_config();
    auto per_seed = parallel_map<std::vector<BoundaryPoint>>(n_seeds, spec.workers, [&](int i) {
        const std::uint64_t seed = spec.seeds[static_cast<std::size_t>(i)];
        auto data = std::make_shared<ScenarioData>(config, seed);
        std::vector<BoundaryPoint> pts;
        for (double share : spec.orthogonal_grid) {
            double se = 0.0, crlb = 0.0;
            long count = 0;
            for (int k = 0; k < spec.eval_episodes; ++k) {
                EnvOptions eo;
                eo.psi = 0.5;
                IsacEnv env(data, eo, evaluation_episode_seed(seed, k));
                env.reset();
                while (!env.done()) {
                    const double w = orthogonal_uses_comm(env.subframe(), share) ? 1.0 : 0.0;
                    StepInfo info;
                    env.step_with_precoder(data->optimized_precoder(w, env.subframe()), info);
                    se += info.se;
                    crlb += info.crlb;
                    ++count;
                }
            }
            pts.push_back({share, se / static_cast<double>(count), crlb / static_cast<double>(count)});
        }
        return pts;
    });
    for (std::size_t j = 0; j < spec.orthogonal_grid.size(); ++j) {
        BoundaryPoint p{spec.orthogonal_grid[j], 0.0, 0.0};
        for (const auto& pts : per_seed) p.mean_se += pts[j].mean_se / n_seeds, p.mean_crlb += pts[j].mean_crlb / n_seeds;
        out.orthogonal.push_back(p);
    }
    return out;
}

// ---- complexity -----------------------------------------------------------------------------

double actor_forward_flops(const NetworkShapes& s, const NetworkDims& d) {
    const double kk = static_cast<double>(d.kernel) * d.kernel;
    // conv (multiply-add per tap plus bias), batch norm (scale, shift), ReLU, optional 2x2 max pool
    auto stage = [&](int in_ch, int out_ch, int& h, int& w) {
        const double out = static_cast<double>(out_ch) * h * w;
        double f = out * (2.0 * in_ch * kk + 1.0) + 2.0 * out + out;
        if (h >= 2 && w >= 2) {
            h /= 2, w /= 2;
            f += 3.0 * out_ch * h * w;
        }
        return f;
    };
    auto stream = [&](int in_ch, int h, int w, int& features) {
        double f = stage(in_ch, d.conv1, h, w);
        f += stage(d.conv1, d.conv2, h, w);
        features = d.conv2 * h * w;
        return f;
    };
    auto dense = [](double in, double out) { return 2.0 * in * out; };
    int fh = 0, fp = 0;
    double f = stream(1, s.sh_rows, s.sh_cols, fh) + stream(3, s.grid_x, s.grid_y, fp);
    const double W = d.width;
    const double n_rf = s.n_select + s.n_phase;
    f += dense(fh + fp + W, W) + 3.0 * W;        // internal layer, batch norm, ReLU
    f += dense(W, W) + W + dense(W, n_rf) + n_rf;  // analog head
    f += dense(W + n_rf, W) + W + dense(W, s.n_digital) + s.n_digital;  // digital head
    return f;
}

namespace {

double mean_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ComplexityRow bench_drl(const ExperimentSpec& spec, Method m, SystemConfig c) {
    const ActionType type = method_action_type(m);
    const std::uint64_t seed = spec.seeds.front();
    auto data = std::make_shared<ScenarioData>(c, seed);
    Observation obs;
    obs.s_h = data->preamble_observation();
    for (auto& g : obs.s_p) g = RMat::Zero(c.grid.n_x, c.grid.n_y);
    const NetworkShapes shapes = NetworkShapes::from(obs, type, c);
    Rng rng(mix_seed(seed, 11));
    PsacNetwork net(shapes, spec.train.dims, rng);
    HybridPrecoder f = random_precoder(c.n_tx, c.n_users, c.n_sub, c.phase_bits, rng);

    ComplexityRow row;
    row.method = m;
    row.n_tx = c.n_tx;
    row.n_users = c.n_users;
    row.n_sub = c.n_sub;
    row.actor_flops = actor_forward_flops(shapes, spec.train.dims);
    row.repeats = spec.bench_repeats;
    std::vector<double> wall;
    UpdateCounts& uc = update_counts();
    for (int r = 0; r < spec.bench_repeats; ++r) {
        const UpdateCounts before = uc;
        const auto t0 = Clock::now();
        const HybridAction a = net.act(obs, c);
        f = type == ActionType::user_dim ? apply_action_user_dim(f, a, c, rng) : apply_action_antenna_dim(f, a, c, rng, 0.1);
        wall.push_back(seconds_since(t0));
        // Tallies are deterministic per call; the last repeat is reported.
        row.decode_flops = static_cast<double>(uc.decode - before.decode);
        row.update_flops = static_cast<double>(uc.update - before.update);
        row.normalize_flops = static_cast<double>(uc.normalize - before.normalize);
    }
    if (spec.record_timing) row.wall_mean_s = mean_of(wall), row.wall_std_s = std_of(wall);
    return row;
}

ComplexityRow bench_opt(const ExperimentSpec& spec, SystemConfig c) {
    auto data = std::make_shared<ScenarioData>(c, spec.seeds.front());
    ComplexityRow row;
    row.method = Method::opt_based;
    row.n_tx = c.n_tx;
    row.n_users = c.n_users;
    row.n_sub = c.n_sub;
    row.repeats = spec.bench_repeats;
    std::vector<double> wall;
    for (int r = 0; r < spec.bench_repeats; ++r) {
        const int n = r % data->n_subframes();
        const auto t0 = Clock::now();
        // The boundary solves are part of each design, so they are inside the timed region.
        data->boundaries(n);
        data->optimized_precoder(spec.psi, n);
        wall.push_back(seconds_since(t0));
    }
    if (spec.record_timing) row.wall_mean_s = mean_of(wall), row.wall_std_s = std_of(wall);
    return row;
}

}  // namespace

std::vector<ComplexityRow> measure_complexity(const ExperimentSpec& spec) {
    spec.validate();
    const SystemConfig base = spec.base_config();
    std::vector<ComplexityRow> rows;
    auto wanted = [&](Method m) {
        return std::find(spec.bench_methods.begin(), spec.bench_methods.end(), m) != spec.bench_methods.end();
    };
    for (Method m : {Method::drl_uu, Method::drl_au}) {
        if (!wanted(m)) continue;
        for (int n_tx : spec.bench_ntx)
            for (int u : spec.bench_users) {
                SystemConfig c = base;
                c.n_tx = n_tx;
                c.n_users = u;
                c.n_rf = std::max(c.n_rf, u);
                c.u_max = std::max(c.u_max, u);
                c.validate();
                rows.push_back(bench_drl(spec, m, c));
            }
    }
    if (wanted(Method::opt_based))
        for (int n_tx : spec.bench_ntx) {
            SystemConfig c = base;
            c.n_tx = n_tx;
            c.validate();
            rows.push_back(bench_opt(spec, c));
        }
    return rows;
}

Table complexity_table(const std::vector<ComplexityRow>& rows) {
    Table t;
    t.columns = {{"method", ColumnKind::text},       {"n_tx", ColumnKind::integer},
                 {"n_users", ColumnKind::integer},   {"n_sub", ColumnKind::integer},
                 {"actor_flops", ColumnKind::real},  {"decode_flops", ColumnKind::real},
                 {"update_flops", ColumnKind::real}, {"normalize_flops", ColumnKind::real},
                 {"wall_mean_s", ColumnKind::real},  {"wall_std_s", ColumnKind::real},
                 {"repeats", ColumnKind::integer}};
    for (const auto& r : rows)
        t.rows.push_back({std::string(to_string(r.method)), std::int64_t{r.n_tx}, std::int64_t{r.n_users},
                          std::int64_t{r.n_sub}, r.actor_flops, r.decode_flops, r.update_flops, r.normalize_flops,
                          r.wall_mean_s, r.wall_std_s, std::int64_t{r.repeats}});
    return t;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit_line: need two or more paired samples");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InvalidArgument("fit_line: x has no spread");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    // A constant y is fitted exactly.
    f.r2 = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
    return f;
}

// ---- drivers --------------------------------------------------------------------------------

std::vector<EmitPaths> run_task(const ExperimentSpec& spec, const std::function<void(const std::string&)>& progress) {
    switch (spec.task) {
        case Task::train: return {run_training(spec, progress)};
        case Task::sweep: {
            const ResultTable t = run_sweep(spec);
            return {emit(t.to_table(), spec, std::string("sweep-") + to_string(spec.method))};
        }
        case Task::boundary: return {emit(run_boundary(spec).to_table(), spec, "boundary")};
        case Task::bench: return {emit(complexity_table(measure_complexity(spec)), spec, "bench")};
    }
    throw InvalidArgument("run_task: unknown task");
}

std::vector<fs::path> generate_scenarios(const ExperimentSpec& spec) {
    spec.validate();
    const fs::path dir = resolve_output_dir(spec.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    std::vector<fs::path> out;
    for (double v : spec.grid)
        for (auto seed : spec.seeds) {
            const SystemConfig c = point_setup(spec, v).config;
            json cj;
            to_json(cj, c);
            const json j = {{"seed", seed}, {"config", cj}, {"scenario", scenario_to_json(generate_scenario(c, seed))}};
            std::string name = spec.name + "_scenario_" + to_string(spec.axis);
            if (spec.axis != SweepAxis::none) name += compact(v);
            const fs::path p = dir / (name + "_seed" + std::to_string(seed) + ".json");
            std::ofstream f(p, std::ios::binary);
            if (!f) throw IoError("cannot write '" + p.string() + "'");
            f << j.dump(2) << '\n';
            out.push_back(p);
        }
    return out;
}

std::vector<EmitPaths> emit_placeholders(const ExperimentSpec& spec) {
    // The external baselines are not implemented; their series exist so plots keep a fixed legend.
    const Table empty = ResultTable{}.to_table();
    return {emit(empty, spec, "sweep-mp-based"), emit(empty, spec, "sweep-greedy-based")};
}

}  // namespace isac
