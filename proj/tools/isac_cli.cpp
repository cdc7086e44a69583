// SPDX-License-Identifier: Apache-2.0
// Command-line front end over the C interface. Flags build a spec, a --spec file overrides them,
// and relative output directories resolve under $ISAC_OUTPUT_ROOT.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "isac/isac.h"

namespace {

using nlohmann::json;

struct Flags {
    std::string spec_file;
    std::string name, task, profile, system, method, obs, random_type, axis, output_dir, checkpoint_dir, train;
    std::vector<double> grid, orthogonal_grid;
    std::vector<std::uint64_t> seeds;
    std::vector<int> bench_users, bench_ntx;
    std::vector<std::string> bench_methods;
    double psi = 0.0;
    int eval_episodes = 0, workers = 0, bench_repeats = 0, episodes = 0;
    bool record_timing = false, quiet = false;
};

void add_spec_flags(CLI::App& app, Flags& f) {
    app.add_option("--spec", f.spec_file, "JSON experiment spec; its keys override the flags")->check(CLI::ExistingFile);
    app.add_option("--name", f.name, "Experiment name used in output file names");
    app.add_option("--task", f.task, "train, sweep, boundary or bench (emit-plots-data only)");
    app.add_option("--profile", f.profile, "System profile: desk or paper");
    app.add_option("--system", f.system, "JSON object of system configuration overrides");
    app.add_option("--method", f.method, "drl-uu, drl-au, opt-based or random");
    app.add_option("--obs", f.obs, "Observation ablation: pc, po or co");
    app.add_option("--random-type", f.random_type, "Action space of the random baseline: user_dim or antenna_dim");
    app.add_option("--axis", f.axis, "Sweep axis: none, snr, psi, users or velocity");
    app.add_option("--grid", f.grid, "Axis values")->delimiter(',');
    app.add_option("--seeds", f.seeds, "Scenario seeds")->delimiter(',');
    app.add_option("--psi", f.psi, "Reward weight when psi is not the axis");
    app.add_option("--eval-episodes", f.eval_episodes, "Evaluation episodes per grid point");
    app.add_option("--workers", f.workers, "Worker threads over grid points");
    app.add_flag("--record-timing", f.record_timing, "Fill the wall-clock columns");
    app.add_option("--orthogonal-grid", f.orthogonal_grid, "Communication shares of the time-sharing reference")
        ->delimiter(',');
    app.add_option("--bench-users", f.bench_users, "User counts of the complexity bench")->delimiter(',');
    app.add_option("--bench-ntx", f.bench_ntx, "Antenna counts of the complexity bench")->delimiter(',');
    app.add_option("--bench-methods", f.bench_methods, "Methods of the complexity bench")->delimiter(',');
    app.add_option("--bench-repeats", f.bench_repeats, "Timing repeats per bench row");
    app.add_option("--output-dir", f.output_dir, "Directory of emitted tables");
    app.add_option("--checkpoint-dir", f.checkpoint_dir, "Directory of trained networks");
    app.add_option("--episodes", f.episodes, "Training episodes");
    app.add_option("--train", f.train, "JSON object of training overrides");
    app.add_flag("--quiet", f.quiet, "Suppress progress lines");
}

json parse_object(const std::string& text, const char* flag) {
    json j = json::parse(text, nullptr, false);
    if (!j.is_object()) throw CLI::ValidationError(flag, "expects a JSON object");
    return j;
}

json flags_to_json(const CLI::App& app, const Flags& f) {
    json j = json::object();
    auto given = [&app](const char* opt) { return app.count(opt) > 0; };
    if (given("--name")) j["name"] = f.name;
    if (given("--task")) j["task"] = f.task;
    if (given("--profile")) j["profile"] = f.profile;
    if (given("--system")) j["config"] = parse_object(f.system, "--system");
    if (given("--method")) j["method"] = f.method;
    if (given("--obs")) j["obs"] = f.obs;
    if (given("--random-type")) j["random_type"] = f.random_type;
    if (given("--axis")) j["axis"] = f.axis;
    if (given("--grid")) j["grid"] = f.grid;
    if (given("--seeds")) j["seeds"] = f.seeds;
    if (given("--psi")) j["psi"] = f.psi;
    if (given("--eval-episodes")) j["eval_episodes"] = f.eval_episodes;
    if (given("--workers")) j["workers"] = f.workers;
    if (given("--record-timing")) j["record_timing"] = f.record_timing;
    if (given("--orthogonal-grid")) j["orthogonal_grid"] = f.orthogonal_grid;
    if (given("--bench-users")) j["bench_users"] = f.bench_users;
    if (given("--bench-ntx")) j["bench_ntx"] = f.bench_ntx;
    if (given("--bench-methods")) j["bench_methods"] = f.bench_methods;
    if (given("--bench-repeats")) j["bench_repeats"] = f.bench_repeats;
    if (given("--output-dir")) j["output_dir"] = f.output_dir;
    if (given("--checkpoint-dir")) j["checkpoint_dir"] = f.checkpoint_dir;
    json train = given("--train") ? parse_object(f.train, "--train") : json::object();
    if (given("--episodes")) train["episodes"] = f.episodes;
    if (!train.empty()) j["train"] = train;
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int report(isac_status s) {
    std::fprintf(stderr, "isac: %s error: %s\n", isac_status_name(s), isac_last_error());
    return static_cast<int>(s) < 100 ? 10 + static_cast<int>(s) : 2;
}

void print_progress(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

// Owns the spec handle across a verb.
struct SpecHandle {
    isac_spec* p = nullptr;
    ~SpecHandle() { isac_spec_free(p); }
};

isac_status build_spec(const CLI::App& app, const Flags& f, SpecHandle& out) {
    const json flags = flags_to_json(app, f);
    if (isac_status s = isac_spec_from_json(flags.dump().c_str(), &out.p); s != ISAC_OK) return s;
    if (!f.spec_file.empty()) return isac_spec_merge_json(out.p, read_file(f.spec_file).c_str());
    return ISAC_OK;
}

int finish(isac_status s, char* paths) {
    if (s != ISAC_OK) return report(s);
    const json j = json::parse(paths);
    isac_string_free(paths);
    for (const auto& p : j) {
        if (p.is_string()) std::cout << p.get<std::string>() << '\n';
        else std::cout << p.at("csv").get<std::string>() << '\n' << p.at("json").get<std::string>() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid-precoding ISAC experiments: scenarios, training, sweeps, boundaries and benchmarks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", isac_version());

    struct Verb {
        const char* name;
        const char* help;
        CLI::App* cmd = nullptr;
        Flags flags{};
    };
    std::vector<Verb> verbs{{"generate", "Write the scenario description of every grid point and seed"},
                            {"train", "Train the DRL method on every grid point and seed and save checkpoints"},
                            {"evaluate", "Evaluate the method over the grid (DRL methods load checkpoints)"},
                            {"sweep", "Same as evaluate"},
                            {"boundary", "Trade-off boundary over the psi grid plus the time-sharing reference"},
                            {"bench", "Operation counts and per-subframe wall-clock of every method"},
                            {"emit-plots-data", "Run the spec task and add the external-baseline placeholder series"},
                            {"show-spec", "Print the resolved spec as JSON"}};
    for (auto& v : verbs) {
        v.cmd = app.add_subcommand(v.name, v.help);
        add_spec_flags(*v.cmd, v.flags);
    }
    CLI11_PARSE(app, argc, argv);

    for (auto& v : verbs) {
        if (!v.cmd->parsed()) continue;
        SpecHandle spec;
        isac_status s;
        try {
            s = build_spec(*v.cmd, v.flags, spec);
        } catch (const CLI::Error& e) {
            return app.exit(e);
        }
        if (s != ISAC_OK) return report(s);
        const std::string verb = v.name;
        const isac_progress_fn progress = v.flags.quiet ? nullptr : print_progress;
        char* paths = nullptr;
        if (verb == "generate") s = isac_generate(spec.p, &paths);
        else if (verb == "train") s = isac_train(spec.p, progress, nullptr, &paths);
        else if (verb == "evaluate" || verb == "sweep") s = isac_sweep(spec.p, &paths);
        else if (verb == "boundary") s = isac_boundary(spec.p, &paths);
        else if (verb == "bench") s = isac_bench(spec.p, &paths);
        else if (verb == "emit-plots-data") s = isac_emit_plots_data(spec.p, progress, nullptr, &paths);
        if (paths || s != ISAC_OK) return finish(s, paths);
        char* text = nullptr;
        if (s = isac_spec_to_json(spec.p, &text); s != ISAC_OK) return report(s);
        std::cout << text << '\n';
        isac_string_free(text);
        return 0;
    }
    return 1;
}
