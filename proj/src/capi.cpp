// SPDX-License-Identifier: Apache-2.0
#include "isac/isac.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "isac/harness.hpp"

using nlohmann::json;

struct isac_spec {
    isac::ExperimentSpec spec;
};

struct isac_env {
    std::shared_ptr<isac::ScenarioData> data;
    std::unique_ptr<isac::IsacEnv> env;
    isac::Rng rng;
};

namespace {

thread_local std::string g_last_error;

isac_status fail(isac_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Maps every exception to a status; nothing propagates across the C boundary.
template <class F>
isac_status guarded(F&& f) {
    try {
        f();
        return ISAC_OK;
    } catch (const isac::Error& e) {
        return fail(static_cast<isac_status>(static_cast<int>(e.code())), e.what());
    } catch (const json::exception& e) {
        return fail(ISAC_ERR_CONFIG, e.what());
    } catch (const std::bad_alloc&) {
        return fail(ISAC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(ISAC_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(ISAC_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

void require(bool ok, const char* what) {
    if (!ok) throw isac::InvalidArgument(what);
}

void put(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

std::string paths_json(const std::vector<isac::EmitPaths>& paths) {
    json j = json::array();
    for (const auto& p : paths) j.push_back({{"csv", p.csv.string()}, {"json", p.json.string()}});
    return j.dump();
}

std::function<void(const std::string&)> progress_fn(isac_progress_fn f, void* user) {
    if (!f) return {};
    return [f, user](const std::string& m) { f(m.c_str(), user); };
}

isac::RVec vec_from(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const isac::RVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json vec_json(const isac::RVec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json action_json(const isac::HybridAction& a) {
    return {{"select", vec_json(a.select)}, {"phase", vec_json(a.phase)}, {"digital", vec_json(a.digital)}};
}

}  // namespace

extern "C" {

const char* isac_version(void) { return "1.0.0"; }

const char* isac_last_error(void) { return g_last_error.c_str(); }

const char* isac_status_name(isac_status s) {
    switch (s) {
        case ISAC_OK: return "ok";
        case ISAC_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case ISAC_ERR_CONFIG: return "config";
        case ISAC_ERR_IO: return "io";
        case ISAC_ERR_INFEASIBLE: return "infeasible";
        case ISAC_ERR_NUMERICAL: return "numerical";
        case ISAC_ERR_STATE: return "state";
        case ISAC_ERR_NOT_FOUND: return "not_found";
        case ISAC_ERR_RANGE_UNDERFLOW: return "range_underflow";
        case ISAC_ERR_SINGULAR: return "singular";
        case ISAC_ERR_SHAPE: return "shape";
        case ISAC_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void isac_string_free(char* s) { std::free(s); }

isac_status isac_spec_from_json(const char* text, isac_spec** out) {
    return guarded([&] {
        require(text && out, "isac_spec_from_json: null argument");
        auto h = std::make_unique<isac_spec>();
        h->spec = isac::spec_from_json(json::parse(text));
        h->spec.validate();
        *out = h.release();
    });
}

isac_status isac_spec_load(const char* path, isac_spec** out) {
    return guarded([&] {
        require(path && out, "isac_spec_load: null argument");
        auto h = std::make_unique<isac_spec>();
        h->spec = isac::load_spec(path);
        h->spec.validate();
        *out = h.release();
    });
}

void isac_spec_free(isac_spec* spec) { delete spec; }

isac_status isac_spec_merge_json(isac_spec* spec, const char* text) {
    return guarded([&] {
        require(spec && text, "isac_spec_merge_json: null argument");
        const json patch = json::parse(text);
        if (!patch.is_object()) throw isac::ConfigError("spec overrides must be a JSON object");
        json base;
        to_json(base, spec->spec);
        // Nested objects merge key by key, so partial "train" or "config" overrides keep the rest.
        base.merge_patch(patch);
        isac::ExperimentSpec merged = isac::spec_from_json(base);
        merged.validate();
        spec->spec = std::move(merged);
    });
}

isac_status isac_spec_to_json(const isac_spec* spec, char** out) {
    return guarded([&] {
        require(spec && out, "isac_spec_to_json: null argument");
        json j;
        to_json(j, spec->spec);
        *out = dup_string(j.dump(2));
    });
}

isac_status isac_spec_hash(const isac_spec* spec, char out[17]) {
    return guarded([&] {
        require(spec && out, "isac_spec_hash: null argument");
        const std::string h = spec->spec.hash();
        std::memcpy(out, h.c_str(), 17);
    });
}

isac_status isac_generate(const isac_spec* spec, char** paths) {
    return guarded([&] {
        require(spec, "isac_generate: null spec");
        json j = json::array();
        for (const auto& p : isac::generate_scenarios(spec->spec)) j.push_back(p.string());
        put(paths, j.dump());
    });
}

isac_status isac_train(const isac_spec* spec, isac_progress_fn progress, void* user, char** paths) {
    return guarded([&] {
        require(spec, "isac_train: null spec");
        put(paths, paths_json({isac::run_training(spec->spec, progress_fn(progress, user))}));
    });
}

isac_status isac_sweep(const isac_spec* spec, char** paths) {
    return guarded([&] {
        require(spec, "isac_sweep: null spec");
        isac::ExperimentSpec s = spec->spec;
        s.task = isac::Task::sweep;
        put(paths, paths_json(isac::run_task(s)));
    });
}

isac_status isac_boundary(const isac_spec* spec, char** paths) {
    return guarded([&] {
        require(spec, "isac_boundary: null spec");
        isac::ExperimentSpec s = spec->spec;
        s.task = isac::Task::boundary;
        put(paths, paths_json(isac::run_task(s)));
    });
}

isac_status isac_bench(const isac_spec* spec, char** paths) {
    return guarded([&] {
        require(spec, "isac_bench: null spec");
        isac::ExperimentSpec s = spec->spec;
        s.task = isac::Task::bench;
        put(paths, paths_json(isac::run_task(s)));
    });
}

isac_status isac_emit_plots_data(const isac_spec* spec, isac_progress_fn progress, void* user, char** paths) {
    return guarded([&] {
        require(spec, "isac_emit_plots_data: null spec");
        auto all = isac::run_task(spec->spec, progress_fn(progress, user));
        for (auto& p : isac::emit_placeholders(spec->spec)) all.push_back(std::move(p));
        put(paths, paths_json(all));
    });
}

isac_status isac_env_create(const isac_spec* spec, uint64_t scenario_seed, uint64_t episode_seed, isac_env** out) {
    return guarded([&] {
        require(spec && out, "isac_env_create: null argument");
        const isac::PointSetup p = isac::point_setup(spec->spec, spec->spec.grid.front());
        auto h = std::make_unique<isac_env>();
        h->data = std::make_shared<isac::ScenarioData>(p.config, scenario_seed);
        h->env = std::make_unique<isac::IsacEnv>(h->data, isac::env_options(spec->spec, p.psi), episode_seed);
        h->rng.seed(isac::mix_seed(episode_seed, 9));
        *out = h.release();
    });
}

void isac_env_free(isac_env* env) { delete env; }

isac_status isac_env_reset(isac_env* env, char** obs) {
    return guarded([&] {
        require(env, "isac_env_reset: null env");
        const isac::Observation o = env->env->reset();
        put(obs, isac::observation_to_json(o).dump());
    });
}

isac_status isac_env_step(isac_env* env, const char* action, char** obs, char** info, int* done) {
    return guarded([&] {
        require(env && action, "isac_env_step: null argument");
        const json j = json::parse(action);
        isac::HybridAction a;
        a.type = env->env->action_type();
        a.select = vec_from(j, "select");
        a.phase = vec_from(j, "phase");
        a.digital = vec_from(j, "digital");
        isac::validate_action(a, env->env->config());
        isac::StepInfo si;
        const isac::Observation o = env->env->step(a, si);
        put(obs, isac::observation_to_json(o).dump());
        put(info, json{{"subframe", si.subframe},
                       {"reward", si.reward},
                       {"se", si.se},
                       {"fisher", si.fisher},
                       {"crlb", std::isfinite(si.crlb) ? json(si.crlb) : json(nullptr)},
                       {"se_bound", si.se_bound},
                       {"fisher_bound", si.fisher_bound},
                       {"clamped", si.clamped}}
                      .dump());
        if (done) *done = env->env->done() ? 1 : 0;
    });
}

isac_status isac_env_random_action(isac_env* env, char** action) {
    return guarded([&] {
        require(env && action, "isac_env_random_action: null argument");
        put(action, action_json(isac::random_action(env->env->action_type(), env->env->config(), env->rng)).dump());
    });
}

}  // extern "C"
