// SPDX-License-Identifier: Apache-2.0
// Exercises the shared library through its C header only.
#include "doctest.h"

#include <cstring>
#include <string>

#include "json.hpp"

#include "isac/isac.h"

using nlohmann::json;

namespace {

std::string take(char* s) {
    std::string out = s ? s : "";
    isac_string_free(s);
    return out;
}

}  // namespace

TEST_CASE("spec handles report typed errors") {
    isac_spec* spec = nullptr;
    CHECK(isac_spec_from_json("{\"method\": \"sgd\"}", &spec) == ISAC_ERR_CONFIG);
    CHECK(spec == nullptr);
    CHECK(std::string(isac_last_error()).find("sgd") != std::string::npos);
    CHECK(isac_spec_from_json("{not json", &spec) == ISAC_ERR_CONFIG);
    CHECK(isac_spec_from_json(nullptr, &spec) == ISAC_ERR_INVALID_ARGUMENT);
    CHECK(isac_spec_load("/nonexistent/spec.json", &spec) == ISAC_ERR_IO);
    CHECK(std::string(isac_status_name(ISAC_ERR_NOT_FOUND)) == "not_found");

    REQUIRE(isac_spec_from_json("{\"seeds\": [4], \"train\": {\"episodes\": 7}}", &spec) == ISAC_OK);
    char hash[17];
    REQUIRE(isac_spec_hash(spec, hash) == ISAC_OK);
    CHECK(std::strlen(hash) == 16);

    // Merging keeps the untouched nested fields and rejects invalid results without side effects.
    REQUIRE(isac_spec_merge_json(spec, "{\"train\": {\"lr\": 0.0005}}") == ISAC_OK);
    char* text = nullptr;
    REQUIRE(isac_spec_to_json(spec, &text) == ISAC_OK);
    const json j = json::parse(take(text));
    CHECK(j["train"]["episodes"] == 7);
    CHECK(j["train"]["lr"] == 0.0005);
    CHECK(j["seeds"] == json::array({4}));
    CHECK(isac_spec_merge_json(spec, "{\"psi\": 2}") == ISAC_ERR_CONFIG);
    REQUIRE(isac_spec_to_json(spec, &text) == ISAC_OK);
    CHECK(json::parse(take(text))["psi"] == 0.5);

    isac_env* env = nullptr;
    CHECK(isac_env_create(nullptr, 1, 1, &env) == ISAC_ERR_INVALID_ARGUMENT);
    isac_spec_free(spec);
}

TEST_CASE("environment handles run a frame") {
    isac_spec* spec = nullptr;
    REQUIRE(isac_spec_from_json("{\"method\": \"random\", \"random_type\": \"antenna_dim\", "
                                "\"config\": {\"subframes_per_frame\": 2}}",
                                &spec) == ISAC_OK);
    isac_env* env = nullptr;
    REQUIRE(isac_env_create(spec, 3, 5, &env) == ISAC_OK);

    char* action = nullptr;
    CHECK(isac_env_step(env, "{}", nullptr, nullptr, nullptr) != ISAC_OK);  // before reset

    char* obs = nullptr;
    REQUIRE(isac_env_reset(env, &obs) == ISAC_OK);
    const json o = json::parse(take(obs));
    CHECK(o["s_p"].size() == 3);

    CHECK(isac_env_step(env, "{\"select\": [2.0]}", nullptr, nullptr, nullptr) == ISAC_ERR_INVALID_ARGUMENT);
    int done = 0, steps = 0;
    while (!done) {
        REQUIRE(isac_env_random_action(env, &action) == ISAC_OK);
        const std::string a = take(action);
        CHECK(json::parse(a)["phase"].empty());
        char* info = nullptr;
        REQUIRE(isac_env_step(env, a.c_str(), &obs, &info, &done) == ISAC_OK);
        isac_string_free(obs);
        const json i = json::parse(take(info));
        CHECK(i["subframe"] == steps);
        CHECK(i["se"].get<double>() > 0.0);
        ++steps;
    }
    CHECK(steps == 2);
    isac_env_free(env);
    isac_spec_free(spec);
}
