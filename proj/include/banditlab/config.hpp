#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "banditlab/environments.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/harness.hpp"

namespace banditlab {

// Config files are JSON with a mandatory integer "version". Unknown fields
// anywhere in the tree are hard errors: a silently ignored typo in a
// hyperparameter name would invalidate an experiment.

inline constexpr int kConfigVersion = 1;

namespace cfgdetail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");
    for (const auto& [key, val] : j.items()) {
        (void)val;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) { ok = true; break; }
        if (!ok) throw InputError(where + ": unknown field \"" + key + "\"");
    }
}

template <typename T>
T get_req(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key))
        throw InputError(where + ": missing required field \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(where + ": field \"" + key + "\" has the wrong type");
    }
}

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) return std::nullopt;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(where + ": field \"" + key + "\" has the wrong type");
    }
}

} // namespace cfgdetail

inline nlohmann::json parse_config_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("config: not valid JSON");
    return j;
}

inline nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("config: cannot open \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// Applies one `--set dotted.path=value` override. The value text is parsed
// as JSON when possible, otherwise taken as a string. Paths may introduce
// new keys; the strict validators downstream still reject unknown fields.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw InputError("--set expects key.path=value, got \"" + assignment + "\"");
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;

    nlohmann::json* node = &root;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = path.find('.', pos);
        std::string part = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (part.empty()) throw InputError("--set: empty path segment in \"" + path + "\"");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(parsed);
            return;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

inline void require_version(const nlohmann::json& root) {
    if (!root.contains("version"))
        throw InputError("config: missing required field \"version\"");
    if (!root.at("version").is_number_integer() ||
        root.at("version").get<int>() != kConfigVersion)
        throw InputError("config: unsupported version (expected " +
                         std::to_string(kConfigVersion) + ")");
}

// Builds the runnable experiment out of the "experiment" object:
//   environment: {"type": "hard" | "stochastic" | "script" | "random_multiclass", ...}
//   learner:     {"name": "lbftrl" | "exp4", "eta"?, "nu"?, "epsilon"?}
//   policy_table: required for stochastic/script, forbidden when derived
// plus T, repeats, base_seed, record_full_trace?, sparsity?.
inline ExperimentConfig load_experiment(const nlohmann::json& exp) {
    cfgdetail::check_keys(exp,
                          {"environment", "learner", "policy_table", "T", "repeats",
                           "base_seed", "record_full_trace", "sparsity"},
                          "experiment");

    if (!exp.contains("environment"))
        throw InputError("experiment: missing required field \"environment\"");
    const nlohmann::json& envj = exp.at("environment");
    std::string type = cfgdetail::get_req<std::string>(envj, "type", "environment");

    ExperimentConfig cfg;
    auto table_json = cfgdetail::get_opt<nlohmann::json>(exp, "policy_table", "experiment");

    if (type == "hard") {
        cfgdetail::check_keys(envj, {"type", "C", "K", "target"}, "environment(hard)");
        nlohmann::json spec_j = envj;
        spec_j.erase("type");
        HardInstanceSpec spec = HardInstanceSpec::from_json(spec_j);
        if (table_json)
            throw InputError("experiment: policy_table is derived for hard instances; "
                             "remove the field");
        cfg.table = std::make_shared<PolicyTable>(build_hard_class(spec.C, spec.K));
        cfg.env = std::make_shared<HardInstanceEnv>(std::move(spec));
    } else if (type == "stochastic") {
        cfgdetail::check_keys(envj, {"type", "context_probs", "label_probs"},
                              "environment(stochastic)");
        nlohmann::json spec_j = envj;
        spec_j.erase("type");
        StochasticMulticlassSpec spec = StochasticMulticlassSpec::from_json(spec_j);
        if (!table_json)
            throw InputError("experiment: stochastic environments require policy_table");
        cfg.table = std::make_shared<PolicyTable>(PolicyTable::from_json(*table_json));
        cfg.env = std::make_shared<StochasticEnv>(std::move(spec));
    } else if (type == "script") {
        cfgdetail::check_keys(envj, {"type", "C", "K", "rounds"}, "environment(script)");
        nlohmann::json spec_j = envj;
        spec_j.erase("type");
        AdversarialScript script = AdversarialScript::from_json(spec_j);
        if (!table_json)
            throw InputError("experiment: script environments require policy_table");
        cfg.table = std::make_shared<PolicyTable>(PolicyTable::from_json(*table_json));
        cfg.env = std::make_shared<ScriptEnv>(std::move(script));
    } else if (type == "random_multiclass") {
        cfgdetail::check_keys(envj, {"type", "N", "C", "K", "gen_seed"},
                              "environment(random_multiclass)");
        int n = cfgdetail::get_req<int>(envj, "N", "environment(random_multiclass)");
        int c = cfgdetail::get_req<int>(envj, "C", "environment(random_multiclass)");
        int k = cfgdetail::get_req<int>(envj, "K", "environment(random_multiclass)");
        auto gs = cfgdetail::get_req<std::uint64_t>(envj, "gen_seed",
                                                    "environment(random_multiclass)");
        if (table_json)
            throw InputError("experiment: policy_table is generated for random_multiclass; "
                             "remove the field");
        GeneratedInstance gi = make_random_multiclass(n, c, k, gs);
        cfg.table = std::make_shared<PolicyTable>(std::move(gi.table));
        cfg.env = std::make_shared<StochasticEnv>(std::move(gi.spec));
    } else {
        throw InputError("environment: unknown type \"" + type + "\"");
    }

    if (!exp.contains("learner"))
        throw InputError("experiment: missing required field \"learner\"");
    const nlohmann::json& lj = exp.at("learner");
    cfgdetail::check_keys(lj, {"name", "eta", "nu", "epsilon"}, "learner");
    cfg.learner_name = cfgdetail::get_req<std::string>(lj, "name", "learner");
    cfg.overrides.eta = cfgdetail::get_opt<double>(lj, "eta", "learner");
    cfg.overrides.nu = cfgdetail::get_opt<double>(lj, "nu", "learner");
    cfg.overrides.epsilon = cfgdetail::get_opt<double>(lj, "epsilon", "learner");
    if (cfg.learner_name == "exp4" &&
        (cfg.overrides.eta || cfg.overrides.nu || cfg.overrides.epsilon))
        throw InputError("learner(exp4): takes no eta/nu/epsilon overrides");

    cfg.T = cfgdetail::get_req<std::int64_t>(exp, "T", "experiment");
    cfg.repeats = cfgdetail::get_req<int>(exp, "repeats", "experiment");
    cfg.base_seed = cfgdetail::get_req<std::uint64_t>(exp, "base_seed", "experiment");
    cfg.record_full_trace =
        cfgdetail::get_opt<bool>(exp, "record_full_trace", "experiment").value_or(false);
    cfg.sparsity = cfgdetail::get_opt<double>(exp, "sparsity", "experiment");

    cfg.validate();
    // Surface hyperparameter problems (eta <= 0, epsilon*N >= 1, ...) at
    // config time, before any computation starts.
    make_learner(cfg);
    return cfg;
}

inline ExperimentConfig load_run_config(const nlohmann::json& root) {
    require_version(root);
    cfgdetail::check_keys(root, {"version", "experiment"}, "config");
    if (!root.contains("experiment"))
        throw InputError("config: missing required field \"experiment\"");
    return load_experiment(root.at("experiment"));
}

// Sweep: a base experiment plus value lists for T, N, K, and learner. Cells
// run in lexicographic order of (T, N, K, learner) as listed. Axes that a
// family cannot honor (N for hard instances, N/K for fixed stochastic or
// script specs) are config errors, not silent skips.
struct SweepConfig {
    nlohmann::json base;
    std::vector<std::int64_t> T_axis;
    std::vector<int> N_axis;
    std::vector<int> K_axis;
    std::vector<std::string> learner_axis;
};

inline SweepConfig load_sweep_config(const nlohmann::json& root) {
    require_version(root);
    cfgdetail::check_keys(root, {"version", "sweep"}, "config");
    if (!root.contains("sweep"))
        throw InputError("config: missing required field \"sweep\"");
    const nlohmann::json& sj = root.at("sweep");
    cfgdetail::check_keys(sj, {"base", "axes"}, "sweep");
    if (!sj.contains("base")) throw InputError("sweep: missing required field \"base\"");

    SweepConfig sc;
    sc.base = sj.at("base");
    if (sj.contains("axes")) {
        const nlohmann::json& ax = sj.at("axes");
        cfgdetail::check_keys(ax, {"T", "N", "K", "learner"}, "sweep.axes");
        sc.T_axis = cfgdetail::get_opt<std::vector<std::int64_t>>(ax, "T", "sweep.axes")
                        .value_or(std::vector<std::int64_t>{});
        sc.N_axis = cfgdetail::get_opt<std::vector<int>>(ax, "N", "sweep.axes")
                        .value_or(std::vector<int>{});
        sc.K_axis = cfgdetail::get_opt<std::vector<int>>(ax, "K", "sweep.axes")
                        .value_or(std::vector<int>{});
        sc.learner_axis =
            cfgdetail::get_opt<std::vector<std::string>>(ax, "learner", "sweep.axes")
                .value_or(std::vector<std::string>{});
    }
    return sc;
}

// Produces the experiment JSON of one sweep cell by patching the base.
inline nlohmann::json sweep_cell(const SweepConfig& sc, std::optional<std::int64_t> T,
                                 std::optional<int> N, std::optional<int> K,
                                 std::optional<std::string> learner) {
    nlohmann::json cell = sc.base;
    if (T) cell["T"] = *T;
    if (learner) cell["learner"]["name"] = *learner;
    std::string type = cell.contains("environment") && cell["environment"].contains("type")
                           ? cell["environment"]["type"].get<std::string>()
                           : "";
    if (N) {
        if (type != "random_multiclass")
            throw InputError("sweep: the N axis needs a random_multiclass environment "
                             "(N is derived or fixed elsewhere)");
        cell["environment"]["N"] = *N;
    }
    if (K) {
        if (type == "hard") cell["environment"]["K"] = *K;
        else if (type == "random_multiclass") cell["environment"]["K"] = *K;
        else
            throw InputError("sweep: the K axis needs a hard or random_multiclass "
                             "environment (other types carry a fixed K)");
    }
    return cell;
}

// Bound table request: value lists for each argument of theoretical_bound.
struct BoundTableConfig {
    std::vector<int> N_axis;
    std::vector<int> K_axis;
    std::vector<std::int64_t> T_axis;
    std::vector<double> s_axis;
};

inline BoundTableConfig load_bound_table_config(const nlohmann::json& root) {
    require_version(root);
    cfgdetail::check_keys(root, {"version", "bound_table"}, "config");
    if (!root.contains("bound_table"))
        throw InputError("config: missing required field \"bound_table\"");
    const nlohmann::json& bj = root.at("bound_table");
    cfgdetail::check_keys(bj, {"N", "K", "T", "s"}, "bound_table");
    BoundTableConfig bc;
    bc.N_axis = cfgdetail::get_req<std::vector<int>>(bj, "N", "bound_table");
    bc.K_axis = cfgdetail::get_req<std::vector<int>>(bj, "K", "bound_table");
    bc.T_axis = cfgdetail::get_req<std::vector<std::int64_t>>(bj, "T", "bound_table");
    bc.s_axis = cfgdetail::get_req<std::vector<double>>(bj, "s", "bound_table");
    if (bc.N_axis.empty() || bc.K_axis.empty() || bc.T_axis.empty() || bc.s_axis.empty())
        throw InputError("bound_table: all four axes need at least one value");
    return bc;
}

} // namespace banditlab
