#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "banditlab/core.hpp"
#include "banditlab/environments.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/learners.hpp"
#include "banditlab/rng.hpp"

namespace banditlab {

struct Bounds {
    double sparse_bound = 0.0;  // 16 N ln(NT) + 2 sqrt(s T ln N)
    double exp4_bound = 0.0;    // sqrt(K T ln N)
    double min_bound = 0.0;
};

// Regret ceilings as functions of the problem size. ln N is taken literally,
// so a single-policy class gets a zero sqrt term.
inline Bounds theoretical_bound(int N, int K, std::int64_t T, double s) {
    if (N < 1 || K < 1 || T < 1) throw InputError("theoretical_bound: N, K, T must be >= 1");
    if (s < 0.0) throw InputError("theoretical_bound: s must be >= 0");
    const double n = static_cast<double>(N);
    const double t = static_cast<double>(T);
    const double log_nt = std::log(n * t);
    const double log_n = std::log(n);
    Bounds b;
    b.sparse_bound = 16.0 * n * log_nt + 2.0 * std::sqrt(s * t * log_n);
    b.exp4_bound = std::sqrt(static_cast<double>(K) * t * log_n);
    b.min_bound = std::min(b.sparse_bound, b.exp4_bound);
    return b;
}

// Argmin with lowest-index tie-breaking.
inline std::pair<int, double> best_fixed_hypothesis(const std::vector<double>& cum_losses) {
    if (cum_losses.empty()) throw InputError("best_fixed_hypothesis: empty input");
    int best = 0;
    for (std::size_t i = 1; i < cum_losses.size(); ++i)
        if (cum_losses[i] < cum_losses[best]) best = static_cast<int>(i);
    return {best, cum_losses[best]};
}

namespace detail {

// Expected per-round loss of each hypothesis under the environment's
// expectation tables, and the index of the best one.
inline int best_expected_hypothesis(const Environment& env, const PolicyTable& table) {
    const auto& el = env.expected_losses();
    const auto& cp = env.context_probs();
    const int k = env.num_actions();
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < table.num_policies(); ++i) {
        double v = 0.0;
        for (int x = 0; x < env.num_contexts(); ++x)
            v += cp[x] * el[static_cast<std::size_t>(x) * k + table(i, x)];
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    return best;
}

} // namespace detail

// Runs T act/step/update cycles of one learner against one environment.
// The harness sees the full loss vector each round even though the learner
// only observes its own action's loss; that is what makes exact regret
// accounting possible. Round randomness: substream 0 of `seed` drives the
// environment, substream 1 the learner.
inline RunResult run_episode(const Environment& env, const PolicyTable& table, Learner& learner,
                             std::int64_t T, std::uint64_t seed, bool record_full_trace = false) {
    if (T < 1) throw InputError("run_episode: T must be >= 1");
    if (table.num_contexts() != env.num_contexts() || table.num_actions() != env.num_actions())
        throw InputError("run_episode: learner policy table and environment disagree on C or K");

    Philox env_rng(seed, 0);
    Philox learner_rng(seed, 1);

    const int n = table.num_policies();
    RunResult res;
    res.seed = seed;
    res.cumulative_policy_losses.assign(n, 0.0);

    const bool has_exp = env.has_expectations();
    int star = has_exp ? detail::best_expected_hypothesis(env, table) : 0;
    const auto& el = env.expected_losses();
    const int k = env.num_actions();

    double cum_learner = 0.0;
    double pseudo = 0.0;
    double so2 = 0.0;
    double max_ratio = 0.0;
    double min_q = std::numeric_limits<double>::infinity();

    LossVector loss;
    std::vector<double> p_before;
    std::vector<double> cost(n);
    std::int64_t next_checkpoint = 1;

    std::int64_t t = 0;
    try {
        for (t = 1; t <= T; ++t) {
            int context = 0;
            env.step(t - 1, env_rng, context, loss);
            validate_sparsity(loss);
            for (double v : loss.losses)
                if (!(v >= -1.0 && v <= 1.0))
                    throw EnvironmentError("loss entry outside [-1, 1]");

            if (has_exp) {
                // Expected loss of the learner's action distribution at this
                // context, before it sees the round's feedback.
                std::vector<double> q = learner.action_dist(context);
                const double* row = el.data() + static_cast<std::size_t>(context) * k;
                double exp_loss = 0.0;
                for (int a = 0; a < k; ++a) exp_loss += q[a] * row[a];
                pseudo += exp_loss - row[table(star, context)];
            }

            p_before.assign(learner.dist().weights.begin(), learner.dist().weights.end());
            ActResult act = learner.act(context, learner_rng);
            double observed = loss[act.action];
            min_q = std::min(min_q, act.action_prob);

            for (int i = 0; i < n; ++i) cost[i] = loss[table(i, context)];
            for (int i = 0; i < n; ++i) res.cumulative_policy_losses[i] += cost[i];
            cum_learner += observed;

            double ratio = learner.update(observed);
            max_ratio = std::max(max_ratio, ratio);

            const auto& est = learner.last_estimator();
            double inc = 0.0;
            for (int i = 0; i < n; ++i) inc += p_before[i] * est[i] * est[i];
            so2 += inc;

            if (record_full_trace) {
                RoundRecord rec;
                rec.round = t;
                rec.context = context;
                rec.policy_chosen = act.policy;
                rec.action = act.action;
                rec.observed_loss = observed;
                rec.estimator = est;
                rec.action_prob = act.action_prob;
                rec.stability_ratio = ratio;
                res.per_round.push_back(std::move(rec));
            }
            if (t == next_checkpoint || t == T) {
                RegretCheckpoint cp;
                cp.round = t;
                cp.realized_regret =
                    cum_learner - best_fixed_hypothesis(res.cumulative_policy_losses).second;
                cp.pseudo_regret = has_exp ? pseudo : std::numeric_limits<double>::quiet_NaN();
                cp.second_order_sum = so2;
                res.checkpoints.push_back(cp);
                while (next_checkpoint <= t) next_checkpoint *= 2;
            }
        }
    } catch (const Error& e) {
        throw Error("round " + std::to_string(t) + ": " + e.what());
    }

    res.cumulative_learner_loss = cum_learner;
    res.realized_regret = cum_learner - best_fixed_hypothesis(res.cumulative_policy_losses).second;
    res.pseudo_regret = has_exp ? pseudo : std::numeric_limits<double>::quiet_NaN();
    res.max_stability_ratio = max_ratio;
    res.min_action_prob = min_q;
    res.second_order_sum = so2;

    LearnerParamsView pv = learner.params_view();
    res.params.eta = pv.eta.value_or(std::numeric_limits<double>::quiet_NaN());
    res.params.nu = pv.nu.value_or(std::numeric_limits<double>::quiet_NaN());
    res.params.epsilon = pv.epsilon.value_or(std::numeric_limits<double>::quiet_NaN());
    res.params.horizon = T;
    return res;
}

// A fully materialized experiment: immutable environment, hypothesis class,
// learner choice, and the run schedule.
struct ExperimentConfig {
    std::shared_ptr<const Environment> env;
    std::shared_ptr<const PolicyTable> table;
    std::string learner_name = "lbftrl";   // "lbftrl" | "exp4"
    HyperOverrides overrides;
    std::optional<double> sparsity;        // defaults to the environment's budget
    std::int64_t T = 1;
    int repeats = 1;
    std::uint64_t base_seed = 0;
    bool record_full_trace = false;

    double effective_sparsity() const {
        return sparsity ? *sparsity : env->sparsity_budget();
    }

    void validate() const {
        if (!env || !table) throw InputError("ExperimentConfig: environment and table required");
        if (T < 1) throw InputError("ExperimentConfig: T must be >= 1");
        if (repeats < 1) throw InputError("ExperimentConfig: repeats must be >= 1");
        if (learner_name != "lbftrl" && learner_name != "exp4")
            throw InputError("ExperimentConfig: unknown learner \"" + learner_name + "\"");
        if (sparsity && !(*sparsity > 0.0))
            throw InputError("ExperimentConfig: sparsity must be > 0");
    }
};

inline std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.learner_name == "lbftrl")
        return std::make_unique<LbFtrl>(*cfg.table, cfg.effective_sparsity(), cfg.T,
                                        cfg.overrides);
    return std::make_unique<Exp4>(*cfg.table, cfg.T);
}

struct AggregateResult {
    double mean_regret = 0.0;
    double std_regret = 0.0;
    std::vector<double> per_seed_regret;
    double mean_pseudo_regret = 0.0;
    double std_pseudo_regret = 0.0;
    std::vector<double> per_seed_pseudo;
    double mean_stability_max = 0.0;
    double max_stability_ratio = 0.0;
    double min_action_prob = 0.0;
    double mean_second_order = 0.0;
    Bounds bounds;
    double bound_value = 0.0;      // the bound matching the learner that ran
    bool bound_satisfied = false;
    // Echoes for result tables.
    std::string env_name;
    std::string learner_name;
    int N = 0, C = 0, K = 0;
    std::int64_t T = 0;
    double s = 1.0;
    int repeats = 0;
    std::uint64_t base_seed = 0;
    LearnerParamsView params;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    sd = 0.0;
    if (v.size() > 1) {
        for (double x : v) sd += (x - mean) * (x - mean);
        sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
    }
}

} // namespace detail

// Runs `repeats` episodes with seeds base_seed, base_seed + 1, ... Episodes
// are independent; with threads > 1 they run striped across workers. The
// result vector is indexed by run so any parallelism is invisible in it.
inline std::vector<RunResult> collect_runs(const ExperimentConfig& cfg, int threads = 1) {
    cfg.validate();
    threads = std::max(1, std::min(threads, cfg.repeats));

    std::vector<RunResult> runs(cfg.repeats);
    std::vector<std::exception_ptr> failures(cfg.repeats);
    auto work = [&](int worker) {
        for (int r = worker; r < cfg.repeats; r += threads) {
            try {
                auto learner = make_learner(cfg);
                runs[r] = run_episode(*cfg.env, *cfg.table, *learner, cfg.T,
                                      cfg.base_seed + static_cast<std::uint64_t>(r),
                                      cfg.record_full_trace);
            } catch (...) {
                failures[r] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (int r = 0; r < cfg.repeats; ++r)
        if (failures[r]) std::rethrow_exception(failures[r]);
    return runs;
}

// Deterministic fold of per-run results in run order.
inline AggregateResult aggregate_runs(const ExperimentConfig& cfg,
                                      const std::vector<RunResult>& runs) {
    if (runs.size() != static_cast<std::size_t>(cfg.repeats))
        throw InputError("aggregate_runs: run count does not match repeats");
    AggregateResult agg;
    agg.env_name = cfg.env->name();
    agg.learner_name = cfg.learner_name;
    agg.N = cfg.table->num_policies();
    agg.C = cfg.table->num_contexts();
    agg.K = cfg.table->num_actions();
    agg.T = cfg.T;
    agg.s = cfg.effective_sparsity();
    agg.repeats = cfg.repeats;
    agg.base_seed = cfg.base_seed;

    agg.per_seed_regret.reserve(cfg.repeats);
    agg.per_seed_pseudo.reserve(cfg.repeats);
    double sum_ratio = 0.0, sum_so2 = 0.0;
    agg.min_action_prob = std::numeric_limits<double>::infinity();
    for (const RunResult& r : runs) {
        agg.per_seed_regret.push_back(r.realized_regret);
        agg.per_seed_pseudo.push_back(r.pseudo_regret);
        sum_ratio += r.max_stability_ratio;
        sum_so2 += r.second_order_sum;
        agg.max_stability_ratio = std::max(agg.max_stability_ratio, r.max_stability_ratio);
        agg.min_action_prob = std::min(agg.min_action_prob, r.min_action_prob);
    }
    detail::mean_std(agg.per_seed_regret, agg.mean_regret, agg.std_regret);
    if (cfg.env->has_expectations())
        detail::mean_std(agg.per_seed_pseudo, agg.mean_pseudo_regret, agg.std_pseudo_regret);
    else
        agg.mean_pseudo_regret = agg.std_pseudo_regret =
            std::numeric_limits<double>::quiet_NaN();
    agg.mean_stability_max = sum_ratio / cfg.repeats;
    agg.mean_second_order = sum_so2 / cfg.repeats;

    agg.bounds = theoretical_bound(agg.N, agg.K, agg.T, agg.s);
    agg.bound_value =
        cfg.learner_name == "exp4" ? agg.bounds.exp4_bound : agg.bounds.sparse_bound;
    agg.bound_satisfied = agg.mean_regret <= agg.bound_value;

    auto probe = make_learner(cfg);
    agg.params = probe->params_view();
    return agg;
}

inline AggregateResult run_batch(const ExperimentConfig& cfg, int threads = 1) {
    return aggregate_runs(cfg, collect_runs(cfg, threads));
}

} // namespace banditlab
