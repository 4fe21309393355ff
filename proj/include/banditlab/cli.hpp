#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "banditlab/config.hpp"
#include "banditlab/csv.hpp"
#include "banditlab/environments.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/harness.hpp"
#include "banditlab/learners.hpp"
#include "banditlab/solver.hpp"

namespace banditlab {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitInvariant = 3;

struct CliOptions {
    std::string config_path;
    std::string out_path;                  // empty: write to stdout
    std::vector<std::string> sets;         // --set key.path=value overrides
    std::optional<std::uint64_t> seed;     // overrides base_seed
    int threads = 1;
    bool timing = false;                   // fill the wallclock_s column
    int trials = 50;                       // oracle-check only
};

// Maps exceptions onto the exit-code contract so every subcommand body can
// just throw.
template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const InputError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

namespace clidetail {

// Output sink: a file opened in binary mode (so LF endings survive every
// platform) or stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw InputError("cannot open output file \"" + path + "\"");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

inline std::vector<std::string> summary_header() {
    return {"env",          "learner",      "N",          "C",
            "K",            "T",            "s",          "eta",
            "nu",           "epsilon",      "repeats",    "mean_regret",
            "std_regret",   "bound_sparse", "bound_exp4", "bound_min",
            "max_stability_ratio", "min_action_prob", "wallclock_s"};
}

// One summary row per experiment. Hyperparameter columns a learner does not
// use stay empty; wallclock_s stays empty unless timing was requested, so
// repeated runs of one config produce byte-identical files.
inline std::vector<std::string> summary_row(const AggregateResult& agg,
                                            std::optional<double> wallclock_s) {
    auto opt = [](const std::optional<double>& v) {
        return v ? csv_double(*v) : std::string();
    };
    return {agg.env_name,
            agg.learner_name,
            csv_int(agg.N),
            csv_int(agg.C),
            csv_int(agg.K),
            csv_int(agg.T),
            csv_double(agg.s),
            opt(agg.params.eta),
            opt(agg.params.nu),
            opt(agg.params.epsilon),
            csv_int(agg.repeats),
            csv_double(agg.mean_regret),
            csv_double(agg.std_regret),
            csv_double(agg.bounds.sparse_bound),
            csv_double(agg.bounds.exp4_bound),
            csv_double(agg.bounds.min_bound),
            csv_double(agg.max_stability_ratio),
            csv_double(agg.min_action_prob),
            wallclock_s ? csv_double(*wallclock_s) : std::string()};
}

inline nlohmann::json load_with_overrides(const CliOptions& opts) {
    if (opts.config_path.empty()) throw InputError("--config is required");
    nlohmann::json root = load_config_file(opts.config_path);
    for (const std::string& s : opts.sets) apply_override(root, s);
    return root;
}

inline void write_trace_csv(const std::string& path, const std::vector<RunResult>& runs) {
    Sink sink(path);
    CsvWriter w(sink.stream());
    w.write_row({"run", "seed", "t", "context", "policy", "action", "observed_loss",
                 "action_prob", "stability_ratio"});
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const RoundRecord& rec : runs[r].per_round) {
            w.write_row({csv_int(static_cast<std::int64_t>(r)), csv_uint(runs[r].seed),
                         csv_int(rec.round), csv_int(rec.context), csv_int(rec.policy_chosen),
                         csv_int(rec.action), csv_double(rec.observed_loss),
                         csv_double(rec.action_prob), csv_double(rec.stability_ratio)});
        }
    }
}

} // namespace clidetail

// run: one experiment, one summary row (plus an optional per-round trace at
// "<out>.trace.csv").
inline int cmd_run(const CliOptions& opts) {
    return guarded([&]() {
        nlohmann::json root = clidetail::load_with_overrides(opts);
        if (opts.seed && root.contains("experiment"))
            root["experiment"]["base_seed"] = *opts.seed;
        ExperimentConfig cfg = load_run_config(root);
        if (cfg.record_full_trace && opts.out_path.empty())
            throw InputError("record_full_trace needs --out (the trace file name is "
                             "derived from it)");

        auto t0 = std::chrono::steady_clock::now();
        std::vector<RunResult> runs = collect_runs(cfg, opts.threads);
        auto t1 = std::chrono::steady_clock::now();
        AggregateResult agg = aggregate_runs(cfg, runs);

        std::optional<double> wall;
        if (opts.timing) wall = std::chrono::duration<double>(t1 - t0).count();

        clidetail::Sink sink(opts.out_path);
        CsvWriter w(sink.stream());
        w.write_row(clidetail::summary_header());
        w.write_row(clidetail::summary_row(agg, wall));
        if (cfg.record_full_trace)
            clidetail::write_trace_csv(opts.out_path + ".trace.csv", runs);
        return kExitOk;
    });
}

// sweep: grid over (T, N, K, learner) in lexicographic order as listed, one
// summary row per cell.
inline int cmd_sweep(const CliOptions& opts) {
    return guarded([&]() {
        nlohmann::json root = clidetail::load_with_overrides(opts);
        SweepConfig sc = load_sweep_config(root);
        if (opts.seed) sc.base["base_seed"] = *opts.seed;

        // A missing axis contributes a single pass-through cell.
        auto cells = [](std::size_t axis_size) { return axis_size ? axis_size : 1; };

        clidetail::Sink sink(opts.out_path);
        CsvWriter w(sink.stream());
        w.write_row(clidetail::summary_header());

        for (std::size_t it = 0; it < cells(sc.T_axis.size()); ++it) {
            for (std::size_t in = 0; in < cells(sc.N_axis.size()); ++in) {
                for (std::size_t ik = 0; ik < cells(sc.K_axis.size()); ++ik) {
                    for (std::size_t il = 0; il < cells(sc.learner_axis.size()); ++il) {
                        nlohmann::json cell = sweep_cell(
                            sc,
                            sc.T_axis.empty() ? std::nullopt
                                              : std::optional<std::int64_t>(sc.T_axis[it]),
                            sc.N_axis.empty() ? std::nullopt
                                              : std::optional<int>(sc.N_axis[in]),
                            sc.K_axis.empty() ? std::nullopt
                                              : std::optional<int>(sc.K_axis[ik]),
                            sc.learner_axis.empty()
                                ? std::nullopt
                                : std::optional<std::string>(sc.learner_axis[il]));
                        ExperimentConfig cfg = load_experiment(cell);
                        auto t0 = std::chrono::steady_clock::now();
                        AggregateResult agg = run_batch(cfg, opts.threads);
                        auto t1 = std::chrono::steady_clock::now();
                        std::optional<double> wall;
                        if (opts.timing)
                            wall = std::chrono::duration<double>(t1 - t0).count();
                        w.write_row(clidetail::summary_row(agg, wall));
                    }
                }
            }
        }
        return kExitOk;
    });
}

// oracle-check: dual solver vs the projected-gradient reference on random
// small instances; writes a per-trial max-coordinate-deviation CSV and exits
// nonzero if any deviation exceeds 1e-4.
inline int cmd_oracle_check(const CliOptions& opts) {
    return guarded([&]() {
        if (opts.trials < 0) throw InputError("oracle-check: trials must be >= 0");
        Philox rng(opts.seed.value_or(20260816u), 3);  // stream 3: oracle-check draws
        const double scales[4] = {1.0, 10.0, 100.0, 10000.0};
        const double epsilons[2] = {1e-4, 1e-2};

        clidetail::Sink sink(opts.out_path);
        CsvWriter w(sink.stream());
        w.write_row({"trial", "n", "eta", "nu", "epsilon", "scale", "max_abs_dev"});

        bool all_ok = true;
        for (int trial = 0; trial < opts.trials; ++trial) {
            int n = 2 + static_cast<int>(rng.uniform_index(5));
            double scale = scales[rng.uniform_index(4)];
            double eps = epsilons[rng.uniform_index(2)];
            SolverConfig cfg;
            cfg.eta = rng.uniform(0.01, 1.0);
            cfg.nu = 1.0 / 16.0;
            cfg.epsilon = eps;
            std::vector<double> loss(n);
            for (double& l : loss) l = rng.uniform(-scale, scale);

            SimplexPoint ours = solve_ftrl(loss, cfg).point;
            SimplexPoint ref = oracle_solve(loss, cfg);
            double dev = 0.0;
            for (int i = 0; i < n; ++i) dev = std::max(dev, std::abs(ours[i] - ref[i]));
            if (dev > 1e-4) all_ok = false;
            w.write_row({csv_int(trial), csv_int(n), csv_double(cfg.eta), csv_double(cfg.nu),
                         csv_double(cfg.epsilon), csv_double(scale), csv_double(dev)});
        }
        return all_ok ? kExitOk : kExitInvariant;
    });
}

namespace clidetail {

struct CheckLine {
    std::string name;
    int state = 0;  // 0 pass, 1 fail, 2 skip
    std::string detail;
};

inline nlohmann::json default_invariant_config() {
    nlohmann::json env;
    env["type"] = "hard";
    env["C"] = 3;
    env["K"] = 8;
    env["target"] = nlohmann::json::array({1, 3});
    nlohmann::json exp;
    exp["environment"] = env;
    exp["learner"] = nlohmann::json{{"name", "lbftrl"}};
    exp["T"] = 2000;
    exp["repeats"] = 20;
    exp["base_seed"] = 20260816;
    nlohmann::json root;
    root["version"] = kConfigVersion;
    root["experiment"] = exp;
    return root;
}

} // namespace clidetail

// invariants: executes the runtime-checkable guarantees on the configured
// experiment (a built-in hard-instance default without --config) and prints
// one PASS/FAIL/SKIP line per check. Checks whose precondition the config
// does not meet report SKIP, not FAIL.
inline int cmd_invariants(const CliOptions& opts) {
    return guarded([&]() {
        nlohmann::json root = opts.config_path.empty()
                                  ? clidetail::default_invariant_config()
                                  : load_config_file(opts.config_path);
        for (const std::string& s : opts.sets) apply_override(root, s);
        if (opts.seed && root.contains("experiment"))
            root["experiment"]["base_seed"] = *opts.seed;
        ExperimentConfig cfg = load_run_config(root);

        const PolicyTable& table = *cfg.table;
        const Environment& env = *cfg.env;
        const int n = table.num_policies();
        const bool is_lbftrl = cfg.learner_name == "lbftrl";

        double epsilon = 0.0, nu_used = 1.0;
        {
            auto probe = make_learner(cfg);
            LearnerParamsView pv = probe->params_view();
            epsilon = pv.epsilon.value_or(0.0);
            nu_used = pv.nu.value_or(1.0);
        }

        bool feasible_ok = true, qprob_ok = true, support_ok = true, loss_ok = true,
             sparsity_ok = true, stability_ok = true, regret_ok = true, account_ok = true;
        double worst_ratio = 0.0;
        bool saw_positive_loss = false;
        const bool stability_applicable = is_lbftrl && nu_used <= 1.0 / 16.0 + 1e-12;

        std::vector<double> so2_final(cfg.repeats, 0.0);
        for (int r = 0; r < cfg.repeats; ++r) {
            auto learner = make_learner(cfg);
            std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
            Philox env_rng(seed, 0);
            Philox learner_rng(seed, 1);
            LossVector loss;
            std::vector<double> cum_policy(n, 0.0);
            std::vector<double> p_before(n);
            double cum_learner = 0.0, so2 = 0.0;
            for (std::int64_t t = 0; t < cfg.T; ++t) {
                int context = 0;
                env.step(t, env_rng, context, loss);
                try {
                    validate_sparsity(loss);
                } catch (const EnvironmentError&) {
                    sparsity_ok = false;
                }
                for (double v : loss.losses)
                    if (!(v >= -1.0 && v <= 1.0)) loss_ok = false;

                const SimplexPoint& p = learner->dist();
                p_before.assign(p.weights.begin(), p.weights.end());
                if (!p.is_valid(is_lbftrl ? epsilon : 0.0)) feasible_ok = false;

                ActResult act = learner->act(context, learner_rng);
                double observed = loss[act.action];
                if (!(act.action_prob > 0.0) || act.action_prob > 1.0 + 1e-12)
                    qprob_ok = false;
                if (is_lbftrl && (act.action_prob < p_before[act.policy] - 1e-15 ||
                                  act.action_prob < epsilon - 1e-15))
                    qprob_ok = false;
                if (observed > 0.0) saw_positive_loss = true;

                for (int i = 0; i < n; ++i) cum_policy[i] += loss[table(i, context)];
                cum_learner += observed;

                double ratio = learner->update(observed);
                worst_ratio = std::max(worst_ratio, ratio);
                if (stability_applicable && !saw_positive_loss && ratio > 2.0 + 1e-9)
                    stability_ok = false;

                const auto& est = learner->last_estimator();
                for (int i = 0; i < n; ++i) {
                    if (est[i] != 0.0 && table(i, context) != act.action) support_ok = false;
                    so2 += p_before[i] * est[i] * est[i];
                }
            }
            so2_final[r] = so2;
            double best = *std::min_element(cum_policy.begin(), cum_policy.end());

            // The harness replays the same seed independently; its accounting
            // must agree with this loop's to the bit.
            RunResult check = run_episode(env, table, *make_learner(cfg), cfg.T, seed);
            if (check.cumulative_learner_loss != cum_learner) account_ok = false;
            if (std::abs(check.realized_regret - (cum_learner - best)) > 1e-9)
                regret_ok = false;
        }

        // Monte-Carlo unbiasedness of the importance-weighted estimator on a
        // fixed skewed policy distribution, context 0, and a one-hot loss.
        bool unbiased_ok = true;
        {
            std::vector<double> pw(n);
            double z = 0.0;
            for (int i = 0; i < n; ++i) { pw[i] = i + 1.0; z += pw[i]; }
            for (double& v : pw) v /= z;
            LossVector lv = shift_multiclass_loss(0, table.num_actions());
            std::vector<double> cost = policy_cost_vector(table, 0, lv);
            std::vector<double> q = induced_action_dist(SimplexPoint(pw), table, 0);
            const int resamples = 100000;
            Philox mc(cfg.base_seed, 4);  // stream 4: unbiasedness resampling
            std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
            for (int m = 0; m < resamples; ++m) {
                int i = static_cast<int>(sample_index(pw, mc.uniform()));
                int a = table(i, 0);
                double wgt = lv[a] / q[a];
                for (int j = 0; j < n; ++j) {
                    double c = table(j, 0) == a ? wgt : 0.0;
                    sum[j] += c;
                    sumsq[j] += c * c;
                }
            }
            for (int j = 0; j < n; ++j) {
                double mean = sum[j] / resamples;
                double var = std::max(0.0, sumsq[j] / resamples - mean * mean);
                double se = std::sqrt(var / resamples);
                if (std::abs(mean - cost[j]) > 3.0 * se + 1e-9) unbiased_ok = false;
            }
        }

        // Second-order budget: the per-round conditional expectation of
        // sum_i p_i chat_i^2 equals sum_a loss_a^2 <= s, so run totals should
        // concentrate near s*T. Only meaningful for the unshifted estimator.
        bool so2_applicable = is_lbftrl;
        bool so2_ok = true;
        double so2_mean = 0.0, so2_sd = 0.0;
        double so2_budget = cfg.effective_sparsity() * static_cast<double>(cfg.T);
        if (so2_applicable) {
            detail::mean_std(so2_final, so2_mean, so2_sd);
            double se = cfg.repeats > 1 ? so2_sd / std::sqrt(double(cfg.repeats)) : 0.0;
            so2_ok = so2_mean <= so2_budget + 3.0 * se + 1e-9;
        }

        std::vector<clidetail::CheckLine> lines;
        auto add = [&](const std::string& name, bool ok, const std::string& detail) {
            lines.push_back({name, ok ? 0 : 1, detail});
        };
        auto skip = [&](const std::string& name, const std::string& why) {
            lines.push_back({name, 2, why});
        };
        add("simplex-feasibility", feasible_ok, "iterates stay on the truncated simplex");
        add("action-prob-range", qprob_ok,
            is_lbftrl ? "q in (0, 1], q >= chosen policy weight >= epsilon"
                      : "q in (0, 1]");
        add("estimator-support", support_ok, "estimates vanish off the played action");
        add("loss-range", loss_ok, "all loss entries within [-1, 1]");
        add("loss-sparsity", sparsity_ok, "losses within their declared budget");
        if (!stability_applicable)
            skip("iterate-stability",
                 is_lbftrl ? "nu > 1/16: outside the guarantee precondition"
                           : "baseline learner: no stability guarantee");
        else if (saw_positive_loss && stability_ok)
            skip("iterate-stability",
                 "positive losses seen: outside the guarantee precondition");
        else
            add("iterate-stability", stability_ok, "max ratio " + csv_double(worst_ratio));
        add("loss-accounting", account_ok, "harness replay matches bit for bit");
        add("regret-identity", regret_ok, "realized regret matches its definition");
        add("estimator-unbiasedness", unbiased_ok, "Monte-Carlo means within 3 SE");
        if (so2_applicable)
            add("second-order-budget", so2_ok,
                "mean " + csv_double(so2_mean) + " vs budget " + csv_double(so2_budget));
        else
            skip("second-order-budget",
                 "baseline learner estimates shifted losses; budget not applicable");

        bool any_fail = false;
        for (const auto& l : lines) {
            const char* tag = l.state == 0 ? "PASS" : l.state == 1 ? "FAIL" : "SKIP";
            std::cout << tag << ' ' << l.name << ": " << l.detail << '\n';
            if (l.state == 1) any_fail = true;
        }
        return any_fail ? kExitInvariant : kExitOk;
    });
}

// bound-table: the closed-form regret ceilings over a requested grid.
inline int cmd_bound_table(const CliOptions& opts) {
    return guarded([&]() {
        nlohmann::json root = clidetail::load_with_overrides(opts);
        BoundTableConfig bc = load_bound_table_config(root);
        clidetail::Sink sink(opts.out_path);
        CsvWriter w(sink.stream());
        w.write_row({"N", "K", "T", "s", "bound_sparse", "bound_exp4", "bound_min"});
        for (int nn : bc.N_axis)
            for (int kk : bc.K_axis)
                for (std::int64_t tt : bc.T_axis)
                    for (double ss : bc.s_axis) {
                        Bounds b = theoretical_bound(nn, kk, tt, ss);
                        w.write_row({csv_int(nn), csv_int(kk), csv_int(tt), csv_double(ss),
                                     csv_double(b.sparse_bound), csv_double(b.exp4_bound),
                                     csv_double(b.min_bound)});
                    }
        return kExitOk;
    });
}

} // namespace banditlab
