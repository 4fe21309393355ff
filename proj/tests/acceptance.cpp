// Acceptance gate. Each criterion prints exactly one line
//   criterion k: PASS <detail> [<seconds>s]
//   criterion k: FAIL <detail> [<seconds>s]
// and the process exits nonzero if any executed criterion failed.
// Run all eight by default, or a single one with --criterion k.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "banditlab/banditlab.hpp"

namespace {

using namespace banditlab;

// Pinned acceptance tolerances.
constexpr double kSolverOracleTol = 1e-4;
constexpr double kStabilityLimit = 2.0 + 1e-9;
constexpr double kUnbiasedSigmas = 3.0;
constexpr double kFreqSigmas = 4.0;
constexpr double kSeparationFactor = 0.5;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

int worker_count() {
    unsigned hc = std::thread::hardware_concurrency();
    if (hc == 0) hc = 1;
    return static_cast<int>(std::min(hc, 8u));
}

// ---- 1: dual solver agrees with the independent reference minimizer ----

Outcome criterion1() {
    const int sizes[4] = {2, 3, 4, 6};
    const double scales[4] = {1.0, 10.0, 100.0, 10000.0};
    const double epsilons[2] = {1e-4, 1e-2};
    Philox rng(811, 3);
    double worst = 0.0;
    int instances = 0;
    for (int n : sizes) {
        for (int trial = 0; trial < 100; ++trial) {
            SolverConfig cfg;
            cfg.eta = rng.uniform(0.01, 1.0);
            cfg.nu = 1.0 / 16.0;
            cfg.epsilon = epsilons[rng.uniform_index(2)];
            const double scale = scales[trial % 4];
            std::vector<double> loss(n);
            for (double& l : loss) l = rng.uniform(-scale, scale);
            SimplexPoint ours = solve_ftrl(loss, cfg).point;
            SimplexPoint ref = oracle_solve(loss, cfg);
            for (int i = 0; i < n; ++i)
                worst = std::max(worst, std::abs(ours[i] - ref[i]));
            ++instances;
        }
    }
    return {worst <= kSolverOracleTol,
            "max coordinate deviation " + fmt(worst) + " over " +
                std::to_string(instances) + " instances (tolerance " +
                fmt(kSolverOracleTol) + ")"};
}

// ---- 2: no policy weight more than doubles between rounds ----

Outcome criterion2() {
    ExperimentConfig cfg;
    cfg.env = std::make_shared<HardInstanceEnv>(HardInstanceSpec{5, 10, {{2, 5}}});
    cfg.table = std::make_shared<PolicyTable>(build_hard_class(5, 10));
    cfg.learner_name = "lbftrl";
    cfg.T = 100000;
    cfg.repeats = 20;
    cfg.base_seed = 6001;
    AggregateResult agg = run_batch(cfg, worker_count());
    return {agg.max_stability_ratio <= kStabilityLimit,
            "max weight ratio " + fmt(agg.max_stability_ratio) + " over " +
                std::to_string(cfg.repeats) + " runs of T=" + std::to_string(cfg.T) +
                " (limit 2)"};
}

// ---- 3: the importance-weighted estimator is unbiased ----

Outcome criterion3() {
    Philox rng(812, 4);
    const int n = 6, c = 3, k = 4;
    std::vector<std::int32_t> cells(static_cast<std::size_t>(n) * c);
    for (auto& v : cells) v = static_cast<std::int32_t>(rng.uniform_index(k));
    PolicyTable table(n, c, k, std::move(cells));

    std::vector<double> pw(n);
    double z = 0.0;
    for (double& v : pw) {
        v = 0.001 - std::log1p(-rng.uniform());
        z += v;
    }
    for (double& v : pw) v /= z;

    const int context = static_cast<int>(rng.uniform_index(c));
    const int label = static_cast<int>(rng.uniform_index(k));
    LossVector lv = shift_multiclass_loss(label, k);
    std::vector<double> cost = policy_cost_vector(table, context, lv);
    std::vector<double> q = induced_action_dist(SimplexPoint(pw), table, context);

    const int resamples = 100000;
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    for (int m = 0; m < resamples; ++m) {
        int i = static_cast<int>(sample_index(pw, rng.uniform()));
        int a = table(i, context);
        double wgt = lv[a] / q[a];
        for (int j = 0; j < n; ++j) {
            double cj = table(j, context) == a ? wgt : 0.0;
            sum[j] += cj;
            sumsq[j] += cj * cj;
        }
    }
    bool ok = true;
    double worst_z = 0.0;
    for (int j = 0; j < n; ++j) {
        double mean = sum[j] / resamples;
        double var = std::max(0.0, sumsq[j] / resamples - mean * mean);
        double se = std::sqrt(var / resamples);
        if (se == 0.0) {
            if (mean != cost[j]) ok = false;
        } else {
            worst_z = std::max(worst_z, std::abs(mean - cost[j]) / se);
        }
    }
    if (worst_z > kUnbiasedSigmas) ok = false;
    return {ok, "worst coordinate z-score " + fmt(worst_z) + " over " +
                    std::to_string(resamples) + " resamples (limit " +
                    fmt(kUnbiasedSigmas) + " SE)"};
}

// ---- 4: mean realized regret sits under the sparse regret ceiling ----

Outcome criterion4() {
    bool all_ok = true;
    std::string detail;
    for (int n : {5, 20}) {
        GeneratedInstance gi = make_random_multiclass(n, 4, n, 417);
        auto env = std::make_shared<StochasticEnv>(gi.spec);
        auto table = std::make_shared<PolicyTable>(gi.table);
        for (std::int64_t t : {std::int64_t{10000}, std::int64_t{100000}}) {
            ExperimentConfig cfg;
            cfg.env = env;
            cfg.table = table;
            cfg.learner_name = "lbftrl";
            cfg.T = t;
            cfg.repeats = 20;
            cfg.base_seed = 7100;
            AggregateResult agg = run_batch(cfg, worker_count());
            bool ok = agg.mean_regret <= agg.bounds.sparse_bound;
            all_ok = all_ok && ok;
            if (!detail.empty()) detail += ", ";
            detail += "N=" + std::to_string(n) + "/T=" + std::to_string(t) + ": " +
                      fmt(agg.mean_regret) + (ok ? " <= " : " EXCEEDS ") +
                      fmt(agg.bounds.sparse_bound);
        }
    }
    return {all_ok, "mean realized regret vs ceiling: " + detail};
}

// ---- 5: log-barrier FTRL beats the exponential-weights baseline ----
//
// Known to fail at these sizes (measured means ~11.2k vs ~10.9k, ratio 1.03):
// the barrier keeps every trailing policy's weight near 16/gap, so the 200
// losers hold ~40800/t total mass and their integrated cost (~16*ln T each)
// dominates the horizon, while the baseline converges by t~1e5 and then pays
// only its gamma-mixing floor. Both learners are transient-dominated at
// T = 2e5 and land within 3% of each other; the factor-two gap this test
// demands opens only at horizons two orders of magnitude longer, where the
// barrier floor's 1/t decay beats the baseline's fixed exploration floor.
// The check keeps its factor-two target rather than loosening to fit the
// measurement.

Outcome criterion5() {
    ExperimentConfig cfg;
    cfg.env = std::make_shared<HardInstanceEnv>(HardInstanceSpec{4, 50, {{1, 7}}});
    cfg.table = std::make_shared<PolicyTable>(build_hard_class(4, 50));
    cfg.T = 200000;
    cfg.repeats = 20;
    cfg.base_seed = 9001;

    cfg.learner_name = "lbftrl";
    AggregateResult lb = run_batch(cfg, worker_count());
    cfg.learner_name = "exp4";
    AggregateResult e4 = run_batch(cfg, worker_count());

    bool ok = lb.mean_pseudo_regret <= kSeparationFactor * e4.mean_pseudo_regret;
    return {ok, "mean pseudo-regret " + fmt(lb.mean_pseudo_regret) + " (lbftrl) vs " +
                    fmt(e4.mean_pseudo_regret) + " (exp4); need at most the " +
                    fmt(kSeparationFactor) + " fraction"};
}

// ---- 6: the hard instance family is what it claims to be ----

Outcome criterion6() {
    // Exact rational mass check over a grid of shapes.
    bool sums_ok = true;
    for (int k = 1; k <= 60 && sums_ok; ++k) {
        for (int c : {1, 2, 5}) {
            HardInstanceSpec plain{c, k, {}};
            HardInstanceSpec targeted{c, k, {{c - 1, (k + 1) / 2}}};
            for (int x = 0; x < c; ++x) {
                for (const auto& spec : {plain, targeted}) {
                    auto [num, denom] = hard_label_prob_numerators(spec, x);
                    std::int64_t s = 0;
                    for (std::int64_t v : num) s += v;
                    if (s != denom || denom != 3 * std::int64_t{k} * k) sums_ok = false;
                }
            }
        }
    }

    // Empirical joint (context, label) frequencies across a million draws.
    HardInstanceSpec freq_spec{3, 10, {{1, 4}}};
    Philox rng(901, 0);
    const int draws = 1000000;
    std::vector<std::int64_t> hits(static_cast<std::size_t>(3) * 11, 0);
    for (int m = 0; m < draws; ++m) {
        auto [x, reward] = hard_instance_step(freq_spec, rng);
        for (int y = 0; y <= 10; ++y)
            if (reward[y] == 1.0) ++hits[static_cast<std::size_t>(x) * 11 + y];
    }
    bool freq_ok = true;
    double worst_z = 0.0;
    for (int x = 0; x < 3; ++x) {
        auto probs = hard_label_probs(freq_spec, x);
        for (int y = 0; y <= 10; ++y) {
            double p = probs[y] / 3.0;
            double se = std::sqrt(p * (1.0 - p) / draws);
            double f = double(hits[static_cast<std::size_t>(x) * 11 + y]) / draws;
            double zscore = std::abs(f - p) / se;
            worst_z = std::max(worst_z, zscore);
            if (zscore > kFreqSigmas) freq_ok = false;
        }
    }

    // The planted hypothesis maximizes expected reward; without a target the
    // all-default hypothesis does.
    bool argmax_ok = true;
    for (auto [c, k] : {std::pair{2, 3}, std::pair{4, 6}, std::pair{5, 10}}) {
        PolicyTable table = build_hard_class(c, k);
        HardInstanceEnv targeted(HardInstanceSpec{c, k, {{1, 2}}});
        if (detail::best_expected_hypothesis(targeted, table) != 1 + 1 * k + (2 - 1))
            argmax_ok = false;
        HardInstanceEnv plain(HardInstanceSpec{c, k, {}});
        if (detail::best_expected_hypothesis(plain, table) != 0) argmax_ok = false;
    }

    bool ok = sums_ok && freq_ok && argmax_ok;
    return {ok, std::string("rational sums ") + (sums_ok ? "exact" : "BROKEN") +
                    ", worst frequency z-score " + fmt(worst_z) + " (limit " +
                    fmt(kFreqSigmas) + "), argmax hypothesis " +
                    (argmax_ok ? "correct" : "WRONG")};
}

// ---- 7: solver property suite ----

Outcome criterion7() {
    const double scales[4] = {1.0, 10.0, 100.0, 10000.0};

    auto draw_instance = [&](Philox& rng, int trial, SolverConfig& cfg,
                             std::vector<double>& loss) {
        int n = 2 + static_cast<int>(rng.uniform_index(7));
        cfg = SolverConfig{};
        cfg.eta = rng.uniform(0.01, 1.0);
        cfg.nu = 1.0 / 16.0;
        cfg.epsilon = rng.uniform_index(2) == 0 ? 1e-4 : 1e-2;
        const double scale = scales[trial % 4];
        loss.resize(n);
        for (double& l : loss) l = rng.uniform(-scale, scale);
        return n;
    };

    auto random_feasible = [](int n, double eps, Philox& rng) {
        std::vector<double> w(n);
        double z = 0.0;
        for (double& v : w) {
            v = -std::log1p(-rng.uniform()) + 1e-12;
            z += v;
        }
        double slack = 1.0 - n * eps;
        for (double& v : w) v = eps + slack * (v / z);
        return SimplexPoint(std::move(w));
    };

    const int trials = 200;
    int feas_bad = 0, opt_bad = 0, perm_bad = 0, shift_bad = 0, mono_bad = 0;

    {
        Philox rng(701, 0);
        for (int trial = 0; trial < trials; ++trial) {
            SolverConfig cfg;
            std::vector<double> loss;
            int n = draw_instance(rng, trial, cfg, loss);
            SolveReport rep = solve_ftrl(loss, cfg);
            double sum = 0.0, mn = 1.0;
            for (int i = 0; i < n; ++i) {
                sum += rep.point[i];
                mn = std::min(mn, rep.point[i]);
            }
            if (std::abs(sum - 1.0) > 1e-10 || mn < cfg.epsilon - 1e-12) ++feas_bad;
        }
    }
    {
        Philox rng(702, 0);
        for (int trial = 0; trial < trials; ++trial) {
            SolverConfig cfg;
            std::vector<double> loss;
            int n = draw_instance(rng, trial, cfg, loss);
            SolveReport rep = solve_ftrl(loss, cfg);
            double best = ftrl_objective(rep.point, loss, cfg.eta, cfg.nu);
            for (int probe = 0; probe < 100; ++probe) {
                SimplexPoint other = random_feasible(n, cfg.epsilon, rng);
                if (ftrl_objective(other, loss, cfg.eta, cfg.nu) < best - 1e-7) {
                    ++opt_bad;
                    break;
                }
            }
        }
    }
    {
        Philox rng(703, 0);
        for (int trial = 0; trial < trials; ++trial) {
            SolverConfig cfg;
            std::vector<double> loss;
            int n = draw_instance(rng, trial, cfg, loss);
            std::vector<int> perm(n);
            for (int i = 0; i < n; ++i) perm[i] = i;
            for (int i = n - 1; i > 0; --i)
                std::swap(perm[i], perm[rng.uniform_index(static_cast<std::uint64_t>(i + 1))]);
            std::vector<double> shuffled(n);
            for (int i = 0; i < n; ++i) shuffled[i] = loss[perm[i]];
            SimplexPoint base = solve_ftrl(loss, cfg).point;
            SimplexPoint mixed = solve_ftrl(shuffled, cfg).point;
            for (int i = 0; i < n; ++i)
                if (std::abs(mixed[i] - base[perm[i]]) > 1e-10) {
                    ++perm_bad;
                    break;
                }
        }
    }
    {
        Philox rng(704, 0);
        for (int trial = 0; trial < trials; ++trial) {
            SolverConfig cfg;
            std::vector<double> loss;
            int n = draw_instance(rng, trial, cfg, loss);
            double shift = rng.uniform(-100.0, 100.0);
            std::vector<double> moved(loss);
            for (double& l : moved) l += shift;
            SimplexPoint base = solve_ftrl(loss, cfg).point;
            SimplexPoint shifted = solve_ftrl(moved, cfg).point;
            for (int i = 0; i < n; ++i)
                if (std::abs(shifted[i] - base[i]) > 1e-8) {
                    ++shift_bad;
                    break;
                }
        }
    }
    {
        Philox rng(705, 0);
        for (int trial = 0; trial < trials; ++trial) {
            SolverConfig cfg;
            std::vector<double> loss;
            int n = draw_instance(rng, trial, cfg, loss);
            int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
            std::vector<double> bumped(loss);
            bumped[j] += rng.uniform(0.0, 10.0);
            SimplexPoint base = solve_ftrl(loss, cfg).point;
            SimplexPoint after = solve_ftrl(bumped, cfg).point;
            if (after[j] > base[j] + 1e-10) ++mono_bad;
        }
    }

    bool ok = feas_bad + opt_bad + perm_bad + shift_bad + mono_bad == 0;
    auto part = [&](const char* name, int bad) {
        return std::string(name) + (bad == 0 ? " ok" : " FAILED " + std::to_string(bad) + "x");
    };
    return {ok, part("feasibility", feas_bad) + ", " + part("optimality", opt_bad) + ", " +
                    part("permutation", perm_bad) + ", " + part("shift", shift_bad) + ", " +
                    part("monotonicity", mono_bad) + " (" + std::to_string(trials) +
                    " trials each)"};
}

// ---- 8: the CLI is deterministic byte for byte ----

Outcome criterion8() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    const std::string cfg_path = (dir / "banditlab_acceptance_cfg.json").string();
    const std::string out_a = (dir / "banditlab_acceptance_a.csv").string();
    const std::string out_b = (dir / "banditlab_acceptance_b.csv").string();
    const std::string out_c = (dir / "banditlab_acceptance_c.csv").string();

    {
        nlohmann::json root;
        root["version"] = 1;
        root["experiment"]["environment"] = {{"type", "hard"},
                                             {"C", 2},
                                             {"K", 3},
                                             {"target", {0, 1}}};
        root["experiment"]["learner"] = {{"name", "lbftrl"}};
        root["experiment"]["T"] = 500;
        root["experiment"]["repeats"] = 3;
        root["experiment"]["base_seed"] = 33;
        std::ofstream(cfg_path, std::ios::binary) << root.dump(2);
    }

    const std::string cli = ACCEPTANCE_CLI_PATH;
    auto invoke = [&](const std::string& out, const std::string& extra) {
        std::string cmd = "\"" + cli + "\" run --config \"" + cfg_path + "\" --out \"" +
                          out + "\"" + extra;
        return std::system(cmd.c_str());
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    int rc_a = invoke(out_a, "");
    int rc_b = invoke(out_b, "");
    int rc_c = invoke(out_c, " --threads 3 --seed 33");
    std::string a = slurp(out_a), b = slurp(out_b), c = slurp(out_c);

    for (const std::string& p : {cfg_path, out_a, out_b, out_c}) std::remove(p.c_str());

    if (rc_a != 0 || rc_b != 0 || rc_c != 0)
        return {false, "CLI exited nonzero (" + std::to_string(rc_a) + ", " +
                           std::to_string(rc_b) + ", " + std::to_string(rc_c) + ")"};
    if (a.empty()) return {false, "CLI produced an empty summary"};
    bool ok = a == b && a == c;
    return {ok, ok ? "three invocations (one with --threads 3) wrote identical bytes"
                   : "CLI output differs between identically seeded invocations"};
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--criterion k]\n", argv[0]);
            return 2;
        }
    }
    if (only < 0 || only > 8) {
        std::fprintf(stderr, "criterion must lie in 1..8\n");
        return 2;
    }

    Outcome (*criteria[8])() = {criterion1, criterion2, criterion3, criterion4,
                                criterion5, criterion6, criterion7, criterion8};
    bool all_pass = true;
    for (int k = 1; k <= 8; ++k) {
        if (only != 0 && k != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s %s [%.1fs]\n", k, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
