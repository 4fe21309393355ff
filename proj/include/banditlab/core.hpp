#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "banditlab/errors.hpp"

namespace banditlab {

// Finite policy class: N policies x C contexts -> action in [0, K).
// Stored row-major as a flat array so the hot loop is a single indexed load.
class PolicyTable {
public:
    PolicyTable(int num_policies, int num_contexts, int num_actions,
                std::vector<std::int32_t> table)
        : n_(num_policies), c_(num_contexts), k_(num_actions), table_(std::move(table)) {
        if (n_ < 1 || c_ < 1 || k_ < 1)
            throw InputError("PolicyTable: N, C, K must all be >= 1");
        if (table_.size() != static_cast<std::size_t>(n_) * static_cast<std::size_t>(c_))
            throw InputError("PolicyTable: table size must be N*C");
        for (std::int32_t a : table_)
            if (a < 0 || a >= k_)
                throw InputError("PolicyTable: action index out of range [0, K)");
    }

    int num_policies() const { return n_; }
    int num_contexts() const { return c_; }
    int num_actions() const { return k_; }

    // Action of policy i at context x.
    std::int32_t operator()(int policy, int context) const {
        return table_[static_cast<std::size_t>(policy) * c_ + context];
    }

    std::int32_t at(int policy, int context) const {
        if (policy < 0 || policy >= n_)
            throw InputError("PolicyTable: policy index out of range");
        if (context < 0 || context >= c_)
            throw InputError("PolicyTable: context index out of range");
        return (*this)(policy, context);
    }

    const std::vector<std::int32_t>& raw() const { return table_; }

    nlohmann::json to_json() const {
        return nlohmann::json{{"N", n_}, {"C", c_}, {"K", k_}, {"table", table_}};
    }

    static PolicyTable from_json(const nlohmann::json& j) {
        for (const auto& [key, val] : j.items()) {
            (void)val;
            if (key != "N" && key != "C" && key != "K" && key != "table")
                throw InputError("PolicyTable: unknown field \"" + key + "\"");
        }
        if (!j.contains("N") || !j.contains("C") || !j.contains("K") || !j.contains("table"))
            throw InputError("PolicyTable: requires fields N, C, K, table");
        return PolicyTable(j.at("N").get<int>(), j.at("C").get<int>(), j.at("K").get<int>(),
                           j.at("table").get<std::vector<std::int32_t>>());
    }

private:
    int n_, c_, k_;
    std::vector<std::int32_t> table_;
};

// Probability vector over the N policies (the FTRL iterate).
struct SimplexPoint {
    std::vector<double> weights;

    SimplexPoint() = default;
    explicit SimplexPoint(std::vector<double> w) : weights(std::move(w)) {}

    static SimplexPoint uniform(int n) {
        return SimplexPoint(std::vector<double>(n, 1.0 / n));
    }

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }

    double sum() const {
        // Neumaier-compensated sum: the feasibility checks care about 1e-10.
        double s = 0.0, comp = 0.0;
        for (double w : weights) {
            double t = s + w;
            comp += (std::abs(s) >= std::abs(w)) ? (s - t) + w : (w - t) + s;
            s = t;
        }
        return s + comp;
    }

    double min_weight() const {
        double m = weights.empty() ? 0.0 : weights[0];
        for (double w : weights) m = std::min(m, w);
        return m;
    }

    // Probability vector with entries >= floor (pass floor = 0 to check the
    // plain simplex).
    bool is_valid(double floor = 0.0, double sum_tol = 1e-9) const {
        if (weights.empty()) return false;
        for (double w : weights)
            if (!(w >= floor - 1e-12) || !std::isfinite(w)) return false;
        return std::abs(sum() - 1.0) <= sum_tol;
    }
};

// Per-action losses for one round together with the declared sparsity
// budget s (the contract is sum of squares <= s).
struct LossVector {
    std::vector<double> losses;
    double declared_sparsity = 1.0;

    LossVector() = default;
    LossVector(std::vector<double> l, double s) : losses(std::move(l)), declared_sparsity(s) {}

    std::size_t size() const { return losses.size(); }
    double operator[](std::size_t a) const { return losses[a]; }

    double squared_norm() const {
        double s = 0.0;
        for (double l : losses) s += l * l;
        return s;
    }
};

// Everything the harness logs about one round.
struct RoundRecord {
    std::int64_t round = 0;
    int context = 0;
    int policy_chosen = 0;
    int action = 0;
    double observed_loss = 0.0;
    std::vector<double> estimator;   // c-hat over policies
    double action_prob = 0.0;        // q_{t, a_t}
    double stability_ratio = 1.0;    // max_i p_{t+1,i} / p_{t,i}
};

// Hyperparameters a run was executed with, for reporting.
struct RunParams {
    double eta = 0.0;
    double nu = 0.0;
    double epsilon = 0.0;
    std::int64_t horizon = 0;
};

// Regret values at a logarithmically spaced prefix checkpoint.
struct RegretCheckpoint {
    std::int64_t round = 0;
    double realized_regret = 0.0;
    double pseudo_regret = 0.0;      // NaN when no expected-loss table exists
    double second_order_sum = 0.0;   // running sum of sum_i p_i chat_i^2
};

// Result of one learner-environment episode.
struct RunResult {
    std::vector<RoundRecord> per_round;             // full trace only on request
    std::vector<RegretCheckpoint> checkpoints;
    std::vector<double> cumulative_policy_losses;   // sum_t c_{t,i}
    double cumulative_learner_loss = 0.0;
    double realized_regret = 0.0;
    double pseudo_regret = 0.0;                     // NaN for script environments
    double max_stability_ratio = 1.0;
    double min_action_prob = 1.0;
    double second_order_sum = 0.0;
    std::uint64_t seed = 0;
    RunParams params;
};

// Loss shift for single-label multiclass: -1 at the true label, 0 elsewhere.
// The shifted vector has squared norm exactly 1, so the round is 1-sparse.
inline LossVector shift_multiclass_loss(int true_label, int num_actions) {
    if (num_actions < 1) throw InputError("shift_multiclass_loss: K must be >= 1");
    if (true_label < 0 || true_label >= num_actions)
        throw InputError("shift_multiclass_loss: label out of range [0, K)");
    std::vector<double> l(num_actions, 0.0);
    l[true_label] = -1.0;
    return LossVector(std::move(l), 1.0);
}

// Loss induced over policies at one context: entry i is the loss of the
// action policy i takes there.
inline std::vector<double> policy_cost_vector(const PolicyTable& table, int context,
                                              const LossVector& loss) {
    if (context < 0 || context >= table.num_contexts())
        throw InputError("policy_cost_vector: context out of range");
    if (loss.size() != static_cast<std::size_t>(table.num_actions()))
        throw InputError("policy_cost_vector: loss vector length must equal K");
    std::vector<double> cost(table.num_policies());
    for (int i = 0; i < table.num_policies(); ++i) cost[i] = loss[table(i, context)];
    return cost;
}

} // namespace banditlab
