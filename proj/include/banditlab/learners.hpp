#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "banditlab/core.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/rng.hpp"
#include "banditlab/solver.hpp"

namespace banditlab {

// Learner hyperparameters. When auto-set from (N, s, T):
//   eta = sqrt(log N / (s T)), nu = 1/16, epsilon = 1/(N T),
// with log N read as log max(N, 2) so the degenerate single-policy class
// does not zero out the learning rate.
struct HyperParams {
    double eta = 0.0;
    double nu = 0.0;
    double epsilon = 0.0;
    struct Derived {
        double s = 0.0;
        std::int64_t T = 0;
        int N = 0;
    };
    std::optional<Derived> derived_from;

    static HyperParams defaults_for(int N, double s, std::int64_t T) {
        if (N < 1) throw InputError("HyperParams: N must be >= 1");
        if (!(s > 0.0)) throw InputError("HyperParams: sparsity budget must be > 0");
        if (T < 1) throw InputError("HyperParams: horizon must be >= 1");
        HyperParams h;
        double log_n = std::log(static_cast<double>(std::max(N, 2)));
        h.eta = std::sqrt(log_n / (s * static_cast<double>(T)));
        h.nu = 1.0 / 16.0;
        h.epsilon = 1.0 / (static_cast<double>(N) * static_cast<double>(T));
        h.derived_from = Derived{s, T, N};
        return h;
    }
};

// Per-field overrides applied on top of the auto-set values.
struct HyperOverrides {
    std::optional<double> eta;
    std::optional<double> nu;
    std::optional<double> epsilon;
};

// What a learner reports about one action choice.
struct ActResult {
    int policy = 0;
    int action = 0;
    double action_prob = 0.0;  // probability the played action had this round
};

// Reported parameters for result tables; fields a learner has no use for
// stay empty.
struct LearnerParamsView {
    std::optional<double> eta;
    std::optional<double> nu;
    std::optional<double> epsilon;
};

// Common bandit-learner protocol: act and update must strictly alternate.
class Learner {
public:
    virtual ~Learner() = default;
    virtual std::string name() const = 0;
    virtual ActResult act(int context, Philox& rng) = 0;
    // Feeds back the loss of the played action; returns the stability ratio
    // max_i p_{new,i} / p_{old,i} of the policy distribution.
    virtual double update(double observed_loss) = 0;
    virtual const SimplexPoint& dist() const = 0;
    // Distribution over actions the learner would play at this context now.
    virtual std::vector<double> action_dist(int context) const = 0;
    virtual const std::vector<double>& last_estimator() const = 0;
    virtual std::int64_t round() const = 0;
    virtual LearnerParamsView params_view() const = 0;
};

// Probability of each action under policy distribution p at one context.
inline std::vector<double> induced_action_dist(const SimplexPoint& p, const PolicyTable& table,
                                               int context) {
    if (context < 0 || context >= table.num_contexts())
        throw InputError("induced_action_dist: context out of range");
    if (p.size() != static_cast<std::size_t>(table.num_policies()))
        throw InputError("induced_action_dist: distribution size must equal N");
    std::vector<double> q(table.num_actions(), 0.0);
    for (int i = 0; i < table.num_policies(); ++i) q[table(i, context)] += p[i];
    return q;
}

// FTRL over the policy simplex with entropy plus log-barrier regularization.
// Each round: sample a policy, play its action, build the importance-weighted
// loss estimate, and re-solve the regularized minimization over the truncated
// simplex for the next distribution. The barrier keeps every policy's weight
// at least epsilon and consecutive distributions multiplicatively close.
class LbFtrl : public Learner {
public:
    LbFtrl(PolicyTable table, double sparsity, std::int64_t horizon,
           HyperOverrides overrides = {}, std::optional<SimplexPoint> initial_dist = {})
        : table_(std::move(table)), horizon_(horizon) {
        if (horizon_ < 1) throw InputError("LbFtrl: horizon must be >= 1");
        params_ = HyperParams::defaults_for(table_.num_policies(), sparsity, horizon_);
        if (overrides.eta) { params_.eta = *overrides.eta; params_.derived_from.reset(); }
        if (overrides.nu) { params_.nu = *overrides.nu; params_.derived_from.reset(); }
        if (overrides.epsilon) {
            params_.epsilon = *overrides.epsilon;
            params_.derived_from.reset();
        }
        scfg_.eta = params_.eta;
        scfg_.nu = params_.nu;
        scfg_.epsilon = params_.epsilon;
        scfg_.validate(table_.num_policies());

        const int n = table_.num_policies();
        dist_ = SimplexPoint::uniform(n);
        if (initial_dist) {
            if (initial_dist->size() != static_cast<std::size_t>(n))
                throw InputError("LbFtrl: initial distribution size must equal N");
            if (!initial_dist->is_valid(params_.epsilon))
                throw InputError("LbFtrl: initial distribution infeasible for the "
                                 "truncated simplex");
            dist_ = std::move(*initial_dist);
        }
        cum_est_.assign(n, 0.0);
        last_est_.assign(n, 0.0);
    }

    std::string name() const override { return "lbftrl"; }

    ActResult act(int context, Philox& rng) override {
        if (pending_) throw ProtocolError("LbFtrl: act called with an unresolved round");
        if (context < 0 || context >= table_.num_contexts())
            throw InputError("LbFtrl: context out of range");
        int i = static_cast<int>(sample_index(dist_.weights, rng.uniform()));
        int a = table_(i, context);
        double q = 0.0;
        for (int j = 0; j < table_.num_policies(); ++j)
            if (table_(j, context) == a) q += dist_[j];
        pending_ = Pending{context, i, a, q};
        return ActResult{i, a, q};
    }

    double update(double observed_loss) override {
        if (!pending_) throw ProtocolError("LbFtrl: update called before act");
        if (!(observed_loss >= -1.0 && observed_loss <= 1.0))
            throw InputError("LbFtrl: observed loss must lie in [-1, 1]");
        const Pending pend = *pending_;
        pending_.reset();

        const int n = table_.num_policies();
        double w = observed_loss / pend.action_prob;
        for (int j = 0; j < n; ++j) {
            double c = (table_(j, pend.context) == pend.action) ? w : 0.0;
            last_est_[j] = c;
            cum_est_[j] += c;
        }
        SolveReport rep = solve_ftrl(cum_est_, scfg_, &warm_);
        double ratio = 0.0;
        for (int j = 0; j < n; ++j) ratio = std::max(ratio, rep.point[j] / dist_[j]);
        dist_ = std::move(rep.point);
        ++round_;
        return ratio;
    }

    const SimplexPoint& dist() const override { return dist_; }

    std::vector<double> action_dist(int context) const override {
        return induced_action_dist(dist_, table_, context);
    }

    const std::vector<double>& last_estimator() const override { return last_est_; }
    std::int64_t round() const override { return round_; }

    LearnerParamsView params_view() const override {
        return LearnerParamsView{params_.eta, params_.nu, params_.epsilon};
    }

    const HyperParams& hyper_params() const { return params_; }
    const PolicyTable& policy_table() const { return table_; }
    const std::vector<double>& cumulative_estimates() const { return cum_est_; }

private:
    struct Pending {
        int context;
        int policy;
        int action;
        double action_prob;
    };

    PolicyTable table_;
    std::int64_t horizon_;
    HyperParams params_;
    SolverConfig scfg_;
    SimplexPoint dist_;
    std::vector<double> cum_est_;
    std::vector<double> last_est_;
    std::optional<Pending> pending_;
    WarmStart warm_;
    std::int64_t round_ = 0;
};

// Exponential weights over policies with uniform action exploration, the
// classical contextual baseline. Works on shifted zero-one losses
// (observed loss + 1, so a correct prediction costs 0) to keep the
// importance-weighted estimates nonnegative:
//   eta = sqrt(log N / (K T)), gamma = min(1, sqrt(K log N / T)).
// Per round it draws the policy first, then with probability gamma replaces
// the policy's action by a uniform one; the importance weight uses the full
// mixed action probability.
class Exp4 : public Learner {
public:
    Exp4(PolicyTable table, std::int64_t horizon)
        : table_(std::move(table)), horizon_(horizon) {
        if (horizon_ < 1) throw InputError("Exp4: horizon must be >= 1");
        const int n = table_.num_policies();
        const int k = table_.num_actions();
        double log_n = std::log(static_cast<double>(std::max(n, 2)));
        eta_ = std::sqrt(log_n / (static_cast<double>(k) * static_cast<double>(horizon_)));
        gamma_ = std::min(1.0, std::sqrt(static_cast<double>(k) * log_n /
                                         static_cast<double>(horizon_)));
        dist_ = SimplexPoint::uniform(n);
        cum01_.assign(n, 0.0);
        last_est_.assign(n, 0.0);
    }

    std::string name() const override { return "exp4"; }

    ActResult act(int context, Philox& rng) override {
        if (pending_) throw ProtocolError("Exp4: act called with an unresolved round");
        if (context < 0 || context >= table_.num_contexts())
            throw InputError("Exp4: context out of range");
        const int k = table_.num_actions();
        int i = static_cast<int>(sample_index(dist_.weights, rng.uniform()));
        int a = table_(i, context);
        bool explore = rng.uniform() < gamma_;
        if (explore) a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
        double on_policy = 0.0;
        for (int j = 0; j < table_.num_policies(); ++j)
            if (table_(j, context) == a) on_policy += dist_[j];
        double q = (1.0 - gamma_) * on_policy + gamma_ / k;
        pending_ = Pending{context, i, a, q};
        return ActResult{i, a, q};
    }

    double update(double observed_loss) override {
        if (!pending_) throw ProtocolError("Exp4: update called before act");
        if (!(observed_loss >= -1.0 && observed_loss <= 1.0))
            throw InputError("Exp4: observed loss must lie in [-1, 1]");
        const Pending pend = *pending_;
        pending_.reset();

        const int n = table_.num_policies();
        double w = (observed_loss + 1.0) / pend.action_prob;
        double cmin = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            double c = (table_(j, pend.context) == pend.action) ? w : 0.0;
            last_est_[j] = c;
            cum01_[j] += c;
            cmin = std::min(cmin, cum01_[j]);
        }
        // Recompute weights from the anchored cumulative losses; anchoring at
        // the minimum keeps the largest weight at exp(0) and avoids overflow.
        double z = 0.0;
        std::vector<double> next(n);
        for (int j = 0; j < n; ++j) {
            next[j] = std::exp(-eta_ * (cum01_[j] - cmin));
            z += next[j];
        }
        double ratio = 0.0;
        for (int j = 0; j < n; ++j) {
            next[j] /= z;
            // Weights can underflow to zero for far-behind policies; the
            // ratio diagnostic only covers coordinates that were positive.
            if (dist_[j] > 0.0) ratio = std::max(ratio, next[j] / dist_[j]);
        }
        dist_ = SimplexPoint(std::move(next));
        ++round_;
        return ratio;
    }

    const SimplexPoint& dist() const override { return dist_; }

    std::vector<double> action_dist(int context) const override {
        std::vector<double> q = induced_action_dist(dist_, table_, context);
        const int k = table_.num_actions();
        for (double& v : q) v *= 1.0 - gamma_;
        for (double& v : q) v += gamma_ / k;
        return q;
    }

    const std::vector<double>& last_estimator() const override { return last_est_; }
    std::int64_t round() const override { return round_; }

    LearnerParamsView params_view() const override {
        return LearnerParamsView{eta_, std::nullopt, std::nullopt};
    }

    double learning_rate() const { return eta_; }
    double mix_gamma() const { return gamma_; }
    const PolicyTable& policy_table() const { return table_; }

private:
    struct Pending {
        int context;
        int policy;
        int action;
        double action_prob;
    };

    PolicyTable table_;
    std::int64_t horizon_;
    double eta_ = 0.0;
    double gamma_ = 0.0;
    SimplexPoint dist_;
    std::vector<double> cum01_;
    std::vector<double> last_est_;
    std::optional<Pending> pending_;
    std::int64_t round_ = 0;
};

} // namespace banditlab
