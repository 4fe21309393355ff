#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "banditlab/core.hpp"
#include "banditlab/errors.hpp"
#include "banditlab/rng.hpp"

namespace banditlab {

// Stochastic multiclass stream: context x ~ context_probs, label y ~
// label_probs[x]. The learner-facing loss is the shifted multiclass loss,
// so every round is 1-sparse.
struct StochasticMulticlassSpec {
    std::vector<double> context_probs;               // length C
    std::vector<std::vector<double>> label_probs;    // C rows of length K

    int num_contexts() const { return static_cast<int>(context_probs.size()); }
    int num_labels() const {
        return label_probs.empty() ? 0 : static_cast<int>(label_probs[0].size());
    }

    void validate() const {
        if (context_probs.empty()) throw InputError("StochasticMulticlassSpec: C >= 1 required");
        if (label_probs.size() != context_probs.size())
            throw InputError("StochasticMulticlassSpec: one label row per context required");
        auto check_row = [](const std::vector<double>& row, const char* what) {
            if (row.empty()) throw InputError(std::string(what) + ": empty probability row");
            double s = 0.0;
            for (double v : row) {
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw InputError(std::string(what) + ": probabilities must be in [0, 1]");
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw InputError(std::string(what) + ": probabilities must sum to 1");
        };
        check_row(context_probs, "StochasticMulticlassSpec.context_probs");
        const std::size_t k = label_probs[0].size();
        for (const auto& row : label_probs) {
            if (row.size() != k)
                throw InputError("StochasticMulticlassSpec: ragged label_probs rows");
            check_row(row, "StochasticMulticlassSpec.label_probs");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"context_probs", context_probs}, {"label_probs", label_probs}};
    }

    static StochasticMulticlassSpec from_json(const nlohmann::json& j) {
        for (const auto& [key, val] : j.items()) {
            (void)val;
            if (key != "context_probs" && key != "label_probs")
                throw InputError("StochasticMulticlassSpec: unknown field \"" + key + "\"");
        }
        StochasticMulticlassSpec s;
        if (!j.contains("context_probs") || !j.contains("label_probs"))
            throw InputError("StochasticMulticlassSpec: requires context_probs, label_probs");
        s.context_probs = j.at("context_probs").get<std::vector<double>>();
        s.label_probs = j.at("label_probs").get<std::vector<std::vector<double>>>();
        s.validate();
        return s;
    }
};

// One member of the lower-bound instance family over labels {0, .., K}:
// contexts are uniform; label 0 pays off with probability 1/3 everywhere.
// Without a target every nonzero label pays off w.p. 2/(3K). With target
// (x*, y*), context x* pays y* w.p. 2/3 - (K-1)/K^2 and the other nonzero
// labels w.p. 1/K^2, hiding one clearly-better hypothesis among CK of them.
struct HardInstanceSpec {
    int C = 1;
    int K = 1;
    std::optional<std::pair<int, int>> target;   // (x*, y*), y* in {1..K}

    void validate() const {
        if (C < 1 || K < 1) throw InputError("HardInstanceSpec: C and K must be >= 1");
        if (target) {
            if (target->first < 0 || target->first >= C)
                throw InputError("HardInstanceSpec: target context out of range");
            if (target->second < 1 || target->second > K)
                throw InputError("HardInstanceSpec: target label must be in {1..K}");
        }
    }

    int num_labels() const { return K + 1; }

    nlohmann::json to_json() const {
        nlohmann::json j{{"C", C}, {"K", K}};
        if (target) j["target"] = nlohmann::json::array({target->first, target->second});
        else j["target"] = nullptr;
        return j;
    }

    static HardInstanceSpec from_json(const nlohmann::json& j) {
        for (const auto& [key, val] : j.items()) {
            (void)val;
            if (key != "C" && key != "K" && key != "target")
                throw InputError("HardInstanceSpec: unknown field \"" + key + "\"");
        }
        HardInstanceSpec s;
        if (!j.contains("C") || !j.contains("K") || !j.contains("target"))
            throw InputError("HardInstanceSpec: requires fields C, K, target");
        s.C = j.at("C").get<int>();
        s.K = j.at("K").get<int>();
        if (!j.at("target").is_null()) {
            auto t = j.at("target").get<std::vector<int>>();
            if (t.size() != 2) throw InputError("HardInstanceSpec: target must be [x, y]");
            s.target = std::make_pair(t[0], t[1]);
        }
        s.validate();
        return s;
    }
};

// Fixed (oblivious) loss sequence.
struct AdversarialScript {
    int C = 1;
    int K = 1;
    std::vector<std::pair<int, LossVector>> rounds;

    void validate() const {
        if (C < 1 || K < 1) throw InputError("AdversarialScript: C and K must be >= 1");
        for (const auto& [ctx, loss] : rounds) {
            if (ctx < 0 || ctx >= C)
                throw InputError("AdversarialScript: scripted context out of range");
            if (loss.size() != static_cast<std::size_t>(K))
                throw InputError("AdversarialScript: loss vector length must equal K");
            for (double v : loss.losses)
                if (!(v >= -1.0 && v <= 1.0))
                    throw InputError("AdversarialScript: loss entries must lie in [-1, 1]");
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [ctx, loss] : rounds)
            arr.push_back(nlohmann::json{
                {"context", ctx}, {"losses", loss.losses}, {"s", loss.declared_sparsity}});
        return nlohmann::json{{"C", C}, {"K", K}, {"rounds", arr}};
    }

    static AdversarialScript from_json(const nlohmann::json& j) {
        for (const auto& [key, val] : j.items()) {
            (void)val;
            if (key != "C" && key != "K" && key != "rounds")
                throw InputError("AdversarialScript: unknown field \"" + key + "\"");
        }
        AdversarialScript s;
        if (!j.contains("C") || !j.contains("K") || !j.contains("rounds"))
            throw InputError("AdversarialScript: requires fields C, K, rounds");
        s.C = j.at("C").get<int>();
        s.K = j.at("K").get<int>();
        for (const auto& r : j.at("rounds")) {
            for (const auto& [key, val] : r.items()) {
                (void)val;
                if (key != "context" && key != "losses" && key != "s")
                    throw InputError("AdversarialScript round: unknown field \"" + key + "\"");
            }
            if (!r.contains("context") || !r.contains("losses") || !r.contains("s"))
                throw InputError("AdversarialScript round: requires context, losses, s");
            s.rounds.emplace_back(r.at("context").get<int>(),
                                  LossVector(r.at("losses").get<std::vector<double>>(),
                                             r.at("s").get<double>()));
        }
        s.validate();
        return s;
    }
};

// Exact payoff numerators of each label at one context, over the common
// denominator 3K^2. Integer arithmetic so the sum check is exact.
inline std::pair<std::vector<std::int64_t>, std::int64_t>
hard_label_prob_numerators(const HardInstanceSpec& spec, int context) {
    spec.validate();
    if (context < 0 || context >= spec.C)
        throw InputError("hard_label_prob_numerators: context out of range");
    const std::int64_t k = spec.K;
    const std::int64_t denom = 3 * k * k;
    std::vector<std::int64_t> num(spec.K + 1, 0);
    num[0] = k * k;                                   // 1/3
    if (spec.target && spec.target->first == context) {
        for (int y = 1; y <= spec.K; ++y) num[y] = 3; // 1/K^2
        num[spec.target->second] = 2 * k * k - 3 * (k - 1);  // 2/3 - (K-1)/K^2
    } else {
        for (int y = 1; y <= spec.K; ++y) num[y] = 2 * k;    // 2/(3K)
    }
    return {std::move(num), denom};
}

// Payoff probability of each label at one context, as doubles.
inline std::vector<double> hard_label_probs(const HardInstanceSpec& spec, int context) {
    auto [num, denom] = hard_label_prob_numerators(spec, context);
    std::vector<double> p(num.size());
    for (std::size_t i = 0; i < num.size(); ++i)
        p[i] = static_cast<double>(num[i]) / static_cast<double>(denom);
    return p;
}

// Draws one round: uniform context, then the payoff label by inverse CDF in
// ascending label order. The returned reward vector is the basis vector of
// the drawn label. Exactly two uniform draws per call.
inline std::pair<int, std::vector<double>> hard_instance_step(const HardInstanceSpec& spec,
                                                              Philox& rng) {
    spec.validate();
    int x = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.C)));
    std::vector<double> probs = hard_label_probs(spec, x);
    int y = static_cast<int>(sample_index(probs, rng.uniform()));
    std::vector<double> reward(spec.K + 1, 0.0);
    reward[y] = 1.0;
    return {x, std::move(reward)};
}

// Hypothesis class for the hard instances: N = CK + 1 maps over K+1 labels.
// Index 0 always answers 0; index 1 + x*K + (y-1) answers y at context x and
// 0 everywhere else.
inline PolicyTable build_hard_class(int C, int K) {
    if (C < 1 || K < 1) throw InputError("build_hard_class: C and K must be >= 1");
    const int n = C * K + 1;
    std::vector<std::int32_t> table(static_cast<std::size_t>(n) * C, 0);
    for (int x = 0; x < C; ++x)
        for (int y = 1; y <= K; ++y)
            table[static_cast<std::size_t>(1 + x * K + (y - 1)) * C + x] = y;
    return PolicyTable(n, C, K + 1, std::move(table));
}

// Expected payoff of every label at every context, row-major C x (K+1).
inline std::vector<double> hard_instance_expected_rewards(const HardInstanceSpec& spec) {
    spec.validate();
    std::vector<double> table;
    table.reserve(static_cast<std::size_t>(spec.C) * (spec.K + 1));
    for (int x = 0; x < spec.C; ++x) {
        auto row = hard_label_probs(spec, x);
        table.insert(table.end(), row.begin(), row.end());
    }
    return table;
}

// Draws (context, label) from a stochastic spec: inverse CDF over contexts,
// then over labels, ascending order, one uniform each.
inline std::pair<int, int> stochastic_step(const StochasticMulticlassSpec& spec, Philox& rng) {
    int x = static_cast<int>(sample_index(spec.context_probs, rng.uniform()));
    int y = static_cast<int>(sample_index(spec.label_probs[x], rng.uniform()));
    return {x, y};
}

// Returns the t-th scripted round (0-based).
inline const std::pair<int, LossVector>& script_step(const AdversarialScript& script,
                                                     std::int64_t t) {
    if (t < 0 || t >= static_cast<std::int64_t>(script.rounds.size()))
        throw EnvironmentError("script_step: round index out of range");
    return script.rounds[static_cast<std::size_t>(t)];
}

// Enforces the declared sparsity contract sum_a loss[a]^2 <= s.
inline void validate_sparsity(const LossVector& loss) {
    if (loss.squared_norm() > loss.declared_sparsity + 1e-12)
        throw EnvironmentError("loss vector violates its declared sparsity budget");
}

// Context-duplication transformer: splits every context into `copies`
// identical ones (probability divided evenly, label rows copied) and widens
// the policy table so each policy behaves on the copies exactly as on the
// original. The effective hypothesis class is unchanged.
inline std::pair<StochasticMulticlassSpec, PolicyTable>
duplicate_contexts(const StochasticMulticlassSpec& spec, const PolicyTable& table, int copies) {
    spec.validate();
    if (copies < 1) throw InputError("duplicate_contexts: copies must be >= 1");
    if (table.num_contexts() != spec.num_contexts())
        throw InputError("duplicate_contexts: table and spec disagree on C");
    StochasticMulticlassSpec out;
    const int c = spec.num_contexts();
    out.context_probs.reserve(static_cast<std::size_t>(c) * copies);
    out.label_probs.reserve(static_cast<std::size_t>(c) * copies);
    for (int x = 0; x < c; ++x) {
        for (int r = 0; r < copies; ++r) {
            out.context_probs.push_back(spec.context_probs[x] / copies);
            out.label_probs.push_back(spec.label_probs[x]);
        }
    }
    std::vector<std::int32_t> wide(static_cast<std::size_t>(table.num_policies()) * c * copies);
    for (int i = 0; i < table.num_policies(); ++i)
        for (int x = 0; x < c; ++x)
            for (int r = 0; r < copies; ++r)
                wide[static_cast<std::size_t>(i) * c * copies + x * copies + r] = table(i, x);
    return {std::move(out),
            PolicyTable(table.num_policies(), c * copies, table.num_actions(), std::move(wide))};
}

// Runtime interface the harness drives. Environments are immutable; all
// randomness comes through the caller's stream, so distinct runs may step
// one shared instance concurrently.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::string name() const = 0;
    virtual int num_contexts() const = 0;
    virtual int num_actions() const = 0;
    virtual double sparsity_budget() const = 0;
    // Fills the round-t context and full loss vector. `loss` is an in-out
    // buffer so the hot loop does not allocate.
    virtual void step(std::int64_t t, Philox& rng, int& context, LossVector& loss) const = 0;
    // Expected loss of each action per context (C x K row-major); empty when
    // the environment has no per-round expectation table (scripts).
    virtual const std::vector<double>& expected_losses() const = 0;
    virtual const std::vector<double>& context_probs() const = 0;
    bool has_expectations() const { return !expected_losses().empty(); }
};

class HardInstanceEnv final : public Environment {
public:
    explicit HardInstanceEnv(HardInstanceSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        ctx_probs_.assign(spec_.C, 1.0 / spec_.C);
        label_probs_.reserve(spec_.C);
        for (int x = 0; x < spec_.C; ++x) label_probs_.push_back(hard_label_probs(spec_, x));
        auto rewards = hard_instance_expected_rewards(spec_);
        expected_losses_.resize(rewards.size());
        for (std::size_t i = 0; i < rewards.size(); ++i) expected_losses_[i] = -rewards[i];
    }

    std::string name() const override { return "hard"; }
    int num_contexts() const override { return spec_.C; }
    int num_actions() const override { return spec_.K + 1; }
    double sparsity_budget() const override { return 1.0; }

    void step(std::int64_t, Philox& rng, int& context, LossVector& loss) const override {
        context = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec_.C)));
        int y = static_cast<int>(sample_index(label_probs_[context], rng.uniform()));
        loss.losses.assign(spec_.K + 1, 0.0);
        loss.losses[y] = -1.0;
        loss.declared_sparsity = 1.0;
    }

    const std::vector<double>& expected_losses() const override { return expected_losses_; }
    const std::vector<double>& context_probs() const override { return ctx_probs_; }
    const HardInstanceSpec& spec() const { return spec_; }

private:
    HardInstanceSpec spec_;
    std::vector<double> ctx_probs_;
    std::vector<std::vector<double>> label_probs_;
    std::vector<double> expected_losses_;
};

class StochasticEnv final : public Environment {
public:
    explicit StochasticEnv(StochasticMulticlassSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        const int k = spec_.num_labels();
        expected_losses_.reserve(static_cast<std::size_t>(spec_.num_contexts()) * k);
        for (const auto& row : spec_.label_probs)
            for (double v : row) expected_losses_.push_back(-v);
    }

    std::string name() const override { return "stochastic"; }
    int num_contexts() const override { return spec_.num_contexts(); }
    int num_actions() const override { return spec_.num_labels(); }
    double sparsity_budget() const override { return 1.0; }

    void step(std::int64_t, Philox& rng, int& context, LossVector& loss) const override {
        auto [x, y] = stochastic_step(spec_, rng);
        context = x;
        loss.losses.assign(spec_.num_labels(), 0.0);
        loss.losses[y] = -1.0;
        loss.declared_sparsity = 1.0;
    }

    const std::vector<double>& expected_losses() const override { return expected_losses_; }
    const std::vector<double>& context_probs() const override { return spec_.context_probs; }
    const StochasticMulticlassSpec& spec() const { return spec_; }

private:
    StochasticMulticlassSpec spec_;
    std::vector<double> expected_losses_;
};

class ScriptEnv final : public Environment {
public:
    explicit ScriptEnv(AdversarialScript script) : script_(std::move(script)) {
        script_.validate();
        s_max_ = 0.0;
        for (const auto& [ctx, loss] : script_.rounds) {
            validate_sparsity(loss);
            s_max_ = std::max(s_max_, loss.declared_sparsity);
        }
        if (s_max_ == 0.0) s_max_ = 1.0;
    }

    std::string name() const override { return "script"; }
    int num_contexts() const override { return script_.C; }
    int num_actions() const override { return script_.K; }
    double sparsity_budget() const override { return s_max_; }

    void step(std::int64_t t, Philox&, int& context, LossVector& loss) const override {
        const auto& round = script_step(script_, t);
        context = round.first;
        loss = round.second;
    }

    const std::vector<double>& expected_losses() const override { return kNone; }
    const std::vector<double>& context_probs() const override { return kNone; }
    const AdversarialScript& script() const { return script_; }

private:
    static inline const std::vector<double> kNone{};
    AdversarialScript script_;
    double s_max_ = 1.0;
};

// Deterministically generated stochastic multiclass instance: uniform
// contexts, one dominant label per context holding probability 3/4 (the
// rest split evenly), and a uniformly random policy table. Everything is a
// pure function of (N, C, K, gen_seed); used by sweeps over class sizes.
struct GeneratedInstance {
    StochasticMulticlassSpec spec;
    PolicyTable table;
};

inline GeneratedInstance make_random_multiclass(int N, int C, int K, std::uint64_t gen_seed) {
    if (N < 1 || C < 1 || K < 1)
        throw InputError("make_random_multiclass: N, C, K must be >= 1");
    Philox rng(gen_seed, 2);  // stream 2: instance generation (0 = env, 1 = learner)
    StochasticMulticlassSpec spec;
    spec.context_probs.assign(C, 1.0 / C);
    spec.label_probs.reserve(C);
    for (int x = 0; x < C; ++x) {
        std::vector<double> row(K, K > 1 ? 0.25 / (K - 1) : 0.0);
        int star = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(K)));
        row[star] = K > 1 ? 0.75 : 1.0;
        spec.label_probs.push_back(std::move(row));
    }
    std::vector<std::int32_t> table(static_cast<std::size_t>(N) * C);
    for (std::size_t i = 0; i < table.size(); ++i)
        table[i] = static_cast<std::int32_t>(rng.uniform_index(static_cast<std::uint64_t>(K)));
    spec.validate();
    return GeneratedInstance{std::move(spec), PolicyTable(N, C, K, std::move(table))};
}

} // namespace banditlab
