#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "banditlab/core.hpp"
#include "banditlab/errors.hpp"

namespace banditlab {

// Parameters of the regularized objective
//   f(p) = <L, p> + (1/eta) sum_i p_i log p_i - (1/nu) sum_i log p_i
// minimized over the truncated simplex {p : p_i >= epsilon, sum p = 1},
// plus the numerical tolerances of the solver.
struct SolverConfig {
    double eta = 1.0;
    double nu = 1.0;
    double epsilon = 1e-6;
    double kkt_tol = 1e-8;
    double sum_tol = 1e-10;
    int max_outer_iters = 200;
    int max_inner_iters = 100;

    void validate(std::size_t n) const {
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw InputError("SolverConfig: eta must be positive and finite");
        if (!(nu > 0.0) || nu > 1.0)
            throw InputError("SolverConfig: nu must lie in (0, 1]");
        if (!(epsilon > 0.0))
            throw InputError("SolverConfig: epsilon must be > 0 (pass 1e-15 for "
                             "effectively untruncated simplices)");
        if (!(epsilon * static_cast<double>(n) < 1.0))
            throw InputError("SolverConfig: epsilon*N must be < 1, otherwise the "
                             "truncated simplex is empty or a single point");
        if (!(kkt_tol > 0.0) || !(sum_tol > 0.0))
            throw InputError("SolverConfig: tolerances must be positive");
        if (max_outer_iters < 1 || max_inner_iters < 1)
            throw InputError("SolverConfig: iteration caps must be >= 1");
    }
};

struct SolveReport {
    SimplexPoint point;
    double kkt_residual = 0.0;
    int iterations = 0;        // outer dual-value evaluations
    double objective_value = 0.0;
    double lambda = 0.0;       // multiplier of the sum constraint, for warm starts
};

// Optional warm start carried between consecutive solves: the previous
// multiplier and the previous log-space roots. Results must agree with a
// cold start to within the solver tolerances; this only saves iterations.
// Passed in-out: a successful solve overwrites it with its own state.
struct WarmStart {
    double lambda = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> log_roots;
};

inline double ftrl_objective(const SimplexPoint& p, const std::vector<double>& cum_loss,
                             double eta, double nu) {
    if (p.size() != cum_loss.size())
        throw InputError("ftrl_objective: dimension mismatch");
    double lin = 0.0, ent = 0.0, bar = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double pi = p[i];
        if (!(pi > 0.0))
            throw InputError("ftrl_objective: probabilities must be strictly positive");
        double lp = std::log(pi);
        lin += cum_loss[i] * pi;
        ent += pi * lp;
        bar += lp;
    }
    return lin + ent / eta - bar / nu;
}

namespace detail {

// State of one coordinate's root p_i(lambda) of the stationarity condition
//   L_i + (1/eta)(1 + log p) - 1/(nu p) + lambda = 0.
// In log-space u = log p the left side h(u) is concave and strictly
// increasing, so Newton from inside the bracket [log eps, log 2] converges
// monotonically after the first step.
struct CoordSolve {
    double p = 0.0;      // clipped root max(eps, p_i(lambda)), capped at 2
    double u = 0.0;      // log of the uncapped root (log eps when clipped)
    double h = 0.0;      // stationarity residual at u; >= 0 means clipped
    bool clipped = false;
};

inline CoordSolve coord_root(double li, double lambda, double inv_eta, double inv_nu,
                             double log_eps, double inv_eps, double eps, double warm_u,
                             int max_inner) {
    CoordSolve out;
    double base = li + lambda;
    // Root below the floor: the coordinate is pinned at eps for this lambda.
    double h_eps = base + inv_eta * (1.0 + log_eps) - inv_nu * inv_eps;
    if (h_eps >= 0.0) {
        out.p = eps;
        out.u = log_eps;
        out.h = h_eps;
        out.clipped = true;
        return out;
    }
    // Root above p = 2: impossible at the solution (the sum would exceed 1),
    // so just report the cap; the dual search only needs the sign of sum-1.
    constexpr double kLn2 = 0.6931471805599453;
    double h_cap = base + inv_eta * (1.0 + kLn2) - inv_nu * 0.5;
    if (h_cap <= 0.0) {
        out.p = 2.0;
        out.u = kLn2;
        out.h = h_cap;
        return out;
    }
    double u = std::clamp(warm_u, log_eps, kLn2);
    double tol = 1e-13 * (1.0 + std::abs(base)) + 1e-14;
    double h = 0.0, e = 0.0;
    for (int it = 0; it < max_inner; ++it) {
        e = std::exp(-u);
        h = base + inv_eta * (1.0 + u) - inv_nu * e;
        if (std::abs(h) <= tol) break;
        double step = h / (inv_eta + inv_nu * e);
        double u_next = std::clamp(u - step, log_eps, kLn2);
        if (u_next == u) break;  // stalled at machine precision
        u = u_next;
    }
    out.u = u;
    out.p = std::exp(u);
    out.h = h;
    return out;
}

} // namespace detail

// Minimizes <L,p> + (1/eta) sum p log p - (1/nu) sum log p over the truncated
// simplex. Dual approach: for a multiplier lambda each coordinate has a unique
// positive stationary root, monotone decreasing in lambda; clip roots at the
// eps floor and search for the lambda where the clipped sum equals 1. The
// clipped sum stays monotone in lambda, so a safeguarded false-position scan
// (Illinois) over a provably straddling bracket always converges.
inline SolveReport solve_ftrl(const std::vector<double>& cum_loss, const SolverConfig& config,
                              WarmStart* warm = nullptr) {
    const std::size_t n = cum_loss.size();
    if (n == 0) throw InputError("solve_ftrl: empty loss vector");
    config.validate(n);
    for (double l : cum_loss)
        if (!std::isfinite(l)) throw InputError("solve_ftrl: loss entries must be finite");

    const double inv_eta = 1.0 / config.eta;
    const double inv_nu = 1.0 / config.nu;
    const double eps = config.epsilon;
    const double log_eps = std::log(eps);
    const double inv_eps = 1.0 / eps;

    SolveReport rep;
    if (n == 1) {
        rep.point = SimplexPoint(std::vector<double>{1.0});
        rep.lambda = -(cum_loss[0] + inv_eta - inv_nu);
        rep.kkt_residual = 0.0;
        rep.objective_value = cum_loss[0];  // both regularizer terms vanish at p = 1
        rep.iterations = 0;
        return rep;
    }

    double lmax = cum_loss[0], lmin = cum_loss[0];
    for (double l : cum_loss) {
        lmax = std::max(lmax, l);
        lmin = std::min(lmin, l);
    }
    // Verified bracket: at lam_lo every root exceeds 1 (sum > 1), at lam_hi
    // every root sits below eps (sum = N*eps <= 1).
    const double lam_lo_full = -lmax - inv_eta - static_cast<double>(n) * inv_nu;
    const double lam_hi_full = -lmin + inv_eta * std::abs(log_eps) + inv_nu * inv_eps;

    std::vector<double> u(n, -std::log(static_cast<double>(n)));
    if (warm && warm->log_roots.size() == n) u = warm->log_roots;
    std::vector<double> p(n, 0.0);

    int evals = 0;
    const double accept_tol = config.sum_tol / 4.0;
    double best_resid = std::numeric_limits<double>::infinity();

    // Evaluates sum_i max(eps, p_i(lambda)) - 1 with a compensated sum,
    // updating the shared root caches so later evaluations start warm.
    auto eval = [&](double lambda) -> double {
        ++evals;
        double s = 0.0, comp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto c = detail::coord_root(cum_loss[i], lambda, inv_eta, inv_nu, log_eps,
                                        inv_eps, eps, u[i], config.max_inner_iters);
            u[i] = c.clipped ? u[i] : c.u;  // keep a free-root guess for warm starts
            p[i] = c.p;
            double w = c.p;
            double t = s + w;
            comp += (std::abs(s) >= std::abs(w)) ? (s - t) + w : (w - t) + s;
            s = t;
        }
        return (s + comp) - 1.0;
    };

    auto finish = [&](double lambda) {
        rep.lambda = lambda;
        rep.iterations = evals;
        // Residual of the returned point: free coordinates carry their Newton
        // residual, floored coordinates satisfy the sign condition exactly.
        double resid = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto c = detail::coord_root(cum_loss[i], lambda, inv_eta, inv_nu, log_eps,
                                        inv_eps, eps, u[i], config.max_inner_iters);
            u[i] = c.u;
            p[i] = c.p;
            if (!c.clipped) resid = std::max(resid, std::abs(c.h));
        }
        rep.kkt_residual = resid;
        rep.point = SimplexPoint(p);
        rep.objective_value = ftrl_objective(rep.point, cum_loss, config.eta, config.nu);
        if (warm) {
            warm->lambda = lambda;
            warm->log_roots = u;
        }
        return rep;
    };

    // Bracket [a, b] with f(a) >= 0 >= f(b). Warm multipliers get a local
    // expanding search first; anything else falls back to the full bracket.
    double a = lam_lo_full, b = lam_hi_full;
    double fa = 0.0, fb = 0.0;
    bool bracketed = false;
    if (warm && std::isfinite(warm->lambda)) {
        double lam_w = std::clamp(warm->lambda, lam_lo_full, lam_hi_full);
        double fw = eval(lam_w);
        if (std::abs(fw) <= accept_tol) return finish(lam_w);
        double step = 1e-3 * (1.0 + std::abs(lam_w));
        if (fw > 0.0) {  // sum too large: lambda must grow
            a = lam_w; fa = fw;
            for (int k = 0; k < 16 && evals < config.max_outer_iters; ++k) {
                double cand = std::min(a + step, lam_hi_full);
                double fc = eval(cand);
                if (std::abs(fc) <= accept_tol) return finish(cand);
                if (fc < 0.0) { b = cand; fb = fc; bracketed = true; break; }
                a = cand; fa = fc;
                if (cand >= lam_hi_full) break;
                step *= 8.0;
            }
        } else {
            b = lam_w; fb = fw;
            for (int k = 0; k < 16 && evals < config.max_outer_iters; ++k) {
                double cand = std::max(b - step, lam_lo_full);
                double fc = eval(cand);
                if (std::abs(fc) <= accept_tol) return finish(cand);
                if (fc > 0.0) { a = cand; fa = fc; bracketed = true; break; }
                b = cand; fb = fc;
                if (cand <= lam_lo_full) break;
                step *= 8.0;
            }
        }
    }
    if (!bracketed) {
        if (!(a < b)) b = a + 1.0;
        fa = eval(a);
        if (std::abs(fa) <= accept_tol) return finish(a);
        fb = eval(b);
        if (std::abs(fb) <= accept_tol) return finish(b);
        if (fa < 0.0 || fb > 0.0)
            throw SolverError("solve_ftrl: initial bracket failed to straddle",
                              std::min(std::abs(fa), std::abs(fb)));
    }

    // Illinois false position with a periodic forced bisection step.
    int side = 0;
    int stale = 0;
    while (evals < config.max_outer_iters) {
        double mid;
        if (stale >= 6) {
            mid = 0.5 * (a + b);
            stale = 0;
        } else {
            mid = (a * fb - b * fa) / (fb - fa);
            if (!std::isfinite(mid) || mid <= a || mid >= b) mid = 0.5 * (a + b);
        }
        double width = b - a;
        double fm = eval(mid);
        best_resid = std::min(best_resid, std::abs(fm));
        if (std::abs(fm) <= accept_tol) return finish(mid);
        if (fm > 0.0) {
            a = mid; fa = fm;
            if (side == 1) fb *= 0.5;
            side = 1;
        } else {
            b = mid; fb = fm;
            if (side == -1) fa *= 0.5;
            side = -1;
        }
        if (b - a > 0.5 * width) ++stale; else stale = 0;
        // The bracket has collapsed to adjacent doubles: accept the better
        // endpoint if it meets the contract tolerance, otherwise report.
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() *
                         (1.0 + std::max(std::abs(a), std::abs(b)))) {
            double lam = std::abs(fa) <= std::abs(fb) ? a : b;
            double f = std::min(std::abs(fa), std::abs(fb));
            if (f <= config.sum_tol) return finish(lam);
            throw SolverError("solve_ftrl: dual bracket exhausted before reaching "
                              "the sum tolerance", f);
        }
    }
    throw SolverError("solve_ftrl: outer iteration cap reached", best_resid);
}

namespace detail {

// Euclidean projection onto {p : p_i >= eps, sum p = 1} by shifting to the
// scaled simplex {z >= 0, sum z = 1 - N*eps} and thresholding.
inline void project_truncated_simplex(double* x, int n, double eps) {
    double budget = 1.0 - n * eps;
    double v[8];
    for (int i = 0; i < n; ++i) v[i] = x[i] - eps;
    double sorted[8];
    std::copy(v, v + n, sorted);
    std::sort(sorted, sorted + n, std::greater<double>());
    double csum = 0.0, tau = 0.0;
    for (int j = 0; j < n; ++j) {
        csum += sorted[j];
        double t = (csum - budget) / (j + 1);
        if (t < sorted[j]) tau = t;
    }
    for (int i = 0; i < n; ++i) x[i] = eps + std::max(0.0, v[i] - tau);
}

} // namespace detail

// Reference minimizer for small instances, deliberately independent of the
// dual path above: projected gradient descent with diminishing steps, then a
// pairwise-exchange Newton polish. Strict convexity makes the polished point
// the global minimum; used to validate solve_ftrl.
inline SimplexPoint oracle_solve(const std::vector<double>& cum_loss,
                                 const SolverConfig& config) {
    const int n = static_cast<int>(cum_loss.size());
    if (n < 1) throw InputError("oracle_solve: empty loss vector");
    if (n > 6) throw InputError("oracle_solve: supports N <= 6 only");
    config.validate(cum_loss.size());

    const double inv_eta = 1.0 / config.eta;
    const double inv_nu = 1.0 / config.nu;
    const double eps = config.epsilon;

    double p[8], g[8];
    for (int i = 0; i < n; ++i) p[i] = 1.0 / n;

    double g0 = 0.0;
    for (int i = 0; i < n; ++i) {
        g[i] = cum_loss[i] + inv_eta * (1.0 + std::log(p[i])) - inv_nu / p[i];
        g0 = std::max(g0, std::abs(g[i]));
    }
    const double alpha0 = 1.0 / (1.0 + g0);

    constexpr int kIters = 1000000;
    for (int k = 0; k < kIters; ++k) {
        double alpha = alpha0 / std::sqrt(static_cast<double>(k + 1));
        for (int i = 0; i < n; ++i) {
            double gi = cum_loss[i] + inv_eta * (1.0 + std::log(p[i])) - inv_nu / p[i];
            p[i] -= alpha * gi;
        }
        detail::project_truncated_simplex(p, n, eps);
    }

    // Pairwise-exchange polish: move mass between coordinate pairs along the
    // feasible direction e_i - e_j with a clamped Newton step until no pair
    // of off-floor coordinates has a gradient gap.
    for (int sweep = 0; sweep < 400; ++sweep) {
        double moved = 0.0;
        for (int i = 0; i < n; ++i)
            g[i] = cum_loss[i] + inv_eta * (1.0 + std::log(p[i])) - inv_nu / p[i];
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double diff = g[i] - g[j];
                double hi = inv_eta / p[i] + inv_nu / (p[i] * p[i]);
                double hj = inv_eta / p[j] + inv_nu / (p[j] * p[j]);
                double delta = -diff / (hi + hj);
                delta = std::clamp(delta, -(p[i] - eps), p[j] - eps);
                if (delta == 0.0) continue;
                p[i] += delta;
                p[j] -= delta;
                moved = std::max(moved, std::abs(delta));
                g[i] = cum_loss[i] + inv_eta * (1.0 + std::log(p[i])) - inv_nu / p[i];
                g[j] = cum_loss[j] + inv_eta * (1.0 + std::log(p[j])) - inv_nu / p[j];
            }
        }
        if (moved < 1e-17) break;
    }
    return SimplexPoint(std::vector<double>(p, p + n));
}

// Max stationarity violation of a feasible point: off-floor coordinates must
// share one multiplier, floored coordinates may have nonnegative reduced
// gradient. The multiplier is estimated from the off-floor coordinates.
inline double kkt_residual(const SimplexPoint& p, const std::vector<double>& cum_loss,
                           double eta, double nu, double epsilon) {
    const std::size_t n = p.size();
    if (n == 0 || cum_loss.size() != n)
        throw InputError("kkt_residual: dimension mismatch");
    if (!p.is_valid(epsilon, 1e-9))
        throw InputError("kkt_residual: point is infeasible for the truncated simplex");

    const double inv_eta = 1.0 / eta;
    const double inv_nu = 1.0 / nu;
    const double floor_cut = epsilon * (1.0 + 1e-9) + 1e-15;

    std::vector<double> g(n);
    double mean_free = 0.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = cum_loss[i] + inv_eta * (1.0 + std::log(p[i])) - inv_nu / p[i];
        if (p[i] > floor_cut) {
            mean_free += g[i];
            ++free_count;
        }
    }
    double lambda_hat;
    if (free_count > 0) {
        lambda_hat = -mean_free / static_cast<double>(free_count);
    } else {
        lambda_hat = -g[0];
        for (std::size_t i = 1; i < n; ++i) lambda_hat = std::max(lambda_hat, -g[i]);
    }
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = g[i] + lambda_hat;
        if (p[i] > floor_cut) resid = std::max(resid, std::abs(r));
        else resid = std::max(resid, std::max(0.0, -r));
    }
    return resid;
}

} // namespace banditlab
