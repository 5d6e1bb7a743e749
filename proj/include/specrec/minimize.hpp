#pragma once

// The constrained eps1-minimization producing Fourier coefficients of
// approximate cut-off functions: per-cylinder observation quadratic forms
// assembled from FISD, cyclic Dykstra projections onto the Sobolev ball, the
// l2 ball and the observation caps, and the slicing front-ends for exact and
// perturbed data.

#include "specrec/common.hpp"
#include "specrec/fisd.hpp"
#include "specrec/quadrature.hpp"
#include "specrec/wave.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace specrec {

/// Quantized radius vector: alpha_l = A_l * gamma on the member set K_i.
struct SliceIndexAlpha {
    std::vector<int> members;  // net indices forming K_i
    std::vector<int> steps;    // A_l (positive integers)
    double gamma = 0.0;

    size_t count() const { return members.size(); }
    double alpha(size_t t) const { return steps[t] * gamma; }

    void validate(double r0, double D) const {
        require(!members.empty(), "alpha: empty member set");
        require(members.size() == steps.size(), "alpha: member/step mismatch");
        for (size_t t = 0; t < steps.size(); ++t) {
            require(steps[t] > 0, "alpha: A_l must be a positive integer");
            double a = alpha(t);
            require(a >= r0 / 8.0 - 1e-12 && a <= 2.0 * D + 1e-12,
                    "alpha: radius outside [r0/8, 2D]");
        }
    }

    std::vector<int> key() const {
        std::vector<int> k;
        for (size_t t = 0; t < members.size(); ++t) {
            k.push_back(members[t]);
            k.push_back(steps[t]);
        }
        return k;
    }
};

// ---------------------------------------------------------------------------
// Observation operator: quadratic form b^T M b = ||w||^2_{L2(cylinder)}
// ---------------------------------------------------------------------------

struct ObservationOperator {
    Eigen::MatrixXd M;   // (j1+1)^2, PSD; M = time-Gram Hadamard space-Gram
    Eigen::MatrixXd U;   // eigenvectors
    Eigen::VectorXd ev;  // eigenvalues (clamped >= 0)
    double cap = 0.0;    // eps*

    double quad_norm(const Eigen::VectorXd& b) const {
        return std::sqrt(std::max(0.0, double(b.dot(M * b))));
    }
};

/// Separable assembly: M_jk = (sum_t w_t cos cos) * (sum_x w_x psi psi).
inline ObservationOperator assemble_observation_operator(const InteriorSpectralData& fisd,
                                                         const ObservationCylinder& cyl,
                                                         int j1,
                                                         double step_factor = 0.25) {
    require(j1 <= fisd.J(), "observation operator: j1 beyond FISD");
    cyl.require_inside_ball(fisd.ball_radius);
    std::vector<int> nodes = cylinder_nodes(fisd, cyl);
    require(!nodes.empty(), "observation operator: empty cylinder grid");
    std::vector<double> t, wt;
    cyl.time_rule(t, wt, step_factor);
    int n = j1 + 1;

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (int q : nodes) {
        double w = fisd.weight(q);
        for (int j = 0; j < n; ++j) {
            double pj = fisd.psi[j][q];
            if (pj == 0.0) continue;
            for (int k = j; k < n; ++k) S(j, k) += w * pj * fisd.psi[k][q];
        }
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> om(n);
    for (int j = 0; j < n; ++j) om[j] = std::sqrt(std::max(0.0, fisd.mu[j]));
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            double acc = 0;
            for (size_t i = 0; i < t.size(); ++i)
                acc += wt[i] * std::cos(om[j] * t[i]) * std::cos(om[k] * t[i]);
            T(j, k) = acc;
        }
    ObservationOperator op;
    op.M = Eigen::MatrixXd(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            op.M(j, k) = S(j, k) * T(j, k);
            op.M(k, j) = op.M(j, k);
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.M);
    require(es.info() == Eigen::Success, "observation operator: eigensolve failed");
    op.U = es.eigenvectors();
    op.ev = es.eigenvalues().cwiseMax(0.0);
    return op;
}

/// Explicit rows sqrt(w_x w_t) cos(sqrt(mu_j) t) psi_j(x); small cases and
/// consistency tests only (the separable path must reproduce G^T G).
inline Eigen::MatrixXd assemble_observation_rows(const InteriorSpectralData& fisd,
                                                 const ObservationCylinder& cyl, int j1,
                                                 double step_factor = 0.25) {
    cyl.require_inside_ball(fisd.ball_radius);
    std::vector<int> nodes = cylinder_nodes(fisd, cyl);
    require(!nodes.empty(), "observation rows: empty cylinder grid");
    std::vector<double> t, wt;
    cyl.time_rule(t, wt, step_factor);
    int n = j1 + 1;
    Eigen::MatrixXd G(nodes.size() * t.size(), n);
    size_t r = 0;
    for (size_t i = 0; i < t.size(); ++i)
        for (int q : nodes) {
            double sw = std::sqrt(wt[i] * fisd.weight(q));
            for (int j = 0; j < n; ++j)
                G(r, j) = sw * std::cos(std::sqrt(std::max(0.0, fisd.mu[j])) * t[i]) *
                          fisd.psi[j][q];
            ++r;
        }
    return G;
}

// ---------------------------------------------------------------------------
// Convex projections and the Dykstra cycle
// ---------------------------------------------------------------------------

namespace detail {

/// Euclidean projection onto {c : sum_j w_j c_j^2 <= r^2} (diagonal weights,
/// w_j >= 0): c_j = b_j / (1 + nu w_j) with nu from a safeguarded Newton
/// solve of the secular equation.
inline void project_diag_ellipsoid(Eigen::VectorXd& b, const Eigen::VectorXd& w, double r) {
    double g = 0;
    for (int j = 0; j < b.size(); ++j) g += w[j] * b[j] * b[j];
    if (g <= r * r) return;
    auto phi = [&](double nu) {
        double s = 0;
        for (int j = 0; j < b.size(); ++j) {
            double d = 1.0 + nu * w[j];
            s += w[j] * b[j] * b[j] / (d * d);
        }
        return s - r * r;
    };
    double lo = 0.0, hi = 1.0;
    while (phi(hi) > 0) {
        lo = hi;
        hi *= 4.0;
        require(hi < 1e50, "ellipsoid projection: secular bracket blew up");
    }
    double nu = hi / 2;
    for (int it = 0; it < 200; ++it) {
        double f = phi(nu);
        if (std::fabs(f) <= 1e-14 * r * r) break;
        if (f > 0) lo = nu; else hi = nu;
        double df = 0;
        for (int j = 0; j < b.size(); ++j) {
            double d = 1.0 + nu * w[j];
            df += -2.0 * w[j] * w[j] * b[j] * b[j] / (d * d * d);
        }
        double step = (df != 0.0) ? nu - f / df : 0.5 * (lo + hi);
        nu = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
    }
    for (int j = 0; j < b.size(); ++j) b[j] /= (1.0 + nu * w[j]);
}

}  // namespace detail

struct MinimizerResult {
    CoefficientVector b;
    double objective = 0.0;           // ||b - a||^2
    std::vector<double> margins;      // constraint value minus bound, per set
    int iterations = 0;
    bool converged = false;
};

/// The closed convex feasible class: Sobolev ball, l2 ball, per-cylinder
/// observation caps.  0 is always feasible.
struct ConstraintSet {
    double s = 1.75;
    std::vector<double> lambda;  // eigenvalues, for Sobolev weights
    double a1 = 0.0;             // Sobolev radius
    double a2 = 0.0;             // l2 radius
    std::vector<ObservationOperator> cylinders;
};

/// Cyclic Dykstra projections from the zero-correction start at `a`;
/// deterministic, stops when the cycle movement and all margins are below
/// tolerance.
inline MinimizerResult solve_min(const CoefficientVector& a, const ConstraintSet& C,
                                 double tol = 1e-9, int max_iter = 50000) {
    a.validate();
    require(a.size() == int(C.lambda.size()), "solve_min: size mismatch");
    require(C.a1 > 0 && C.a2 > 0, "solve_min: positive radii required");
    const int n = a.size();
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) x[j] = a.b[j];
    const Eigen::VectorXd a0 = x;

    Eigen::VectorXd sob_w(n);
    for (int j = 0; j < n; ++j) sob_w[j] = sobolev_weight(C.lambda[j], C.s);

    const int K = 2 + int(C.cylinders.size());
    std::vector<Eigen::VectorXd> incr(K, Eigen::VectorXd::Zero(n));

    auto project_set = [&](int i, Eigen::VectorXd& v) {
        if (i == 0) {
            detail::project_diag_ellipsoid(v, sob_w, C.a1);
        } else if (i == 1) {
            double nn = v.norm();
            if (nn > C.a2) v *= C.a2 / nn;
        } else {
            const ObservationOperator& op = C.cylinders[i - 2];
            Eigen::VectorXd y = op.U.transpose() * v;
            detail::project_diag_ellipsoid(y, op.ev, op.cap);
            v = op.U * y;
        }
    };
    auto margin_of = [&](int i, const Eigen::VectorXd& v) {
        if (i == 0) {
            double g = 0;
            for (int j = 0; j < n; ++j) g += sob_w[j] * v[j] * v[j];
            return std::sqrt(g) - C.a1;
        }
        if (i == 1) return v.norm() - C.a2;
        const ObservationOperator& op = C.cylinders[i - 2];
        return op.quad_norm(v) - op.cap;
    };

    MinimizerResult res;
    double scale = std::max(1.0, a0.norm());
    int it = 0;
    for (; it < max_iter; ++it) {
        Eigen::VectorXd x_prev = x;
        for (int i = 0; i < K; ++i) {
            Eigen::VectorXd v = x + incr[i];
            Eigen::VectorXd before = v;
            project_set(i, v);
            incr[i] = before - v;
            x = v;
        }
        double move = (x - x_prev).norm();
        if (move < tol * scale) {
            bool feas = true;
            for (int i = 0; i < K; ++i)
                if (margin_of(i, x) > 10.0 * tol * scale) feas = false;
            if (feas) {
                res.converged = true;
                ++it;
                break;
            }
        }
    }
    res.iterations = it;
    res.b.b.assign(x.data(), x.data() + n);
    res.b.lambda = C.lambda;
    res.b.s = C.s;
    res.objective = (x - a0).squaredNorm();
    res.margins.resize(K);
    for (int i = 0; i < K; ++i) res.margins[i] = margin_of(i, x);
    return res;
}

// ---------------------------------------------------------------------------
// Slicing front-end
// ---------------------------------------------------------------------------

struct SliceParams {
    double s = 1.75;
    double Lambda_s = 1.0;
    int m = 1;  // feasible-class scale: exact data m=1, perturbed m=2
    double gamma = 0.05;
    double eps_star = 0.0;  // per-cylinder cap; must be set (tuned or chained)
    double c3_s = 1.0;      // Sobolev cut-off growth constant
    double a1_override = 0.0, a2_override = 0.0;
    double time_step_factor = 0.25;
    double tol = 1e-9;
    int max_iter = 50000;
    bool practical_override = true;  // recorded in outputs

    double a1() const {
        if (a1_override > 0) return a1_override;
        return c3_s * std::pow(gamma, -s) * Lambda_s / double(m);
    }
    double a2() const { return a2_override > 0 ? a2_override : Lambda_s; }

    void validate() const {
        require(m == 1 || m == 2 || m == 4, "slice: m in {1,2,4}");
        require(eps_star > 0, "slice: eps_star must be positive");
        require(gamma > 0, "slice: gamma > 0");
    }
};

struct SliceResult {
    CoefficientVector d;  // a - b: coefficients of the cut-off approximation
    MinimizerResult min;
    double eps_star_used = 0.0;
    bool practical_override = true;
};

inline std::vector<ObservationCylinder> cylinders_of(const InteriorSpectralData& fisd,
                                                     const std::vector<ChartPoint>& net,
                                                     const SliceIndexAlpha& alpha) {
    std::vector<ObservationCylinder> cyls;
    for (size_t t = 0; t < alpha.count(); ++t) {
        require(alpha.members[t] >= 0 && alpha.members[t] < int(net.size()),
                "cylinders_of: member outside net");
        cyls.push_back(ObservationCylinder::at(net[alpha.members[t]], alpha.alpha(t),
                                               alpha.gamma, fisd.ball_radius));
    }
    return cyls;
}

/// Operator cache shared across slicing calls: keyed by (member, steps) so
/// that inclusion-exclusion reuses cylinder factorizations.
class ObservationCache {
public:
    ObservationCache(const InteriorSpectralData& fisd, std::vector<ChartPoint> net, int j1,
                     double gamma, double step_factor = 0.25)
        : fisd_(&fisd), net_(std::move(net)), j1_(j1), gamma_(gamma), step_(step_factor) {}

    const ObservationOperator& get(int member, int steps) {
        auto key = std::make_pair(member, steps);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        ObservationCylinder cyl = ObservationCylinder::at(net_[member], steps * gamma_,
                                                          gamma_, fisd_->ball_radius);
        auto [jt, _] = cache_.emplace(key, assemble_observation_operator(*fisd_, cyl, j1_, step_));
        return jt->second;
    }

    const std::vector<ChartPoint>& net() const { return net_; }
    double gamma() const { return gamma_; }
    int j1() const { return j1_; }
    const InteriorSpectralData& fisd() const { return *fisd_; }

private:
    const InteriorSpectralData* fisd_;
    std::vector<ChartPoint> net_;
    int j1_;
    double gamma_, step_;
    std::map<std::pair<int, int>, ObservationOperator> cache_;
};

/// Determine d with F*(d) close to the cut-off of F*(a) on the domain of
/// influence M(alpha, -2 gamma): d = a - b, b the constrained minimizer.
/// Runs identically on exact and on perturbed data (the caller supplies the
/// corresponding FISD and class scale m).
inline SliceResult slice_coefficients(ObservationCache& cache, const CoefficientVector& a,
                                      const SliceIndexAlpha& alpha, const SliceParams& params) {
    params.validate();
    const InteriorSpectralData& fisd = cache.fisd();
    require(a.size() == cache.j1() + 1, "slice: coefficient length != j1+1");

    ConstraintSet C;
    C.s = params.s;
    C.lambda.assign(fisd.mu.begin(), fisd.mu.begin() + cache.j1() + 1);
    C.a1 = params.a1();
    C.a2 = params.a2();
    for (size_t t = 0; t < alpha.count(); ++t) {
        ObservationOperator op = cache.get(alpha.members[t], alpha.steps[t]);
        op.cap = params.eps_star;
        C.cylinders.push_back(std::move(op));
    }

    SliceResult out;
    out.min = solve_min(a, C, params.tol, params.max_iter);
    out.eps_star_used = params.eps_star;
    out.practical_override = params.practical_override;
    out.d = a;
    for (int j = 0; j < a.size(); ++j) out.d.b[j] = a.b[j] - out.min.b.b[j];
    return out;
}

/// Validate the slicing preconditions against an evaluated parameter chain;
/// throws naming the violated inequality.  Used when practical overrides are
/// switched off.
template <class ChainOutputT>
inline void validate_against_chain(const SliceParams& p, const ChainOutputT& chain, int j1) {
    double lg = std::log(p.gamma);
    double lg_chain = chain.gamma.signed_log_double();
    if (lg > lg_chain)
        throw Error("slice: gamma exceeds the chain's gamma (pre 2 new condition violated)");
    double lj0 = chain.j0.signed_log_double();
    if (std::log(double(j1)) < lj0)
        throw Error("slice: j1 below the chain's j0 (truncation precondition violated)");
    double le2 = chain.eps2.signed_log_double();
    if (std::log(p.eps_star) > le2 - std::log(2.0))
        throw Error("slice: eps_star above eps2/2 (observation cap violated)");
}

// ---------------------------------------------------------------------------
// Oracle projection (tests only): coefficients of P_j1 (chi_{M(alpha, b g)} u)
// ---------------------------------------------------------------------------

inline std::vector<double> oracle_projection(const ModelManifold& m, const Eigenbasis& basis,
                                             const QuadratureGrid& grid,
                                             const CoefficientVector& u,
                                             const std::vector<Point>& centers,
                                             const std::vector<double>& radii, double offset,
                                             int j_out) {
    require(j_out < basis.count(), "oracle_projection: j_out beyond basis");
    std::vector<double> coeffs(j_out + 1, 0.0);
    for (const auto& node : grid.nodes) {
        if (!in_union_of_balls(m, node.pt, centers, radii, offset)) continue;
        double uval = 0;
        for (int j = 0; j < u.size(); ++j)
            if (u.b[j] != 0.0) uval += u.b[j] * basis.eval(j, node.pt);
        if (uval == 0.0) continue;
        for (int j = 0; j <= j_out; ++j)
            coeffs[j] += node.w * uval * basis.eval(j, node.pt);
    }
    return coeffs;
}

/// L2(M) norm of chi_{M(alpha, offset)} F*(u) by oracle quadrature.
inline double oracle_cutoff_norm(const ModelManifold& m, const Eigenbasis& basis,
                                 const QuadratureGrid& grid, const CoefficientVector& u,
                                 const std::vector<Point>& centers,
                                 const std::vector<double>& radii, double offset) {
    double acc = 0;
    for (const auto& node : grid.nodes) {
        if (!in_union_of_balls(m, node.pt, centers, radii, offset)) continue;
        double uval = 0;
        for (int j = 0; j < u.size(); ++j)
            if (u.b[j] != 0.0) uval += u.b[j] * basis.eval(j, node.pt);
        acc += node.w * uval * uval;
    }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// eps* sweeps: J_min(eps*) plateau detection and one-point calibration
// ---------------------------------------------------------------------------

struct EpsStarSweep {
    std::vector<double> eps_star;
    std::vector<double> j_min;
    int plateau = -1;  // index with the flattest local log-log slope
};

inline EpsStarSweep sweep_eps_star(ObservationCache& cache, const CoefficientVector& a,
                                   const SliceIndexAlpha& alpha, SliceParams params,
                                   const std::vector<double>& eps_values) {
    EpsStarSweep sw;
    for (double e : eps_values) {
        params.eps_star = e;
        SliceResult r = slice_coefficients(cache, a, alpha, params);
        sw.eps_star.push_back(e);
        sw.j_min.push_back(r.min.objective);
    }
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i + 1 < sw.eps_star.size(); ++i) {
        if (sw.j_min[i] <= 0 || sw.j_min[i - 1] <= 0 || sw.j_min[i + 1] <= 0) continue;
        double slope = std::fabs(std::log(sw.j_min[i + 1]) - std::log(sw.j_min[i - 1])) /
                       std::fabs(std::log(sw.eps_star[i + 1]) - std::log(sw.eps_star[i - 1]));
        if (slope < best) {
            best = slope;
            sw.plateau = int(i);
        }
    }
    return sw;
}

}  // namespace specrec
