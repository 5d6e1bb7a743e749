#pragma once

// Spectral wave synthesis w(x,t) = sum_j b_j cos(sqrt(lambda_j) t) phi_j(x),
// observation-cylinder L2 norms computable from FISD alone, Sobolev norms of
// coefficient vectors, and the smooth cut-off recipe used by test oracles.

#include "specrec/common.hpp"
#include "specrec/fisd.hpp"
#include "specrec/quadrature.hpp"
#include "specrec/spectrum.hpp"

#include <vector>

namespace specrec {

/// A point of the data-ball chart (normal coordinates at p).
struct ChartPoint {
    double x1 = 0.0, x2 = 0.0;

    double norm() const { return std::hypot(x1, x2); }
    static ChartPoint polar(double r, double theta) {
        return {r * std::cos(theta), r * std::sin(theta)};
    }
};

inline double chart_dist(const ChartPoint& a, const ChartPoint& b) {
    return std::hypot(a.x1 - b.x1, a.x2 - b.x2);
}

struct CoefficientVector {
    std::vector<double> b;       // entries b_j, j = 0..j1
    std::vector<double> lambda;  // associated eigenvalues
    double s = 1.75;             // Sobolev exponent in (3/2, 2)

    int size() const { return int(b.size()); }

    void validate() const {
        require(b.size() == lambda.size(), "coefficients: b/lambda size mismatch");
        require(s > 1.5 && s < 2.0, "coefficients: s in (3/2,2)");
        for (double x : b) require(std::isfinite(x), "coefficients: non-finite entry");
    }

    double l2_norm() const { return norm2(b); }

    double sobolev_norm() const {
        double acc = 0;
        for (size_t j = 0; j < b.size(); ++j) acc += sobolev_weight(lambda[j], s) * b[j] * b[j];
        return std::sqrt(acc);
    }

    static CoefficientVector unit(int j, const std::vector<double>& lambdas, double s = 1.75) {
        CoefficientVector c;
        c.b.assign(lambdas.size(), 0.0);
        require(j >= 0 && j < int(lambdas.size()), "unit coeff index");
        c.b[j] = 1.0;
        c.lambda = lambdas;
        c.s = s;
        return c;
    }
};

/// Space-time observation set: B(z, r0/16 + gamma) x (-T + r0/16, T - r0/16)
/// in the data-ball chart.
struct ObservationCylinder {
    ChartPoint center;
    double spatial_radius = 0.0;  // r0/16 + gamma
    double time_halfwidth = 0.0;  // T - r0/16
    double T = 0.0;               // = alpha_ell
    double gamma = 0.0;

    /// Practical overrides may exceed the strict gamma <= r0/32 band (no
    /// r0 < 1 admits gamma = 0.05 under it); the hard geometric cap is r0/8.
    static ObservationCylinder at(const ChartPoint& z, double T, double gamma, double r0,
                                  bool strict_gamma_band = false) {
        require(gamma > 0.0 && gamma <= r0 / 8.0, "cylinder: 0 < gamma <= r0/8");
        if (strict_gamma_band)
            require(gamma <= r0 / 32.0, "cylinder: strict band 0 < gamma <= r0/32");
        require(T >= r0 / 8.0, "cylinder: T >= r0/8");
        ObservationCylinder c;
        c.center = z;
        c.spatial_radius = r0 / 16.0 + gamma;
        c.time_halfwidth = T - r0 / 16.0;
        c.T = T;
        c.gamma = gamma;
        return c;
    }

    void require_inside_ball(double r0) const {
        require(center.norm() + spatial_radius < r0,
                "cylinder escapes the data ball; eigenfunction values unavailable");
    }

    /// Trapezoid time nodes/weights, step <= gamma * step_factor.
    void time_rule(std::vector<double>& t, std::vector<double>& w,
                   double step_factor = 0.25) const {
        double H = time_halfwidth;
        int n = std::max(2, int(std::ceil(2.0 * H / (gamma * step_factor))) + 1);
        t.resize(n);
        w.resize(n);
        double h = 2.0 * H / (n - 1);
        for (int i = 0; i < n; ++i) {
            t[i] = -H + i * h;
            w[i] = (i == 0 || i == n - 1) ? h / 2.0 : h;
        }
    }
};

/// Field values w(x_q, t_k) for points given as raw eigenfunction value rows.
/// `psi_rows[j]` are phi_j values at the evaluation points.
inline std::vector<std::vector<double>> synthesize_field(
    const CoefficientVector& c, const std::vector<const double*>& psi_rows, int n_pts,
    const std::vector<double>& times) {
    c.validate();
    std::vector<std::vector<double>> w(n_pts, std::vector<double>(times.size(), 0.0));
    for (size_t k = 0; k < times.size(); ++k) {
        for (int j = 0; j < c.size(); ++j) {
            if (c.b[j] == 0.0) continue;
            double amp = c.b[j] * std::cos(std::sqrt(std::max(0.0, c.lambda[j])) * times[k]);
            const double* row = psi_rows[j];
            for (int q = 0; q < n_pts; ++q) w[q][k] += amp * row[q];
        }
    }
    return w;
}

/// Wave values at manifold points/times through a whole-manifold eigenbasis
/// (oracle-side convenience).
inline std::vector<std::vector<double>> synthesize(const CoefficientVector& c,
                                                   const Eigenbasis& basis,
                                                   const std::vector<Point>& pts,
                                                   const std::vector<double>& times) {
    c.validate();
    require(c.size() <= basis.count(), "synthesize: more coefficients than eigenpairs");
    std::vector<std::vector<double>> w(pts.size(), std::vector<double>(times.size(), 0.0));
    for (size_t q = 0; q < pts.size(); ++q) {
        for (int j = 0; j < c.size(); ++j) {
            if (c.b[j] == 0.0) continue;
            double pj = basis.eval(j, pts[q]);
            double om = std::sqrt(std::max(0.0, c.lambda[j]));
            for (size_t k = 0; k < times.size(); ++k)
                w[q][k] += c.b[j] * pj * std::cos(om * times[k]);
        }
    }
    return w;
}

/// Ball-grid node indices inside the cylinder's spatial disk (chart metric).
inline std::vector<int> cylinder_nodes(const InteriorSpectralData& fisd,
                                       const ObservationCylinder& cyl) {
    std::vector<int> idx;
    for (int q = 0; q < fisd.grid.size(); ++q)
        if (fisd.grid.chart_distance(q, cyl.center.x1, cyl.center.x2) < cyl.spatial_radius)
            idx.push_back(q);
    return idx;
}

/// || w ||_{L2(cylinder)} computed from FISD alone: metric-weighted spatial
/// quadrature masked to the disk, trapezoid in time.
inline double observation_norm(const InteriorSpectralData& fisd, const CoefficientVector& c,
                               const ObservationCylinder& cyl, double step_factor = 0.25) {
    c.validate();
    require(c.size() <= int(fisd.mu.size()), "observation_norm: coefficients exceed FISD");
    cyl.require_inside_ball(fisd.ball_radius);
    std::vector<int> nodes = cylinder_nodes(fisd, cyl);
    require(!nodes.empty(), "observation_norm: empty cylinder grid");
    std::vector<double> t, wt;
    cyl.time_rule(t, wt, step_factor);
    double acc = 0;
    for (size_t k = 0; k < t.size(); ++k) {
        for (int q : nodes) {
            double val = 0;
            for (int j = 0; j < c.size(); ++j) {
                if (c.b[j] == 0.0) continue;
                val += c.b[j] * std::cos(std::sqrt(std::max(0.0, c.lambda[j])) * t[k]) *
                       fisd.psi[j][q];
            }
            acc += wt[k] * fisd.weight(q) * val * val;
        }
    }
    return std::sqrt(std::max(0.0, acc));
}

/// Spectral evaluation of ||w||_{H^s(M x [-T,T])} / ||v||_{H^s(M)} for
/// w = W(v): the space-time norm counts <lambda>^s cos^2 and
/// <lambda>^{s-1} (d/dt cos)^2 contributions with exact time integrals.
/// Contract: ratio <= C20 = 6 sqrt(1 + D^2) whenever T < 2D.
inline double energy_bound_check(const CoefficientVector& c, double T) {
    c.validate();
    require(T > 0, "energy_bound_check: T > 0");
    double num = 0, den = 0;
    for (int j = 0; j < c.size(); ++j) {
        double lam = std::max(0.0, c.lambda[j]);
        double om = std::sqrt(lam);
        double ws = sobolev_weight(lam, c.s);
        double i_cos = (om == 0.0) ? 2.0 * T : T + std::sin(2.0 * om * T) / (2.0 * om);
        double i_sin = (om == 0.0) ? 0.0 : T - std::sin(2.0 * om * T) / (2.0 * om);
        num += c.b[j] * c.b[j] *
               (ws * i_cos + sobolev_weight(lam, c.s - 1.0) * lam * i_sin);
        den += ws * c.b[j] * c.b[j];
    }
    if (den == 0.0) return 0.0;  // zero input convention
    return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Oracle-side smooth cut-offs (test fixtures only)
// ---------------------------------------------------------------------------

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
    auto f = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
    double a = f(t), bb = f(1.0 - t);
    return a / (a + bb);
}

/// The cut-off factor of the u_alpha recipe: vanishes on M(alpha, gamma),
/// equals 1 off M(alpha, 3 gamma), smooth in between.
inline double cutoff_factor(const ModelManifold& m, const Point& x,
                            const std::vector<Point>& centers,
                            const std::vector<double>& radii, double gamma) {
    double margin = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < centers.size(); ++l)
        margin = std::min(margin, m.distance(x, centers[l]) - radii[l]);
    return smooth_step((margin - gamma) / (2.0 * gamma));
}

/// Indicator of the domain of influence M(alpha, b gamma).
inline bool in_union_of_balls(const ModelManifold& m, const Point& x,
                              const std::vector<Point>& centers,
                              const std::vector<double>& radii, double offset) {
    for (size_t l = 0; l < centers.size(); ++l)
        if (m.distance(x, centers[l]) < radii[l] + offset) return true;
    return false;
}

}  // namespace specrec
