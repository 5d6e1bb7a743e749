#pragma once

// Finite interior spectral data: eigenvalues plus eigenfunction restrictions
// to a polar normal-coordinate grid on the data ball B(p, r0), together with
// metric samples on the same grid.  The polar grid makes chart rotations by
// angular-step multiples exact resamplings, which the perturbation generator
// and checker both exploit.

#include "specrec/common.hpp"
#include "specrec/geometry.hpp"
#include "specrec/spectrum.hpp"

#include <array>
#include <vector>

namespace specrec {

struct BallGrid {
    double radius = 0.0;
    int n_r = 0, n_theta = 0;

    int size() const { return n_r * n_theta; }
    double dr() const { return radius / n_r; }
    double dtheta() const { return 2.0 * kPi / n_theta; }
    double r_of(int i) const { return (i + 0.5) * dr(); }
    double theta_of(int j) const { return (j + 0.5) * dtheta(); }
    int index(int i, int j) const { return i * n_theta + j; }
    int ring(int idx) const { return idx / n_theta; }
    int spoke(int idx) const { return idx % n_theta; }

    std::array<double, 2> chart(int idx) const {
        double r = r_of(ring(idx)), t = theta_of(spoke(idx));
        return {r * std::cos(t), r * std::sin(t)};
    }

    /// Flat chart measure of the node's cell (metric factor applied on top).
    double base_weight(int idx) const { return r_of(ring(idx)) * dr() * dtheta(); }

    /// Euclidean chart distance between node idx and chart point (x1, x2).
    double chart_distance(int idx, double x1, double x2) const {
        auto c = chart(idx);
        return std::hypot(c[0] - x1, c[1] - x2);
    }

    bool operator==(const BallGrid& o) const {
        return radius == o.radius && n_r == o.n_r && n_theta == o.n_theta;
    }
};

struct InteriorSpectralData {
    Point center;  // chart origin p (oracle bookkeeping; serialization optional)
    double ball_radius = 0.0;
    BallGrid grid;
    std::vector<std::array<double, 4>> metric;  // 2x2 SPD per node (h11 h12 h21 h22)
    std::vector<double> mu;                     // J+1 eigenvalues, mu_0 = 0
    std::vector<std::vector<double>> psi;       // psi[j][node]
    std::vector<Point> manifold_points;         // oracle-only node positions

    int J() const { return int(mu.size()) - 1; }

    double sqrt_det_metric(int idx) const {
        const auto& h = metric[idx];
        double det = h[0] * h[3] - h[1] * h[2];
        require(det > 0, "FISD: metric sample not positive definite");
        return std::sqrt(det);
    }

    /// Metric-weighted quadrature weight of a node.
    double weight(int idx) const { return grid.base_weight(idx) * sqrt_det_metric(idx); }

    double ball_inner(const std::vector<double>& f, const std::vector<double>& g) const {
        double s = 0;
        for (int q = 0; q < grid.size(); ++q) s += weight(q) * f[q] * g[q];
        return s;
    }

    double ball_norm(const std::vector<double>& f) const {
        return std::sqrt(std::max(0.0, ball_inner(f, f)));
    }

    void validate() const {
        require(int(metric.size()) == grid.size(), "FISD: metric sample count");
        require(!mu.empty(), "FISD: empty eigenvalue list");
        require(std::fabs(mu[0]) < 1e-8, "FISD: mu_0 must be 0");
        for (size_t j = 1; j < mu.size(); ++j)
            require(mu[j] >= mu[j - 1] - 1e-12, "FISD: eigenvalues not monotone");
        require(psi.size() == mu.size(), "FISD: psi/mu size mismatch");
        for (const auto& v : psi)
            require(int(v.size()) == grid.size(), "FISD: psi grid mismatch");
        for (int q = 0; q < grid.size(); ++q) {
            const auto& h = metric[q];
            require(std::fabs(h[1] - h[2]) < 1e-10, "FISD: metric not symmetric");
            require(h[0] > 0 && h[0] * h[3] - h[1] * h[2] > 0, "FISD: metric not SPD");
        }
    }
};

/// Largest J whose top wavenumber is still resolved by the grid (quarter
/// wavelength per node spacing).
inline int max_safe_J(const ModelManifold& m, const BallGrid& g, int hard_cap = 1 << 20) {
    double h_max = std::max(g.dr(), g.radius * g.dtheta());
    double k_max = kPi / (2.0 * h_max);
    double lam_cap = k_max * k_max;
    // count modes with lambda <= lam_cap by probing the spectrum
    int lo = 0, hi = 1;
    while (hi < hard_cap) {
        Eigenbasis b = eigenpairs(m, hi);
        if (b.lambda(hi) > lam_cap) break;
        hi *= 2;
    }
    Eigenbasis b = eigenpairs(m, std::min(hi, hard_cap));
    int J = 0;
    for (int j = 0; j < b.count(); ++j)
        if (b.lambda(j) <= lam_cap) J = j;
    return J;
}

/// Exact FISD of a model manifold: eigenvalues and eigenfunction samples on
/// the ball grid, with the normal-coordinate metric.
inline InteriorSpectralData extract_fisd(const ModelManifold& m, const GeometryBounds& bounds,
                                         int J, int n_r, int n_theta) {
    bounds.validate();
    require(J >= 0, "extract_fisd: J >= 0");
    require(n_r >= 4 && n_theta >= 8, "extract_fisd: grid too small");
    InteriorSpectralData d;
    d.center = m.base;
    d.ball_radius = bounds.r0;
    d.grid = BallGrid{bounds.r0, n_r, n_theta};

    Eigenbasis basis = eigenpairs(m, J);
    {
        double h_max = std::max(d.grid.dr(), d.grid.radius * d.grid.dtheta());
        double k_top = std::sqrt(basis.lambda(J));
        if (k_top * h_max > kPi / 2.0) {
            int safe = max_safe_J(m, d.grid);
            throw Error("extract_fisd: grid too coarse for J=" + std::to_string(J) +
                        " (Nyquist); max safe J = " + std::to_string(safe));
        }
    }

    int N = d.grid.size();
    d.metric.resize(N);
    d.manifold_points.resize(N);
    for (int q = 0; q < N; ++q) {
        auto x = d.grid.chart(q);
        d.metric[q] = m.normal_metric(x[0], x[1]);
        d.manifold_points[q] =
            m.exp_at(m.base, d.grid.r_of(d.grid.ring(q)), d.grid.theta_of(d.grid.spoke(q)));
    }
    d.mu = basis.lambdas();
    d.psi.assign(J + 1, std::vector<double>(N));
    for (int q = 0; q < N; ++q) {
        std::vector<double> vals = basis.eval_all(d.manifold_points[q]);
        for (int j = 0; j <= J; ++j) d.psi[j][q] = vals[j];
    }
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Eigenvalue clusters
// ---------------------------------------------------------------------------

struct ClusterPartition {
    double delta = 0.0;
    std::vector<std::pair<double, double>> intervals;  // (a_p, b_p), width < delta
    std::vector<std::vector<int>> index_sets;          // J_p per interval
    std::vector<int> boundary_band;  // indices within delta of 1/delta (inclusion logged)

    int cluster_of(int j) const {
        for (size_t p = 0; p < index_sets.size(); ++p)
            for (int i : index_sets[p])
                if (i == j) return int(p);
        return -1;
    }

    int covered_count() const {
        int n = 0;
        for (const auto& s : index_sets) n += int(s.size());
        return n;
    }
};

/// Greedy left-to-right clustering: a new interval starts when the gap to the
/// previous eigenvalue is >= delta.  Fails if a gap-connected run is wider
/// than delta (no valid interval of width < delta could contain it).
inline ClusterPartition build_clusters(const std::vector<double>& mu, double delta,
                                       double weyl_C7 = 1.0) {
    require(delta > 0 && delta < 1.0, "build_clusters: delta in (0,1)");
    require(delta < 1.0 / (3.0 * weyl_C7), "build_clusters: delta must be < 1/(3 C7)");
    require(!mu.empty() && std::fabs(mu[0]) < 1e-8, "build_clusters: mu_0 = 0 expected");
    ClusterPartition cp;
    cp.delta = delta;
    double limit = 1.0 / delta;

    // indices to cover: mu_j < 1/delta, plus the ambiguous band up to 1/delta+delta
    std::vector<int> idx;
    for (size_t j = 0; j < mu.size(); ++j) {
        if (mu[j] < limit) {
            idx.push_back(int(j));
            if (mu[j] > limit - delta) cp.boundary_band.push_back(int(j));
        } else if (mu[j] <= limit + delta && mu[j] - limit < delta) {
            idx.push_back(int(j));  // boundary inclusion choice, recorded
            cp.boundary_band.push_back(int(j));
        }
    }

    std::vector<int> run;
    auto flush = [&](double next_gap_start) {
        if (run.empty()) return;
        double lo = mu[run.front()], hi = mu[run.back()];
        if (hi - lo >= delta)
            throw Error("build_clusters: run [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] has width >= delta; no valid interval placement");
        double margin = 0.45 * (delta - (hi - lo));
        if (!cp.intervals.empty())
            margin = std::min(margin, 0.45 * (lo - cp.intervals.back().second));
        margin = std::min(margin, 0.45 * std::max(next_gap_start - hi, 0.0) + 1e-300);
        cp.intervals.push_back({lo - margin, hi + margin});
        cp.index_sets.push_back(run);
        run.clear();
    };
    for (size_t t = 0; t < idx.size(); ++t) {
        if (!run.empty() && mu[idx[t]] - mu[run.back()] >= delta) flush(mu[idx[t]]);
        run.push_back(idx[t]);
    }
    flush(mu[idx.back()] + delta);

    require(cp.index_sets.size() >= 1 && cp.index_sets[0].size() == 1,
            "build_clusters: n_0 must be 1 (zero eigenvalue alone)");
    return cp;
}

/// Within-cluster index ratio bound j < k <= 2^{n/2} C7^n j for every cluster.
inline bool cluster_index_ratio_holds(const ClusterPartition& cp, int n, double C7) {
    double f = std::pow(2.0, n / 2.0) * std::pow(C7, double(n));
    for (size_t p = 1; p < cp.index_sets.size(); ++p) {
        const auto& s = cp.index_sets[p];
        if (s.empty()) continue;
        int j = s.front(), k = s.back();
        if (j >= 1 && double(k) > f * double(j)) return false;
    }
    return true;
}

}  // namespace specrec
