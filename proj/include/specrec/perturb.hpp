#pragma once

// delta-perturbations of FISD with replayable certificates, and the checker
// that decides delta-closeness: joint interval partition (clauses i-iii),
// chart-rotation search with Lipschitz band test (iv), and per-cluster
// orthogonal Procrustes alignment of eigenfunction blocks (v).

#include "specrec/common.hpp"
#include "specrec/fisd.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <optional>
#include <vector>

namespace specrec {

struct PerturbationCertificate {
    std::uint64_t seed = 0;
    double delta = 0.0;
    int rotation_steps = 0;                         // O: chart rotation by steps*dtheta
    std::vector<double> eigenvalue_shifts;          // per index
    std::vector<Eigen::MatrixXd> mixers;            // per cluster (A_p, orthogonal)
    std::vector<std::vector<double>> noise_coeffs;  // per index: in-band coefficients
    std::vector<double> metric_log_factors;         // eta per node: h^a = e^eta O_* h
    ClusterPartition clusters;

    void validate() const {
        for (const auto& A : mixers) {
            Eigen::MatrixXd d = A.transpose() * A -
                                Eigen::MatrixXd::Identity(A.rows(), A.cols());
            require(d.norm() < 1e-12, "certificate: mixer not orthogonal");
        }
        for (double s : eigenvalue_shifts)
            require(std::fabs(s) < delta, "certificate: eigenvalue shift exceeds delta");
    }
};

namespace detail {

inline int rotated_node(const BallGrid& g, int idx, int steps) {
    int i = g.ring(idx), j = g.spoke(idx);
    int jj = (j + steps) % g.n_theta;
    if (jj < 0) jj += g.n_theta;
    return g.index(i, jj);
}

inline std::array<double, 4> rotate_metric(const std::array<double, 4>& h, double angle) {
    // R^T h R with R = rotation by angle
    double c = std::cos(angle), s = std::sin(angle);
    double a = h[0], b = h[1], d = h[3];
    double h11 = c * c * a + 2 * s * c * b + s * s * d;
    double h12 = s * c * (d - a) + (c * c - s * s) * b;
    double h22 = s * s * a - 2 * s * c * b + c * c * d;
    return {h11, h12, h12, h22};
}

/// Orthogonal matrix close to identity built from Givens rotations with
/// angles of the given magnitude scale.
inline Eigen::MatrixXd small_random_orthogonal(int n, double angle_scale,
                                               std::mt19937_64& rng) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double ang = uniform(rng, -angle_scale, angle_scale);
            Eigen::MatrixXd G = Eigen::MatrixXd::Identity(n, n);
            G(i, i) = std::cos(ang);
            G(j, j) = std::cos(ang);
            G(i, j) = -std::sin(ang);
            G(j, i) = std::sin(ang);
            A = G * A;
        }
    return A;
}

}  // namespace detail

/// Deterministic replay: apply a resolved certificate to data.
inline InteriorSpectralData apply_certificate(const InteriorSpectralData& in,
                                              const PerturbationCertificate& cert) {
    InteriorSpectralData out;
    out.center = in.center;
    out.ball_radius = in.ball_radius;
    out.grid = in.grid;
    int N = in.grid.size(), J = in.J();
    double angle = cert.rotation_steps * in.grid.dtheta();

    out.metric.resize(N);
    for (int q = 0; q < N; ++q) {
        int src = detail::rotated_node(in.grid, q, cert.rotation_steps);
        auto h = detail::rotate_metric(in.metric[src], angle);
        double f = std::exp(cert.metric_log_factors[q]);
        out.metric[q] = {f * h[0], f * h[1], f * h[2], f * h[3]};
    }

    out.mu.resize(J + 1);
    for (int j = 0; j <= J; ++j) out.mu[j] = in.mu[j] + cert.eigenvalue_shifts[j];

    // psi^a_j = sum_m A_p[j,m] psi_m + noise, all sampled in the rotated chart
    std::vector<int> cluster_of(J + 1, -1), pos_in_cluster(J + 1, 0);
    for (size_t p = 0; p < cert.clusters.index_sets.size(); ++p) {
        const auto& s = cert.clusters.index_sets[p];
        for (size_t t = 0; t < s.size(); ++t) {
            cluster_of[s[t]] = int(p);
            pos_in_cluster[s[t]] = int(t);
        }
    }
    std::vector<std::vector<double>> rotated(J + 1, std::vector<double>(N));
    for (int j = 0; j <= J; ++j)
        for (int q = 0; q < N; ++q)
            rotated[j][q] = in.psi[j][detail::rotated_node(in.grid, q, cert.rotation_steps)];

    out.psi.assign(J + 1, std::vector<double>(N, 0.0));
    for (int j = 0; j <= J; ++j) {
        int p = cluster_of[j];
        if (p < 0) {
            out.psi[j] = rotated[j];
        } else {
            const auto& s = cert.clusters.index_sets[p];
            const Eigen::MatrixXd& A = cert.mixers[p];
            int row = pos_in_cluster[j];
            for (size_t t = 0; t < s.size(); ++t) {
                double a = A(row, int(t));
                if (a == 0.0) continue;
                const auto& src = rotated[s[t]];
                for (int q = 0; q < N; ++q) out.psi[j][q] += a * src[q];
            }
        }
        const auto& c = cert.noise_coeffs[j];
        for (size_t mm = 0; mm < c.size(); ++mm) {
            if (c[mm] == 0.0) continue;
            const auto& src = rotated[mm];
            for (int q = 0; q < N; ++q) out.psi[j][q] += c[mm] * src[q];
        }
    }
    out.manifold_points = in.manifold_points;  // oracle bookkeeping unchanged
    out.validate();
    return out;
}

/// Definition-3 perturbation at level delta with a replayable certificate:
/// chart rotation, within-cluster orthogonal mixing, in-band additive noise,
/// eigenvalue shifts below delta/2 and a Lipschitz metric factor inside the
/// (1+delta) band.  The mixing angle scales with delta so the identity is
/// recovered continuously as delta -> 0.
inline std::pair<InteriorSpectralData, PerturbationCertificate> perturb_delta(
    const InteriorSpectralData& in, double delta, std::uint64_t seed, double weyl_C7 = 1.0) {
    in.validate();
    PerturbationCertificate cert;
    cert.seed = seed;
    cert.delta = delta;
    cert.clusters = build_clusters(in.mu, delta, weyl_C7);
    int J = in.J(), N = in.grid.size();

    {
        auto rng = substream(seed, "perturb-rotation");
        cert.rotation_steps = int(rng() % std::uint64_t(in.grid.n_theta));
    }

    // eigenvalue shifts: per-cluster budget keeps the joint spectrum
    // clusterable at delta; values re-sorted inside the cluster
    cert.eigenvalue_shifts.assign(J + 1, 0.0);
    {
        auto rng = substream(seed, "perturb-shifts");
        for (size_t p = 0; p < cert.clusters.index_sets.size(); ++p) {
            const auto& s = cert.clusters.index_sets[p];
            double width = in.mu[s.back()] - in.mu[s.front()];
            double budget = 0.45 * std::max(delta - width, 0.0);
            if (p == 0) budget = std::min(budget, 0.45 * delta);  // keep mu_0 near 0? no: mu_0^a may shift
            std::vector<double> shifted(s.size());
            for (size_t t = 0; t < s.size(); ++t)
                shifted[t] = in.mu[s[t]] + uniform(rng, -budget, budget);
            std::sort(shifted.begin(), shifted.end());
            for (size_t t = 0; t < s.size(); ++t)
                cert.eigenvalue_shifts[s[t]] = shifted[t] - in.mu[s[t]];
        }
        // mu_0^a must remain 0 for a valid FISD (phi_0 constant, lambda_0 = 0)
        cert.eigenvalue_shifts[0] = 0.0;
        // unclustered tail: small shifts, monotone repaired
        double prev = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= J; ++j) {
            if (cert.clusters.cluster_of(j) < 0)
                cert.eigenvalue_shifts[j] = uniform(rng, -0.45 * delta, 0.45 * delta);
            double v = in.mu[j] + cert.eigenvalue_shifts[j];
            if (v < prev) cert.eigenvalue_shifts[j] = prev - in.mu[j];
            prev = in.mu[j] + cert.eigenvalue_shifts[j];
        }
    }

    // orthogonal mixers, angle scale saturating at pi for moderate delta
    {
        auto rng = substream(seed, "perturb-mixers");
        double angle_scale = kPi * std::min(1.0, 100.0 * delta);
        for (const auto& s : cert.clusters.index_sets) {
            int np = int(s.size());
            if (np == 1)
                cert.mixers.push_back(Eigen::MatrixXd::Identity(1, 1));
            else
                cert.mixers.push_back(detail::small_random_orthogonal(np, angle_scale, rng));
        }
    }

    // additive noise in the span of the data's own eigenfunctions: exact
    // L2(M) norms by orthonormality
    cert.noise_coeffs.assign(J + 1, {});
    {
        auto rng = substream(seed, "perturb-noise");
        for (size_t p = 0; p < cert.clusters.index_sets.size(); ++p) {
            const auto& s = cert.clusters.index_sets[p];
            double per_j = 0.40 * delta / std::sqrt(double(s.size()));
            for (int j : s) {
                if (j == 0) continue;  // keep psi_0 the exact constant family
                std::vector<double> c(J + 1, 0.0);
                double nrm = 0;
                for (int m = 0; m <= J; ++m) {
                    c[m] = gaussian(rng);
                    nrm += c[m] * c[m];
                }
                nrm = std::sqrt(nrm);
                double scale = nrm > 0 ? per_j * uniform01(rng) / nrm : 0.0;
                for (auto& x : c) x *= scale;
                cert.noise_coeffs[j] = std::move(c);
            }
        }
    }

    // metric factor: a few low-order Fourier bumps in the chart, capped
    // inside the (1+delta) band
    cert.metric_log_factors.assign(N, 0.0);
    {
        auto rng = substream(seed, "perturb-metric");
        double a1 = uniform(rng, -3, 3), b1 = uniform(rng, -3, 3), p1 = uniform(rng, 0, 2 * kPi);
        double a2 = uniform(rng, -6, 6), b2 = uniform(rng, -6, 6), p2 = uniform(rng, 0, 2 * kPi);
        double cap = 0.9 * std::log1p(delta);
        double peak = 0;
        std::vector<double> raw(N);
        for (int q = 0; q < N; ++q) {
            auto x = in.grid.chart(q);
            raw[q] = std::cos(a1 * x[0] + b1 * x[1] + p1) + 0.5 * std::cos(a2 * x[0] + b2 * x[1] + p2);
            peak = std::max(peak, std::fabs(raw[q]));
        }
        double sc = peak > 0 ? cap / peak : 0.0;
        for (int q = 0; q < N; ++q) cert.metric_log_factors[q] = raw[q] * sc;
    }

    cert.validate();
    return {apply_certificate(in, cert), cert};
}

// ---------------------------------------------------------------------------
// delta-closeness checker
// ---------------------------------------------------------------------------

struct CloseReport {
    bool pass = false;
    std::string failure;  // empty when pass
    double delta = 0.0;
    // witness
    std::vector<std::pair<double, double>> intervals;
    std::vector<std::vector<int>> sets1, sets2;
    int best_rotation_steps = 0;
    bool best_reflect = false;
    std::vector<Eigen::MatrixXd> best_A;
    // margins, each to be compared against delta (band factors minus one)
    double margin_width = 0.0;       // max interval width
    double margin_metric = 0.0;      // max Lipschitz band factor - 1
    double margin_psi_fwd = 0.0;     // max cluster residual, metric-weighted
    double margin_psi_rev = 0.0;
    double margin_psi_fwd_std = 0.0;  // same with flat chart weights
    double margin_psi_rev_std = 0.0;
};

namespace detail {

struct JointClusters {
    bool ok = false;
    std::string why;
    std::vector<std::pair<double, double>> intervals;
    std::vector<std::vector<int>> sets1, sets2;
    double max_width = 0.0;
};

/// Partition the merged spectra below 1/delta into runs of width < delta with
/// equal counts on both sides (dynamic program minimizing the largest width).
inline JointClusters joint_clusters(const std::vector<double>& mu1,
                                    const std::vector<double>& mu2, double delta) {
    JointClusters out;
    struct Entry {
        double v;
        int side, idx;
    };
    std::vector<Entry> e;
    double limit = 1.0 / delta;
    for (size_t j = 0; j < mu1.size(); ++j)
        if (mu1[j] < limit) e.push_back({mu1[j], 0, int(j)});
    for (size_t j = 0; j < mu2.size(); ++j)
        if (mu2[j] < limit) e.push_back({mu2[j], 1, int(j)});
    std::stable_sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) {
        if (a.v != b.v) return a.v < b.v;
        return a.side < b.side;
    });
    int n = int(e.size());
    if (n == 0) {
        out.ok = true;
        return out;
    }
    // Coarsest feasible partition: a wider interval only widens the
    // orthogonal block available to clause (v), so minimize the run count
    // and prefer the longest final run on ties.
    const int INF = std::numeric_limits<int>::max();
    std::vector<int> best(n + 1, INF);  // minimal number of runs over prefix
    std::vector<int> prev(n + 1, -1);
    best[0] = 0;
    for (int i = 1; i <= n; ++i) {
        int c1 = 0, c2 = 0;
        for (int j = i - 1; j >= 0; --j) {
            // run = entries j..i-1
            if (e[j].side == 0) ++c1; else ++c2;
            double width = e[i - 1].v - e[j].v;
            if (width >= delta) break;
            if (c1 != c2) continue;
            if (best[j] == INF) continue;
            if (best[j] + 1 <= best[i]) {  // <= : smaller j wins, longer run
                best[i] = best[j] + 1;
                prev[i] = j;
            }
        }
    }
    if (best[n] == INF) {
        out.why = "no interval partition: widths or per-interval counts fail";
        return out;
    }
    // reconstruct
    std::vector<std::pair<int, int>> runs;
    for (int i = n; i > 0; i = prev[i]) runs.push_back({prev[i], i});
    std::reverse(runs.begin(), runs.end());
    for (auto [a, b] : runs) {
        double lo = e[a].v, hi = e[b - 1].v;
        double margin = 0.45 * (delta - (hi - lo));
        out.intervals.push_back({lo - margin, hi + margin});
        out.sets1.push_back({});
        out.sets2.push_back({});
        for (int t = a; t < b; ++t)
            (e[t].side == 0 ? out.sets1.back() : out.sets2.back()).push_back(e[t].idx);
        out.max_width = std::max(out.max_width, hi - lo);
    }
    // n_0 = 1 on both sides in the first interval
    if (out.sets1[0].size() != 1 || out.sets2[0].size() != 1) {
        out.why = "n_0 != 1: zero eigenvalue not alone in its interval";
        return out;
    }
    out.ok = true;
    return out;
}

/// Node map realizing O^{-1} on the grid: reflection first, then rotation.
inline int transformed_node(const BallGrid& g, int idx, int steps, bool reflect) {
    int i = g.ring(idx), j = g.spoke(idx);
    if (reflect) j = g.n_theta - 1 - j;
    int jj = (j + steps) % g.n_theta;
    if (jj < 0) jj += g.n_theta;
    return g.index(i, jj);
}

}  // namespace detail

/// Decide Definition-3 delta-closeness of two data sets on the same grid.
/// The rotation O is searched over grid-step multiples (optionally with
/// reflection) with a cheap alignment proxy, then the best candidates are
/// scored by the full clause margins.
inline CloseReport check_delta_close(const InteriorSpectralData& d1,
                                     const InteriorSpectralData& d2, double delta,
                                     int refine_top = 6) {
    require(d1.grid == d2.grid, "check_delta_close: mismatched ball grids");
    require(std::fabs(d1.ball_radius - d2.ball_radius) < 1e-12,
            "check_delta_close: mismatched ball radii");
    CloseReport rep;
    rep.delta = delta;

    // (i)-(iii) joint interval structure
    auto jc = detail::joint_clusters(d1.mu, d2.mu, delta);
    if (!jc.ok) {
        rep.failure = jc.why;
        return rep;
    }
    rep.intervals = jc.intervals;
    rep.sets1 = jc.sets1;
    rep.sets2 = jc.sets2;
    rep.margin_width = jc.max_width;

    const BallGrid& g = d1.grid;
    int N = g.size();

    // quadrature weights on both sides
    std::vector<double> w2(N), w1(N), wflat(N);
    for (int q = 0; q < N; ++q) {
        w2[q] = d2.weight(q);
        w1[q] = d1.weight(q);
        wflat[q] = g.base_weight(q);
    }

    // candidate scan: the eigenspace of a cluster is rotation invariant, so
    // Gram mass cannot identify O; score each rotation by the Procrustes
    // residual of one probe cluster on a strided node set instead
    struct Cand {
        int steps;
        bool reflect;
        double proxy;  // residual: smaller is better
    };
    std::vector<Cand> cands;
    int probe_p = -1;
    for (size_t p = 1; p < jc.sets1.size(); ++p)
        if (!jc.sets1[p].empty() && jc.sets1[p].size() == jc.sets2[p].size()) {
            probe_p = int(p);
            break;
        }
    if (probe_p >= 0) {
        const auto& s1 = jc.sets1[probe_p];
        const auto& s2 = jc.sets2[probe_p];
        int np = int(s1.size());
        const int stride = 2;
        for (int refl = 0; refl <= 1; ++refl) {
            for (int k = 0; k < g.n_theta; ++k) {
                Eigen::MatrixXd G = Eigen::MatrixXd::Zero(np, np);
                for (int q = 0; q < N; q += stride) {
                    int src = detail::transformed_node(g, q, k, refl != 0);
                    double w = wflat[q];
                    for (int jj = 0; jj < np; ++jj)
                        for (int mm = 0; mm < np; ++mm)
                            G(jj, mm) += w * d2.psi[s2[jj]][q] * d1.psi[s1[mm]][src];
                }
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(G,
                                                      Eigen::ComputeFullU | Eigen::ComputeFullV);
                Eigen::MatrixXd A = svd.matrixU() * svd.matrixV().transpose();
                double r2 = 0;
                for (int jj = 0; jj < np; ++jj) {
                    for (int q = 0; q < N; q += stride) {
                        int src = detail::transformed_node(g, q, k, refl != 0);
                        double v = 0;
                        for (int mm = 0; mm < np; ++mm) v += A(jj, mm) * d1.psi[s1[mm]][src];
                        double dlt = v - d2.psi[s2[jj]][q];
                        r2 += wflat[q] * dlt * dlt;
                    }
                }
                cands.push_back({k, refl != 0, r2});
            }
        }
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Cand& a, const Cand& b) { return a.proxy < b.proxy; });
        cands.resize(std::min<size_t>(cands.size(), size_t(refine_top)));
    } else {
        cands.push_back({0, false, 0.0});  // no nontrivial cluster: O irrelevant
    }

    // full scoring of the shortlisted rotations
    double best_score = std::numeric_limits<double>::infinity();
    for (const auto& cand : cands) {
        // (iv) Lipschitz band of O_* h1 against h2
        double band = 0.0;
        for (int q = 0; q < N; ++q) {
            int src = detail::transformed_node(g, q, cand.steps, cand.reflect);
            double angle = cand.steps * g.dtheta();
            auto h1r = detail::rotate_metric(d1.metric[src], angle);
            if (cand.reflect) {  // conjugate by diag(1,-1)
                h1r[1] = -h1r[1];
                h1r[2] = -h1r[2];
            }
            const auto& h2 = d2.metric[q];
            // generalized eigenvalues of (h1r, h2), 2x2 closed form
            double det2 = h2[0] * h2[3] - h2[1] * h2[2];
            double a = (h2[3] * h1r[0] - h2[1] * h1r[2]) / det2;
            double b = (h2[3] * h1r[1] - h2[1] * h1r[3]) / det2;
            double cc = (h2[0] * h1r[2] - h2[2] * h1r[0]) / det2;
            double dd = (h2[0] * h1r[3] - h2[2] * h1r[1]) / det2;
            double tr = a + dd, dt = a * dd - b * cc;
            double disc = std::sqrt(std::max(tr * tr / 4.0 - dt, 0.0));
            double l1 = tr / 2.0 - disc, l2 = tr / 2.0 + disc;
            require(l1 > 0, "check_delta_close: degenerate metric pair");
            band = std::max({band, l2 - 1.0, 1.0 / l1 - 1.0});
        }

        // (v) per-cluster Procrustes, both directions
        double fwd = 0, rev = 0, fwd_std = 0, rev_std = 0;
        std::vector<Eigen::MatrixXd> As;
        for (size_t p = 0; p < jc.sets1.size(); ++p) {
            const auto& s1 = jc.sets1[p];
            const auto& s2 = jc.sets2[p];
            if (s1.size() != s2.size()) continue;  // guarded by (iii) already
            int np = int(s1.size());
            std::vector<std::vector<double>> t1(np, std::vector<double>(N));
            for (int a2 = 0; a2 < np; ++a2)
                for (int q = 0; q < N; ++q)
                    t1[a2][q] =
                        d1.psi[s1[a2]][detail::transformed_node(g, q, cand.steps, cand.reflect)];
            Eigen::MatrixXd G(np, np);
            for (int jj = 0; jj < np; ++jj)
                for (int mm = 0; mm < np; ++mm) {
                    double acc = 0;
                    for (int q = 0; q < N; ++q) acc += w2[q] * d2.psi[s2[jj]][q] * t1[mm][q];
                    G(jj, mm) = acc;
                }
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Eigen::MatrixXd A = svd.matrixU() * svd.matrixV().transpose();
            As.push_back(A);
            // forward residual: || A (O_* Psi1) - Psi2 ||, h2 weights
            double r2 = 0, r2s = 0;
            for (int jj = 0; jj < np; ++jj) {
                for (int q = 0; q < N; ++q) {
                    double v = 0;
                    for (int mm = 0; mm < np; ++mm) v += A(jj, mm) * t1[mm][q];
                    double dlt = v - d2.psi[s2[jj]][q];
                    r2 += w2[q] * dlt * dlt;
                    r2s += wflat[q] * dlt * dlt;
                }
            }
            fwd = std::max(fwd, std::sqrt(r2));
            fwd_std = std::max(fwd_std, std::sqrt(r2s));
            // reverse: || A^{-1} (O^{-1})_* Psi2 - Psi1 ||, h1 weights;
            // equivalently transform the residual back through the node map
            double r1 = 0, r1s = 0;
            for (int jj = 0; jj < np; ++jj) {
                for (int q = 0; q < N; ++q) {
                    int src = detail::transformed_node(g, q, cand.steps, cand.reflect);
                    double v = 0;
                    for (int mm = 0; mm < np; ++mm) v += A(mm, jj) * d2.psi[s2[mm]][q];
                    double dlt = v - d1.psi[s1[jj]][src];
                    r1 += w1[src] * dlt * dlt;
                    r1s += wflat[q] * dlt * dlt;
                }
            }
            rev = std::max(rev, std::sqrt(r1));
            rev_std = std::max(rev_std, std::sqrt(r1s));
        }

        double score = std::max({band, fwd, rev});
        if (score < best_score) {
            best_score = score;
            rep.best_rotation_steps = cand.steps;
            rep.best_reflect = cand.reflect;
            rep.best_A = As;
            rep.margin_metric = band;
            rep.margin_psi_fwd = fwd;
            rep.margin_psi_rev = rev;
            rep.margin_psi_fwd_std = fwd_std;
            rep.margin_psi_rev_std = rev_std;
        }
    }

    const double tol = 1e-9;
    rep.pass = rep.margin_width < delta + tol && rep.margin_metric <= delta + tol &&
               rep.margin_psi_fwd <= delta + tol && rep.margin_psi_rev <= delta + tol;
    if (!rep.pass && rep.failure.empty()) {
        if (rep.margin_metric > delta + tol)
            rep.failure = "clause (iv): Lipschitz band factor " +
                          std::to_string(1.0 + rep.margin_metric);
        else if (rep.margin_psi_fwd > delta + tol || rep.margin_psi_rev > delta + tol)
            rep.failure = "clause (v): eigenfunction block residual " +
                          std::to_string(std::max(rep.margin_psi_fwd, rep.margin_psi_rev));
        else
            rep.failure = "clause (i): interval width " + std::to_string(rep.margin_width);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// The cluster mixing matrix E (oracle mode)
// ---------------------------------------------------------------------------

struct ClusterMixMatrix {
    Eigen::MatrixXd E;                  // (j1+1) x (j1+1), block diagonal
    double orthogonality_defect = 0.0;  // ||E^T E - I||
};

/// e_jk = <phi~_k, phi_j> over the whole-manifold grid, with the perturbed
/// basis reconstructed from the certificate's orthogonal part (additive noise
/// is not part of E).  Entries across different clusters vanish structurally.
inline ClusterMixMatrix assemble_E(const Eigenbasis& basis, const QuadratureGrid& grid,
                                   const PerturbationCertificate& cert, int j1) {
    require(j1 < basis.count(), "assemble_E: j1 beyond basis");
    const ClusterPartition& cp = cert.clusters;
    int n = j1 + 1;
    ClusterMixMatrix out;
    out.E = Eigen::MatrixXd::Zero(n, n);

    // eigenfunction values on the manifold grid
    std::vector<std::vector<double>> vals(grid.nodes.size());
    for (size_t q = 0; q < grid.nodes.size(); ++q) {
        vals[q].resize(n);
        for (int j = 0; j < n; ++j) vals[q][j] = basis.eval(j, grid.nodes[q].pt);
    }

    for (size_t p = 0; p < cp.index_sets.size(); ++p) {
        const auto& s = cp.index_sets[p];
        if (s.empty() || s.front() > j1) continue;
        require(s.back() <= j1, "assemble_E: cluster straddles j1 truncation");
        int np = int(s.size());
        const Eigen::MatrixXd& A = cert.mixers[p];
        require(A.rows() == np && A.cols() == np, "assemble_E: non-square cluster block");
        // phi~_{s[k]} = sum_m A(k, m) phi_{s[m]}; e_{j k} = <phi~_k, phi_j>
        for (int k = 0; k < np; ++k)
            for (int jj = 0; jj < np; ++jj) {
                double acc = 0;
                for (size_t q = 0; q < grid.nodes.size(); ++q) {
                    double tilde = 0;
                    for (int mm = 0; mm < np; ++mm) tilde += A(k, mm) * vals[q][s[mm]];
                    acc += grid.nodes[q].w * tilde * vals[q][s[jj]];
                }
                out.E(s[jj], s[k]) = acc;
            }
    }
    Eigen::MatrixXd d = out.E.transpose() * out.E - Eigen::MatrixXd::Identity(n, n);
    out.orthogonality_defect = d.norm();
    require(out.orthogonality_defect <= 1e-8,
            "assemble_E: ||E^T E - I|| = " + std::to_string(out.orthogonality_defect));
    return out;
}

}  // namespace specrec
