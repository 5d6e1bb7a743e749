#pragma once

// Laplace eigenpairs on the model manifolds.  Torus: lattice modes |k|^2 with
// cos/sin pairs; sphere: fully normalized real spherical harmonics l(l+1);
// mesh: dense generalized eigensolve gated behind a residual diagnostic.
// Multiplicity ties are broken by lexicographic mode index so runs are
// reproducible.

#include "specrec/common.hpp"
#include "specrec/geometry.hpp"
#include "specrec/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace specrec {

struct Mode {
    double lambda = 0.0;
    // torus: k = (k1, k2), trig in {0: const, 1: cos, 2: sin}
    // sphere: k1 = l, k2 = m, trig in {0: zonal/const, 1: cos, 2: sin}
    int k1 = 0, k2 = 0, trig = 0;
};

namespace detail {

/// Fully normalized associated Legendre p(l, m; x): the m=0 member is the
/// orthonormal zonal harmonic, and sqrt(2) p(l,m) cos(m phi) etc. are the
/// orthonormal tesseral ones (unit L2 norm on the unit sphere).
inline double legendre_norm(int l, int m, double x) {
    double pmm = std::sqrt(1.0 / (4.0 * kPi));
    double sx = std::sqrt(std::max(0.0, 1.0 - x * x));
    for (int k = 1; k <= m; ++k) pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * sx;
    if (l == m) return pmm;
    double pm1 = std::sqrt(2.0 * m + 3.0) * x * pmm;
    if (l == m + 1) return pm1;
    double p = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        double a = std::sqrt((4.0 * ll * ll - 1.0) / (double(ll) * ll - double(m) * m));
        double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - double(m) * m) /
                             (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
        p = a * (x * pm1 - b * pmm);
        pmm = pm1;
        pm1 = p;
    }
    return p;
}

}  // namespace detail

/// The first J+1 eigenpairs of -Delta_g, lambda_0 = 0 first, with evaluators
/// normalized against the whole-manifold grid's L2 inner product.
class Eigenbasis {
public:
    const ModelManifold* manifold = nullptr;
    std::vector<Mode> modes;                 // analytic kinds
    Eigen::MatrixXd mesh_vectors;            // mesh kind: n_vertices x (J+1)
    std::vector<double> mesh_lambdas;

    int count() const {
        return manifold->kind == ManifoldKind::Mesh2D ? int(mesh_lambdas.size())
                                                      : int(modes.size());
    }

    double lambda(int j) const {
        return manifold->kind == ManifoldKind::Mesh2D ? mesh_lambdas[j] : modes[j].lambda;
    }

    std::vector<double> lambdas() const {
        std::vector<double> ls(count());
        for (int j = 0; j < count(); ++j) ls[j] = lambda(j);
        return ls;
    }

    double eval(int j, const Point& p) const {
        switch (manifold->kind) {
            case ManifoldKind::FlatTorus2D: {
                const Mode& mo = modes[j];
                if (mo.trig == 0) return 1.0 / std::sqrt(manifold->volume());
                double phase = 2.0 * kPi * (mo.k1 * p.u / manifold->len1 +
                                            mo.k2 * p.v / manifold->len2);
                double amp = std::sqrt(2.0 / manifold->volume());
                return mo.trig == 1 ? amp * std::cos(phase) : amp * std::sin(phase);
            }
            case ManifoldKind::RoundSphere2D: {
                const Mode& mo = modes[j];
                double x = std::cos(p.u);
                double base = detail::legendre_norm(mo.k1, mo.k2, x) / manifold->rho;
                if (mo.trig == 0) return base;
                double f = std::sqrt(2.0) * base;
                return mo.trig == 1 ? f * std::cos(mo.k2 * p.v) : f * std::sin(mo.k2 * p.v);
            }
            case ManifoldKind::Mesh2D:
                return mesh_vectors(p.vertex, j);
        }
        return 0;
    }

    std::vector<double> eval_all(const Point& p) const {
        std::vector<double> vals(count());
        for (int j = 0; j < count(); ++j) vals[j] = eval(j, p);
        return vals;
    }
};

/// eigenpairs(m, J): 0 = lambda_0 < lambda_1 <= ... <= lambda_J ascending,
/// ties resolved by lexicographic mode index.
inline Eigenbasis eigenpairs(const ModelManifold& m, int J) {
    require(J >= 0, "eigenpairs: J >= 0");
    Eigenbasis basis;
    basis.manifold = &m;
    switch (m.kind) {
        case ManifoldKind::FlatTorus2D: {
            double w1 = 2.0 * kPi / m.len1, w2 = 2.0 * kPi / m.len2;
            // grow the lattice window until at least J+1 real modes collected
            int K = 2;
            std::vector<Mode> all;
            while (true) {
                all.clear();
                all.push_back({0.0, 0, 0, 0});
                for (int k1 = -K; k1 <= K; ++k1)
                    for (int k2 = -K; k2 <= K; ++k2) {
                        bool half = (k1 > 0) || (k1 == 0 && k2 > 0);
                        if (!half) continue;
                        double lam = sq(w1 * k1) + sq(w2 * k2);
                        all.push_back({lam, k1, k2, 1});
                        all.push_back({lam, k1, k2, 2});
                    }
                std::stable_sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
                    if (a.lambda != b.lambda) return a.lambda < b.lambda;
                    if (a.k1 != b.k1) return a.k1 < b.k1;
                    if (a.k2 != b.k2) return a.k2 < b.k2;
                    return a.trig < b.trig;
                });
                // the window is exhaustive for eigenvalues below (K w_min)^2
                double safe = sq(K * std::min(w1, w2));
                if (int(all.size()) > J && all[J].lambda < safe) break;
                K *= 2;
                require(K < 4096, "eigenpairs: torus lattice window blew up");
            }
            all.resize(J + 1);
            basis.modes = std::move(all);
            break;
        }
        case ManifoldKind::RoundSphere2D: {
            for (int l = 0; int(basis.modes.size()) <= J; ++l) {
                double lam = double(l) * (l + 1) / sq(m.rho);
                basis.modes.push_back({lam, l, 0, 0});
                for (int mm = 1; mm <= l && int(basis.modes.size()) <= J + 1; ++mm) {
                    basis.modes.push_back({lam, l, mm, 1});
                    basis.modes.push_back({lam, l, mm, 2});
                }
                require(l < 2000, "eigenpairs: sphere degree blew up");
            }
            basis.modes.resize(J + 1);
            break;
        }
        case ManifoldKind::Mesh2D: {
            int n = m.mesh.n_vertices;
            require(J + 1 <= n, "eigenpairs: mesh has only " + std::to_string(n) +
                                    " vertices; max J = " + std::to_string(n - 1));
            Eigen::MatrixXd Lmat = Eigen::MatrixXd::Zero(n, n);
            Eigen::MatrixXd Mmat = Eigen::MatrixXd::Zero(n, n);
            for (int i = 0; i < n; ++i) Mmat(i, i) = m.mesh.vertex_weights[i];
            for (size_t e = 0; e < m.mesh.edges.size(); ++e) {
                auto [i, j] = m.mesh.edges[e];
                double wgt = 1.0 / m.mesh.edge_lengths[e];
                Lmat(i, i) += wgt;
                Lmat(j, j) += wgt;
                Lmat(i, j) -= wgt;
                Lmat(j, i) -= wgt;
            }
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Lmat, Mmat);
            require(es.info() == Eigen::Success, "eigenpairs: mesh eigensolve failed");
            basis.mesh_lambdas.assign(es.eigenvalues().data(), es.eigenvalues().data() + J + 1);
            basis.mesh_vectors = es.eigenvectors().leftCols(J + 1);
            // diagnostic residual gate
            double max_res = 0.0;
            for (int j = 0; j <= J; ++j) {
                Eigen::VectorXd r = Lmat * basis.mesh_vectors.col(j) -
                                    basis.mesh_lambdas[j] * Mmat * basis.mesh_vectors.col(j);
                max_res = std::max(max_res, r.norm() / std::max(1.0, basis.mesh_vectors.col(j).norm()));
            }
            require(max_res < 1e-8, "eigenpairs: mesh eigensolve residual " +
                                        std::to_string(max_res) + " exceeds 1e-8");
            // fix sign convention: first nonzero entry positive
            for (int j = 0; j <= J; ++j) {
                for (int i = 0; i < n; ++i) {
                    if (std::fabs(basis.mesh_vectors(i, j)) > 1e-12) {
                        if (basis.mesh_vectors(i, j) < 0) basis.mesh_vectors.col(j) *= -1.0;
                        break;
                    }
                }
            }
            break;
        }
    }
    // lambda_0 = 0 normalization guard
    require(std::fabs(basis.lambda(0)) < 1e-8, "eigenpairs: lambda_0 must be 0");
    return basis;
}

/// Single Weyl constant C with lambda_j / j^{2/n} in [1/C, C] for 1 <= j <= J.
inline double weyl_constant(const Eigenbasis& basis, int J, int n = 2) {
    double C = 1.0;
    for (int j = 1; j <= J && j < basis.count(); ++j) {
        double ratio = basis.lambda(j) / std::pow(double(j), 2.0 / n);
        require(ratio > 0, "weyl_constant: nonpositive eigenvalue ratio");
        C = std::max({C, ratio, 1.0 / ratio});
    }
    return C;
}

/// Max |<phi_j, phi_k> - delta_jk| under the given whole-manifold grid.
inline double orthonormality_defect(const Eigenbasis& basis, const QuadratureGrid& grid) {
    int J = basis.count();
    std::vector<std::vector<double>> vals(grid.nodes.size());
    for (size_t q = 0; q < grid.nodes.size(); ++q) vals[q] = basis.eval_all(grid.nodes[q].pt);
    double worst = 0.0;
    for (int j = 0; j < J; ++j)
        for (int k = j; k < J; ++k) {
            double s = 0;
            for (size_t q = 0; q < grid.nodes.size(); ++q)
                s += grid.nodes[q].w * vals[q][j] * vals[q][k];
            worst = std::max(worst, std::fabs(s - (j == k ? 1.0 : 0.0)));
        }
    return worst;
}

}  // namespace specrec
