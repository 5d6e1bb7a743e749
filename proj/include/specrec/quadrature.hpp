#pragma once

// Whole-manifold quadrature grids: tensor-product midpoint rule on the torus
// fundamental domain, Gauss-Legendre x uniform longitude on the sphere,
// vertex weights on meshes.  Region restriction is by indicator masking.

#include "specrec/common.hpp"
#include "specrec/geometry.hpp"

#include <functional>
#include <vector>

namespace specrec {

struct QuadNode {
    Point pt;
    double w = 0.0;
};

enum class RegionTag { WholeManifold, Ball, BallTime };

struct QuadratureGrid {
    std::vector<QuadNode> nodes;
    RegionTag region = RegionTag::WholeManifold;
    int resolution = 0;

    double total_weight() const {
        double s = 0;
        for (const auto& n : nodes) s += n.w;
        return s;
    }

    template <class F>
    double integrate(F&& f) const {
        double s = 0;
        for (const auto& n : nodes) s += n.w * f(n.pt);
        return s;
    }
};

/// Gauss-Legendre nodes/weights on [-1, 1] (Newton on Legendre polynomials).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p0 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

/// Whole-manifold grid at the given resolution (res x res cells on the torus,
/// res Gauss nodes x 2*res longitudes on the sphere, vertices on a mesh).
inline QuadratureGrid manifold_grid(const ModelManifold& m, int res) {
    require(res >= 2 || m.kind == ManifoldKind::Mesh2D, "manifold_grid: resolution >= 2");
    QuadratureGrid g;
    g.resolution = res;
    switch (m.kind) {
        case ManifoldKind::FlatTorus2D: {
            double h1 = m.len1 / res, h2 = m.len2 / res;
            g.nodes.reserve(size_t(res) * res);
            for (int i = 0; i < res; ++i)
                for (int j = 0; j < res; ++j)
                    g.nodes.push_back({Point::angles((i + 0.5) * h1, (j + 0.5) * h2), h1 * h2});
            break;
        }
        case ManifoldKind::RoundSphere2D: {
            std::vector<double> gx, gw;
            gauss_legendre(res, gx, gw);
            int nphi = 2 * res;
            double dphi = 2.0 * kPi / nphi;
            for (int i = 0; i < res; ++i) {
                double theta = std::acos(gx[i]);
                for (int j = 0; j < nphi; ++j)
                    g.nodes.push_back({Point::angles(theta, (j + 0.5) * dphi),
                                       m.rho * m.rho * gw[i] * dphi});
            }
            break;
        }
        case ManifoldKind::Mesh2D: {
            for (int i = 0; i < m.mesh.n_vertices; ++i)
                g.nodes.push_back({Point::at_vertex(i), m.mesh.vertex_weights[i]});
            break;
        }
    }
    return g;
}

/// Indicator-mask restriction to a metric ball.
inline QuadratureGrid restrict_to_ball(const ModelManifold& m, const QuadratureGrid& g,
                                       const Point& center, double radius) {
    QuadratureGrid out;
    out.region = RegionTag::Ball;
    out.resolution = g.resolution;
    for (const auto& n : g.nodes)
        if (m.distance(n.pt, center) < radius) out.nodes.push_back(n);
    return out;
}

}  // namespace specrec
