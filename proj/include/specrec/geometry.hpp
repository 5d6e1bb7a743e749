#pragma once

// Model manifolds with closed-form geometry: flat 2-tori and round 2-spheres,
// plus a small graph-based mesh kind gated behind convergence diagnostics.
// These provide the ground-truth oracles (distances, volumes, exponential
// map) that every downstream spectral construction is tested against.

#include "specrec/common.hpp"

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

namespace specrec {

enum class ManifoldKind { FlatTorus2D, RoundSphere2D, Mesh2D };

inline std::string kind_name(ManifoldKind k) {
    switch (k) {
        case ManifoldKind::FlatTorus2D: return "flat-torus-2d";
        case ManifoldKind::RoundSphere2D: return "round-sphere-2d";
        case ManifoldKind::Mesh2D: return "mesh-2d";
    }
    return "?";
}

/// Intrinsic coordinates: (u,v) is the angle pair for torus/sphere
/// (sphere: u = colatitude in [0,pi], v = longitude); meshes use vertex ids.
struct Point {
    double u = 0.0, v = 0.0;
    int vertex = -1;

    static Point angles(double u, double v) { return Point{u, v, -1}; }
    static Point at_vertex(int id) { return Point{0.0, 0.0, id}; }
};

struct GeometryBounds {
    double R = 1.0;   // curvature-derivative bound
    double D = 1.0;   // diameter bound
    double i0 = 1.0;  // injectivity lower bound
    double r0 = 0.5;  // data-ball radius
    double K = 1.0;   // sectional-curvature bound
    int n = 2;

    void validate() const {
        require(n >= 2, "GeometryBounds: n >= 2");
        double cap = std::min(i0 / 2.0, 1.0);
        if (K > 0.0) cap = std::min(cap, kPi / (2.0 * std::sqrt(K)));
        require(r0 > 0.0 && r0 < cap,
                "GeometryBounds: r0 must satisfy r0 < min(i0/2, pi/(2 sqrt(K)), 1)");
    }
};

struct MeshData {
    int n_vertices = 0;
    std::vector<std::array<int, 2>> edges;
    std::vector<double> edge_lengths;
    std::vector<double> vertex_weights;  // area measure per vertex
};

class ModelManifold {
public:
    ManifoldKind kind = ManifoldKind::FlatTorus2D;
    double len1 = 2.0 * kPi, len2 = 2.0 * kPi;  // torus periods
    double rho = 1.0;                           // sphere radius
    MeshData mesh;
    Point base;  // the pointed structure (p of the data ball)

    static ModelManifold flat_torus(double l1, double l2, Point p = {}) {
        require(l1 > 0 && l2 > 0, "torus: positive periods");
        ModelManifold m;
        m.kind = ManifoldKind::FlatTorus2D;
        m.len1 = l1;
        m.len2 = l2;
        m.base = m.normalized(p);
        return m;
    }

    static ModelManifold round_sphere(double radius, Point p = Point::angles(kPi / 2, 0.0)) {
        require(radius > 0, "sphere: positive radius");
        ModelManifold m;
        m.kind = ManifoldKind::RoundSphere2D;
        m.rho = radius;
        m.base = m.normalized(p);
        return m;
    }

    static ModelManifold from_mesh(MeshData data, int base_vertex = 0) {
        require(data.n_vertices > 0, "mesh: nonempty");
        require(data.edges.size() == data.edge_lengths.size(), "mesh: edge/length mismatch");
        require((int)data.vertex_weights.size() == data.n_vertices, "mesh: vertex weights");
        ModelManifold m;
        m.kind = ManifoldKind::Mesh2D;
        m.mesh = std::move(data);
        m.base = Point::at_vertex(base_vertex);
        return m;
    }

    double volume() const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D: return len1 * len2;
            case ManifoldKind::RoundSphere2D: return 4.0 * kPi * rho * rho;
            case ManifoldKind::Mesh2D: {
                double s = 0;
                for (double w : mesh.vertex_weights) s += w;
                return s;
            }
        }
        return 0;
    }

    double diameter() const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D:
                return 0.5 * std::sqrt(len1 * len1 + len2 * len2);
            case ManifoldKind::RoundSphere2D: return kPi * rho;
            case ManifoldKind::Mesh2D: return mesh_diameter();
        }
        return 0;
    }

    double injectivity_radius() const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D: return 0.5 * std::min(len1, len2);
            case ManifoldKind::RoundSphere2D: return kPi * rho;
            case ManifoldKind::Mesh2D: return mesh_min_edge();  // nominal
        }
        return 0;
    }

    double sectional_bound() const {
        return kind == ManifoldKind::RoundSphere2D ? 1.0 / (rho * rho) : 0.0;
    }

    Point normalized(Point p) const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D: {
                p.u = std::fmod(p.u, len1);
                if (p.u < 0) p.u += len1;
                p.v = std::fmod(p.v, len2);
                if (p.v < 0) p.v += len2;
                return p;
            }
            case ManifoldKind::RoundSphere2D: {
                double st = std::sin(p.u), ct = std::cos(p.u);
                double x = st * std::cos(p.v), y = st * std::sin(p.v), z = ct;
                double r = std::sqrt(x * x + y * y + z * z);
                require(r > 0, "sphere point normalization");
                p.u = std::acos(std::clamp(z / r, -1.0, 1.0));
                p.v = std::atan2(y, x);
                return p;
            }
            case ManifoldKind::Mesh2D:
                require(p.vertex >= 0 && p.vertex < mesh.n_vertices, "mesh point id");
                return p;
        }
        return p;
    }

    // ---- distances -------------------------------------------------------

    double distance(const Point& a, const Point& b) const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D: {
                double d1 = wrap_delta(a.u - b.u, len1);
                double d2 = wrap_delta(a.v - b.v, len2);
                return std::sqrt(d1 * d1 + d2 * d2);
            }
            case ManifoldKind::RoundSphere2D: {
                auto va = unit3(a), vb = unit3(b);
                double c = std::clamp(va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2], -1.0, 1.0);
                return rho * std::acos(c);
            }
            case ManifoldKind::Mesh2D:
                return mesh_distance(a.vertex, b.vertex);
        }
        return 0;
    }

    /// Point at geodesic distance r from `from` in direction psi (angle in the
    /// normal-coordinate chart at `from`).  Analytic kinds only.
    Point exp_at(const Point& from, double r, double psi) const {
        switch (kind) {
            case ManifoldKind::FlatTorus2D:
                return normalized(Point::angles(from.u + r * std::cos(psi),
                                                from.v + r * std::sin(psi)));
            case ManifoldKind::RoundSphere2D: {
                auto n = unit3(from);
                auto [e1, e2] = tangent_frame(from);
                double t = r / rho;
                std::array<double, 3> q;
                for (int i = 0; i < 3; ++i) {
                    double tan_dir = std::cos(psi) * e1[i] + std::sin(psi) * e2[i];
                    q[i] = std::cos(t) * n[i] + std::sin(t) * tan_dir;
                }
                double theta = std::acos(std::clamp(q[2], -1.0, 1.0));
                double phi = std::atan2(q[1], q[0]);
                return Point::angles(theta, phi);
            }
            case ManifoldKind::Mesh2D:
                throw Error("exp_at: not available for mesh manifolds");
        }
        return from;
    }

    /// Metric tensor in the normal-coordinate chart at `center`, evaluated at
    /// chart coordinates (x1, x2) (analytic kinds).  For the flat torus it is
    /// the identity; for the sphere, I + (f(r)-1) P_perp with
    /// f(r) = (rho sin(r/rho) / r)^2.
    std::array<double, 4> normal_metric(double x1, double x2) const {
        double r = std::sqrt(x1 * x1 + x2 * x2);
        if (kind == ManifoldKind::FlatTorus2D || r < 1e-14)
            return {1.0, 0.0, 0.0, 1.0};
        if (kind == ManifoldKind::RoundSphere2D) {
            double t = r / rho;
            double f = sq(rho * std::sin(t) / r);
            // P_perp = I - rr^T/r^2
            double rx = x1 / r, ry = x2 / r;
            return {f + (1.0 - f) * rx * rx, (1.0 - f) * rx * ry,
                    (1.0 - f) * rx * ry, f + (1.0 - f) * ry * ry};
        }
        throw Error("normal_metric: not available for mesh manifolds");
    }

    /// Exact geodesic distance on the flat torus between x and y when the
    /// open disk B(c, radius) is removed (tangent-and-arc construction over
    /// lattice lifts).  Requires x, y outside the disk and the disk small
    /// relative to the periods.
    double torus_distance_avoiding_disk(const Point& x, const Point& y, const Point& c,
                                        double radius) const {
        require(kind == ManifoldKind::FlatTorus2D, "avoiding-disk distance: torus only");
        require(distance(x, c) >= radius - 1e-12 && distance(y, c) >= radius - 1e-12,
                "avoiding-disk distance: endpoints inside the removed disk");
        double best = std::numeric_limits<double>::infinity();
        for (int w1 = -1; w1 <= 1; ++w1) {
            for (int w2 = -1; w2 <= 1; ++w2) {
                double yx = y.u + w1 * len1, yy = y.v + w2 * len2;
                double len = segment_around_disks(x.u, x.v, yx, yy, c, radius);
                best = std::min(best, len);
            }
        }
        return best;
    }

    // ---- mesh internals --------------------------------------------------

    double mesh_distance(int a, int b) const {
        require(kind == ManifoldKind::Mesh2D, "mesh_distance on non-mesh");
        const auto& dist = mesh_all_pairs();
        return dist[a][b];
    }

    const std::vector<std::vector<double>>& mesh_all_pairs() const {
        if (!mesh_dist_) {
            int n = mesh.n_vertices;
            std::vector<std::vector<std::pair<int, double>>> adj(n);
            for (size_t e = 0; e < mesh.edges.size(); ++e) {
                auto [i, j] = mesh.edges[e];
                adj[i].push_back({j, mesh.edge_lengths[e]});
                adj[j].push_back({i, mesh.edge_lengths[e]});
            }
            auto dist = std::make_unique<std::vector<std::vector<double>>>(n);
            for (int s = 0; s < n; ++s) (*dist)[s] = dijkstra(adj, s);
            mesh_dist_ = std::move(dist);
        }
        return *mesh_dist_;
    }

private:
    mutable std::shared_ptr<std::vector<std::vector<double>>> mesh_dist_;

    static double wrap_delta(double d, double period) {
        d = std::fmod(std::fabs(d), period);
        return std::min(d, period - d);
    }

    std::array<double, 3> unit3(const Point& p) const {
        double st = std::sin(p.u);
        return {st * std::cos(p.v), st * std::sin(p.v), std::cos(p.u)};
    }

    std::pair<std::array<double, 3>, std::array<double, 3>> tangent_frame(const Point& p) const {
        double st = std::sin(p.u), ct = std::cos(p.u), cp = std::cos(p.v), sp = std::sin(p.v);
        std::array<double, 3> e_theta = {ct * cp, ct * sp, -st};
        std::array<double, 3> e_phi = {-sp, cp, 0.0};
        if (std::fabs(st) < 1e-12) {  // pole: pick the phi=0 frame
            e_theta = {1.0, 0.0, 0.0};
            e_phi = {0.0, (p.u < kPi / 2 ? 1.0 : -1.0), 0.0};
        }
        return {e_theta, e_phi};
    }

    /// Planar shortest path from (x1,x2) to (y1,y2) avoiding every lattice
    /// lift of the disk (c, R).  Disks are small relative to the periods, so
    /// the path is the segment with independent tangent-and-arc detours at
    /// each blocking lift.
    double segment_around_disks(double x1, double x2, double y1, double y2, const Point& c,
                                double R) const {
        double straight = std::hypot(y1 - x1, y2 - x2);
        double extra = 0.0;
        for (int w1 = -2; w1 <= 2; ++w1) {
            for (int w2 = -2; w2 <= 2; ++w2) {
                double cx = c.u + w1 * len1, cy = c.v + w2 * len2;
                double detour = around_one_disk(x1, x2, y1, y2, cx, cy, R);
                if (detour > straight) extra += detour - straight;
            }
        }
        return straight + extra;
    }

    /// Length of the shortest planar path from x to y outside one open disk.
    static double around_one_disk(double x1, double x2, double y1, double y2, double cx,
                                  double cy, double R) {
        double dx = std::hypot(x1 - cx, x2 - cy);
        double dy = std::hypot(y1 - cx, y2 - cy);
        if (dx < R) dx = R;
        if (dy < R) dy = R;
        // does the segment x->y cross the disk?
        double ux = y1 - x1, uy = y2 - x2;
        double L2 = ux * ux + uy * uy;
        double t = L2 > 0 ? std::clamp(((cx - x1) * ux + (cy - x2) * uy) / L2, 0.0, 1.0) : 0.0;
        double px = x1 + t * ux, py = x2 + t * uy;
        double dseg = std::hypot(px - cx, py - cy);
        double straight = std::sqrt(L2);
        if (dseg >= R - 1e-15) return straight;
        double ang = angle_between(x1 - cx, x2 - cy, y1 - cx, y2 - cy);
        double wrap = ang - std::acos(std::clamp(R / dx, -1.0, 1.0)) -
                      std::acos(std::clamp(R / dy, -1.0, 1.0));
        if (wrap <= 0) return straight;
        return std::sqrt(std::max(dx * dx - R * R, 0.0)) +
               std::sqrt(std::max(dy * dy - R * R, 0.0)) + R * wrap;
    }

    static double angle_between(double ax, double ay, double bx, double by) {
        double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
        if (na == 0 || nb == 0) return 0;
        double c = std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0);
        return std::acos(c);
    }

    static std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj,
                                        int src) {
        std::vector<double> d(adj.size(), std::numeric_limits<double>::infinity());
        using QE = std::pair<double, int>;
        std::priority_queue<QE, std::vector<QE>, std::greater<>> q;
        d[src] = 0;
        q.push({0, src});
        while (!q.empty()) {
            auto [dd, u] = q.top();
            q.pop();
            if (dd > d[u]) continue;
            for (auto [v, w] : adj[u])
                if (d[u] + w < d[v]) {
                    d[v] = d[u] + w;
                    q.push({d[v], v});
                }
        }
        return d;
    }

    double mesh_diameter() const {
        double m = 0;
        const auto& dist = mesh_all_pairs();
        for (const auto& row : dist)
            for (double d : row)
                if (std::isfinite(d)) m = std::max(m, d);
        return m;
    }

    double mesh_min_edge() const {
        double m = std::numeric_limits<double>::infinity();
        for (double l : mesh.edge_lengths) m = std::min(m, l);
        return mesh.edge_lengths.empty() ? 0.0 : m;
    }
};

/// Numeric check that a manifold fits declared bounds (evaluated on samples,
/// used by pipeline pre-flight).
inline void check_bounds(const ModelManifold& m, const GeometryBounds& b) {
    b.validate();
    require(m.diameter() <= b.D + 1e-12, "bounds: diameter exceeds D");
    require(m.injectivity_radius() >= b.i0 - 1e-12, "bounds: injectivity below i0");
    require(m.sectional_bound() <= b.K + 1e-12, "bounds: sectional curvature exceeds K");
}

/// The distance-coordinate evaluator H(x) = (d(x, z_j))_j and the sampled
/// bi-Lipschitz ratio extremes of d(x,y) / |H(x) - H(y)|.
struct DistanceCoordinateMap {
    const ModelManifold* m = nullptr;
    std::vector<Point> net;

    std::vector<double> operator()(const Point& x) const {
        std::vector<double> h(net.size());
        for (size_t j = 0; j < net.size(); ++j) h[j] = m->distance(x, net[j]);
        return h;
    }
};

struct RatioBounds {
    double lo = 0.0, hi = 0.0;  // extremes of d(x,y)/|H(x)-H(y)|
};

inline DistanceCoordinateMap distance_coordinate_map(const ModelManifold& m,
                                                     std::vector<Point> net) {
    require(!net.empty(), "distance_coordinate_map: empty net");
    return DistanceCoordinateMap{&m, std::move(net)};
}

inline RatioBounds bilipschitz_ratio_bounds(const ModelManifold& m,
                                            const DistanceCoordinateMap& H, int n_pairs,
                                            std::uint64_t seed) {
    auto rng = substream(seed, "bilipschitz-pairs");
    RatioBounds rb{std::numeric_limits<double>::infinity(), 0.0};
    int done = 0;
    while (done < n_pairs) {
        Point x, y;
        if (m.kind == ManifoldKind::Mesh2D) {
            x = Point::at_vertex(int(rng() % m.mesh.n_vertices));
            y = Point::at_vertex(int(rng() % m.mesh.n_vertices));
        } else if (m.kind == ManifoldKind::FlatTorus2D) {
            x = Point::angles(uniform(rng, 0, m.len1), uniform(rng, 0, m.len2));
            y = Point::angles(uniform(rng, 0, m.len1), uniform(rng, 0, m.len2));
        } else {
            x = m.normalized(Point::angles(std::acos(uniform(rng, -1, 1)), uniform(rng, -kPi, kPi)));
            y = m.normalized(Point::angles(std::acos(uniform(rng, -1, 1)), uniform(rng, -kPi, kPi)));
        }
        double d = m.distance(x, y);
        if (d < 1e-9) continue;
        auto hx = H(x), hy = H(y);
        double hd = 0;
        for (size_t j = 0; j < hx.size(); ++j) hd += sq(hx[j] - hy[j]);
        hd = std::sqrt(hd);
        if (hd < 1e-15) continue;  // indistinguishable under H; ratio unbounded
        double r = d / hd;
        rb.lo = std::min(rb.lo, r);
        rb.hi = std::max(rb.hi, r);
        ++done;
    }
    return rb;
}

}  // namespace specrec
