#pragma once

// Maximal sigma-separated nets by greedy farthest-point insertion over a
// dense candidate grid, seeded deterministically.  Separation and covering
// are decidable against the candidate set and reported with the net.

#include "specrec/common.hpp"
#include "specrec/geometry.hpp"
#include "specrec/quadrature.hpp"

#include <optional>
#include <vector>

namespace specrec {

struct Region {
    bool whole = true;
    Point center;
    double radius = 0.0;

    static Region whole_manifold() { return Region{}; }
    static Region ball(const Point& c, double r) { return Region{false, c, r}; }
};

struct NetResult {
    std::vector<Point> points;
    double separation = 0.0;        // min pairwise distance
    double covering_radius = 0.0;   // max over candidates of distance to net
    double cardinality_constant = 0.0;  // C with |net| <= C sigma^{-n}
};

inline std::vector<Point> net_candidates(const ModelManifold& m, const Region& region,
                                         double sigma) {
    std::vector<Point> cand;
    if (m.kind == ManifoldKind::Mesh2D) {
        for (int i = 0; i < m.mesh.n_vertices; ++i) {
            Point p = Point::at_vertex(i);
            if (region.whole || m.distance(p, region.center) <= region.radius)
                cand.push_back(p);
        }
        return cand;
    }
    if (region.whole) {
        int res = std::max(24, int(std::ceil(4.0 * m.diameter() / std::max(sigma, 1e-6))));
        res = std::min(res, 256);
        for (const auto& n : manifold_grid(m, res).nodes) cand.push_back(n.pt);
        return cand;
    }
    // polar chart around the ball center; dense relative to sigma
    int nr = std::max(8, std::min(128, int(std::ceil(6.0 * region.radius / std::max(sigma, 1e-6)))));
    int nt = 4 * nr;
    cand.push_back(region.center);
    for (int i = 1; i <= nr; ++i) {
        double r = region.radius * i / nr;
        for (int j = 0; j < nt; ++j)
            cand.push_back(m.exp_at(region.center, r, 2.0 * kPi * j / nt));
    }
    return cand;
}

/// Greedy farthest-point maximal sigma-separated net in the region.
inline NetResult separated_net(const ModelManifold& m, const Region& region, double sigma,
                               std::uint64_t seed) {
    require(sigma > 0.0, "separated_net: sigma > 0");
    std::vector<Point> cand = net_candidates(m, region, sigma);
    require(!cand.empty(), "separated_net: empty candidate set");
    auto rng = substream(seed, "separated-net");
    size_t start = size_t(rng() % cand.size());

    NetResult out;
    std::vector<double> dist_to_net(cand.size(), std::numeric_limits<double>::infinity());
    auto add = [&](size_t idx) {
        out.points.push_back(cand[idx]);
        for (size_t q = 0; q < cand.size(); ++q)
            dist_to_net[q] = std::min(dist_to_net[q], m.distance(cand[q], cand[idx]));
    };
    add(start);
    while (true) {
        size_t far = 0;
        double fd = -1.0;
        for (size_t q = 0; q < cand.size(); ++q)
            if (dist_to_net[q] > fd) {
                fd = dist_to_net[q];
                far = q;
            }
        if (fd < sigma) {
            out.covering_radius = fd;
            break;
        }
        add(far);
    }
    out.separation = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < out.points.size(); ++i)
        for (size_t j = i + 1; j < out.points.size(); ++j)
            out.separation = std::min(out.separation, m.distance(out.points[i], out.points[j]));
    if (out.points.size() == 1) out.separation = std::numeric_limits<double>::infinity();
    out.cardinality_constant = double(out.points.size()) * std::pow(sigma, 2.0);
    return out;
}

/// Nearest net point, ties to the lowest index.
inline int voronoi_cell(const ModelManifold& m, const std::vector<Point>& net, const Point& x) {
    require(!net.empty(), "voronoi_cell: empty net");
    int best = 0;
    double bd = m.distance(x, net[0]);
    for (size_t i = 1; i < net.size(); ++i) {
        double d = m.distance(x, net[i]);
        if (d < bd - 1e-15) {
            bd = d;
            best = int(i);
        }
    }
    return best;
}

}  // namespace specrec
