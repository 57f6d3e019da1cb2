#pragma once

// Exact quadratic optimal transport between measures on a 1-D grid. Distances
// and geodesics use the atomic view (cell masses at cell centers) where the
// monotone quantile matching is the optimal coupling. A transportation-simplex
// LP solver over couplings serves as an independent oracle at small scale.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "grid.hpp"

namespace jkoflow {

namespace detail {

struct AtomicView {
    std::vector<double> pos;   // positions of positive-mass atoms, increasing
    std::vector<double> cum;   // cumulative masses, strictly increasing, back()==1
};

inline AtomicView atomic_view(const GridMeasure& m) {
    AtomicView v;
    double acc = 0.0;
    for (int i = 0; i < m.n(); ++i) {
        double w = m.mass(i);
        if (w > 0.0) {
            acc += w;
            v.pos.push_back(m.grid().center(i));
            v.cum.push_back(acc);
        }
    }
    require(!v.pos.empty(), Err::ZeroMass, "measure without mass");
    v.cum.back() = 1.0;
    return v;
}

inline AtomicView atomic_view(const AtomList& list) {
    std::vector<Atom> atoms = list.atoms();
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return a.position < b.position; });
    AtomicView v;
    double acc = 0.0;
    for (const Atom& a : atoms) {
        if (a.mass > 0.0) {
            acc += a.mass;
            v.pos.push_back(a.position);
            v.cum.push_back(acc);
        }
    }
    require(!v.pos.empty(), Err::ZeroMass, "atom list without mass");
    v.cum.back() = 1.0;
    return v;
}

struct MatchSegment {
    double width = 0.0;  // quantile length
    double src = 0.0;    // source position
    double dst = 0.0;    // destination position
};

// Monotone (quantile) matching of two atomic measures: segments of the common
// quantile axis on which both quantile functions are constant.
inline std::vector<MatchSegment> monotone_segments(const AtomicView& a, const AtomicView& b) {
    std::vector<MatchSegment> segs;
    segs.reserve(a.pos.size() + b.pos.size());
    std::size_t i = 0, j = 0;
    double q = 0.0;
    while (i < a.pos.size() && j < b.pos.size()) {
        double qn = std::min(a.cum[i], b.cum[j]);
        if (qn > q) segs.push_back({qn - q, a.pos[i], b.pos[j]});
        if (a.cum[i] <= qn) ++i;
        if (b.cum[j] <= qn) ++j;
        q = qn;
    }
    return segs;
}

inline double w2_squared(const AtomicView& a, const AtomicView& b) {
    double total = 0.0;
    for (const MatchSegment& s : monotone_segments(a, b)) {
        double d = s.src - s.dst;
        total += s.width * d * d;
    }
    return total;
}

// Generalized inverse of the atomic CDF at level q. When q coincides with a
// mass breakpoint (a tie), the two one-sided inverses differ by one atom and
// the midpoint is returned; this is the symmetric subgradient selection that
// makes the potential exact at symmetric configurations.
inline double quantile_tie_midpoint(const AtomicView& v, double q, double tie_eps = 1e-12) {
    auto it = std::lower_bound(v.cum.begin(), v.cum.end(), q - tie_eps);
    std::size_t k = static_cast<std::size_t>(it - v.cum.begin());
    if (k >= v.pos.size()) return v.pos.back();
    if (std::abs(v.cum[k] - q) <= tie_eps) {
        if (k + 1 < v.pos.size()) return 0.5 * (v.pos[k] + v.pos[k + 1]);
        return v.pos[k];
    }
    return v.pos[k];
}

}  // namespace detail

inline double w2(const GridMeasure& mu, const GridMeasure& nu) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "w2 needs a common grid");
    return std::sqrt(detail::w2_squared(detail::atomic_view(mu), detail::atomic_view(nu)));
}

inline double w2_squared(const GridMeasure& mu, const GridMeasure& nu) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "w2 needs a common grid");
    return detail::w2_squared(detail::atomic_view(mu), detail::atomic_view(nu));
}

inline double w2_atoms(const AtomList& a, const AtomList& b) {
    return std::sqrt(detail::w2_squared(detail::atomic_view(a), detail::atomic_view(b)));
}

class KantorovichPotential {
  public:
    KantorovichPotential(const Grid& grid, std::vector<double> phi)
        : grid_(grid), phi_(std::move(phi)) {
        require(static_cast<int>(phi_.size()) == grid_.n, Err::BadParameter,
                "potential length does not match grid");
        require(phi_.empty() || phi_[0] == 0.0, Err::BadParameter, "potential gauge phi_0 != 0");
        for (std::size_t i = 0; i + 1 < phi_.size(); ++i) {
            require(std::abs(phi_[i + 1] - phi_[i]) <= 4.0 * grid_.dx + 1e-15,
                    Err::BadParameter, "potential violates the Lipschitz bound");
        }
    }

    const Grid& grid() const { return grid_; }
    const std::vector<double>& phi() const { return phi_; }
    double phi(int i) const { return phi_[i]; }

  private:
    Grid grid_;
    std::vector<double> phi_;
};

// First-variation potential of rho -> W2^2(rho, target): the exact gradient of
// the atomic squared distance with respect to the cell masses of rho, gauged
// to phi_0 = 0. Increments accumulate 2*(x - T(x)) across cell edges, with T
// the monotone map evaluated at the mass breakpoints of rho.
inline KantorovichPotential kantorovich_potential(const GridMeasure& rho,
                                                  const GridMeasure& target) {
    require(rho.grid() == target.grid(), Err::GridMismatch, "potential needs a common grid");
    require(rho.strictly_positive(), Err::NonpositiveSource,
            "source density must be strictly positive");
    const Grid& g = rho.grid();
    const detail::AtomicView tv = detail::atomic_view(target);
    std::vector<double> cum = rho.cumulative();
    std::vector<double> phi(g.n, 0.0);
    for (int i = 0; i + 1 < g.n; ++i) {
        double t = detail::quantile_tie_midpoint(tv, cum[i]);
        phi[i + 1] = phi[i] + 2.0 * g.dx * (g.edge(i) - t);
    }
    return KantorovichPotential(g, phi);
}

enum class InterpolationMode { Atoms, Density };

inline AtomList displacement_interpolate_atoms(const GridMeasure& mu, const GridMeasure& nu,
                                               double t) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "interpolation needs a common grid");
    require(t >= 0.0 && t <= 1.0, Err::BadParameter, "interpolation time must be in [0,1]");
    std::vector<Atom> atoms;
    for (const detail::MatchSegment& s :
         detail::monotone_segments(detail::atomic_view(mu), detail::atomic_view(nu))) {
        atoms.push_back({(1.0 - t) * s.src + t * s.dst, s.width});
    }
    return AtomList(std::move(atoms));
}

namespace detail {

// Piecewise-linear quantile function of the density view (requires strictly
// positive density, so the CDF is strictly increasing).
struct DensityQuantile {
    std::vector<double> cum;  // cumulative masses at right cell edges, size n, back()==1
    const Grid* grid = nullptr;
    const std::vector<double>* rho = nullptr;

    explicit DensityQuantile(const GridMeasure& m) {
        require(m.strictly_positive(), Err::NonpositiveSource,
                "density-view quantile needs a strictly positive density");
        cum = m.cumulative();
        grid = &m.grid();
        rho = &m.rho();
    }

    double operator()(double q) const {
        auto it = std::lower_bound(cum.begin(), cum.end(), q);
        int i = std::min<int>(static_cast<int>(it - cum.begin()), grid->n - 1);
        double lo = (i == 0) ? 0.0 : cum[i - 1];
        return i * grid->dx + (q - lo) / (*rho)[i];
    }
};

}  // namespace detail

inline GridMeasure displacement_interpolate_density(const GridMeasure& mu, const GridMeasure& nu,
                                                    double t, int quantile_resolution = 0) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "interpolation needs a common grid");
    require(t >= 0.0 && t <= 1.0, Err::BadParameter, "interpolation time must be in [0,1]");
    const Grid& g = mu.grid();
    detail::DensityQuantile qmu(mu), qnu(nu);
    const int K = std::max(quantile_resolution, 16 * g.n);
    std::vector<Atom> atoms(K);
    for (int r = 0; r < K; ++r) {
        double q = (r + 0.5) / K;
        double x = (1.0 - t) * qmu(q) + t * qnu(q);
        atoms[r] = {std::min(std::max(x, 0.0), 1.0), 1.0 / K};
    }
    return rebin_atoms(AtomList(std::move(atoms)), g);
}

struct GeodesicPiece {
    double length = 0.0;   // spatial extent of the piece
    double density = 0.0;  // constant density on it
};

// Exact pushforward of Leb[0,1] under X_t = (1-t) Q_mu + t Q_nu for the
// density views: piecewise-constant density on the images of the merged
// quantile breakpoints. Used to evaluate integral functionals along the
// geodesic without rebinning noise.
inline std::vector<GeodesicPiece> density_geodesic_pieces(const GridMeasure& mu,
                                                          const GridMeasure& nu, double t) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "interpolation needs a common grid");
    require(t >= 0.0 && t <= 1.0, Err::BadParameter, "interpolation time must be in [0,1]");
    detail::DensityQuantile qmu(mu), qnu(nu);
    std::vector<double> breaks{0.0};
    breaks.insert(breaks.end(), qmu.cum.begin(), qmu.cum.end());
    breaks.insert(breaks.end(), qnu.cum.begin(), qnu.cum.end());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    std::vector<GeodesicPiece> pieces;
    pieces.reserve(breaks.size());
    double qa = breaks.front();
    double xa = (1.0 - t) * qmu(qa) + t * qnu(qa);
    for (std::size_t b = 1; b < breaks.size(); ++b) {
        double qb = breaks[b];
        double xb = (1.0 - t) * qmu(qb) + t * qnu(qb);
        if (qb > qa) pieces.push_back({xb - xa, (qb - qa) / (xb - xa)});
        qa = qb;
        xa = xb;
    }
    return pieces;
}

// ---------------------------------------------------------------------------
// Density-view distance: the exact Wasserstein distance between the measures
// with piecewise-constant densities. Unlike the atomic distance it is C^1 in
// the cell masses, which is what lets slice optimality conditions be solved to
// tight residuals; the two views agree up to O(dx).
// ---------------------------------------------------------------------------

namespace detail {

struct DensityPieces {
    std::vector<double> cum;   // cumulative mass at the right edge of each piece
    std::vector<double> xl;    // left spatial edge of the piece
    std::vector<double> rho;   // constant density on it
};

inline DensityPieces density_pieces(const GridMeasure& m) {
    DensityPieces p;
    double acc = 0.0;
    for (int i = 0; i < m.n(); ++i) {
        if (m.rho(i) > 0.0) {
            acc += m.mass(i);
            p.cum.push_back(acc);
            p.xl.push_back(i * m.dx());
            p.rho.push_back(m.rho(i));
        }
    }
    require(!p.cum.empty(), Err::ZeroMass, "measure without mass");
    p.cum.back() = 1.0;
    return p;
}

}  // namespace detail

inline double w2_density_squared(const GridMeasure& mu, const GridMeasure& nu) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "w2 needs a common grid");
    detail::DensityPieces a = detail::density_pieces(mu);
    detail::DensityPieces b = detail::density_pieces(nu);
    double total = 0.0;
    std::size_t ia = 0, ib = 0;
    double q = 0.0;
    while (ia < a.cum.size() && ib < b.cum.size()) {
        double qn = std::min(a.cum[ia], b.cum[ib]);
        if (qn > q) {
            double alo = (ia == 0) ? 0.0 : a.cum[ia - 1];
            double blo = (ib == 0) ? 0.0 : b.cum[ib - 1];
            auto diff = [&](double qq) {
                double xa = a.xl[ia] + (qq - alo) / a.rho[ia];
                double xb = b.xl[ib] + (qq - blo) / b.rho[ib];
                return xa - xb;
            };
            // (Q_mu - Q_nu)^2 is quadratic on the piece: Simpson is exact
            double d0 = diff(q), dm = diff(0.5 * (q + qn)), d1 = diff(qn);
            total += (qn - q) / 6.0 * (d0 * d0 + 4.0 * dm * dm + d1 * d1);
        }
        if (a.cum[ia] <= qn) ++ia;
        if (b.cum[ib] <= qn) ++ib;
        q = qn;
    }
    return total;
}

inline double w2_density(const GridMeasure& mu, const GridMeasure& nu) {
    return std::sqrt(std::max(w2_density_squared(mu, nu), 0.0));
}

// Exact gradient of w2_density_squared(rho, target) with respect to the cell
// masses of rho, gauged to zero in cell 0: the cell averages of the transport
// potential phi with phi' = 2 (y - T(y)), T the monotone map between the
// density views. This is the potential the slice solver feeds its fixed point.
inline std::vector<double> density_potential(const GridMeasure& rho, const GridMeasure& target) {
    require(rho.grid() == target.grid(), Err::GridMismatch, "potential needs a common grid");
    require(rho.strictly_positive(), Err::NonpositiveSource,
            "source density must be strictly positive");
    const Grid& g = rho.grid();
    detail::DensityPieces t = detail::density_pieces(target);

    std::vector<double> mean(g.n, 0.0);
    double phi = 0.0;   // phi at the current walk position
    double y = 0.0;     // current spatial position (inside cell i of rho)
    double F = 0.0;     // cumulative rho mass at y
    std::size_t j = 0;  // current target piece, F < t.cum[j]
    for (int i = 0; i < g.n; ++i) {
        const double edge = g.edge(i);
        const double di = rho.rho(i);
        double cell_integral = 0.0;
        while (y < edge - 1e-300) {
            while (j + 1 < t.cum.size() && F >= t.cum[j]) ++j;
            double tlo = (j == 0) ? 0.0 : t.cum[j - 1];
            // piece ends at the cell edge or where F reaches the target piece end
            double yb = edge;
            if (t.cum[j] < F + di * (edge - y)) yb = y + (t.cum[j] - F) / di;
            if (yb <= y) yb = edge;  // degenerate guard
            double L = yb - y;
            double c = t.xl[j] + (F - tlo) / t.rho[j];  // T(y)
            double s = di / t.rho[j];                   // dT/dy on the piece
            // phi(y+u) = phi + 2 (y - c) u + (1 - s) u^2
            cell_integral += phi * L + (y - c) * L * L + (1.0 - s) * L * L * L / 3.0;
            phi += 2.0 * (y - c) * L + (1.0 - s) * L * L;
            F += di * L;
            y = yb;
        }
        mean[i] = cell_integral / g.dx;
    }
    double gauge = mean[0];
    for (double& v : mean) v -= gauge;
    return mean;
}

// ---------------------------------------------------------------------------
// LP oracle: transportation simplex over couplings of the cell masses.
// ---------------------------------------------------------------------------

struct TransportPlan {
    std::vector<std::vector<double>> coupling;  // n x n masses
    double cost = 0.0;                          // sum coupling * |x_i - x_j|^2
};

namespace detail {

struct SimplexArc {
    int row = 0;
    int col = 0;
    double flow = 0.0;
};

inline TransportPlan transport_simplex(const GridMeasure& mu, const GridMeasure& nu) {
    const Grid& g = mu.grid();
    std::vector<int> rows, cols;
    std::vector<double> supply, demand;
    for (int i = 0; i < g.n; ++i) {
        if (mu.mass(i) > 0.0) {
            rows.push_back(i);
            supply.push_back(mu.mass(i));
        }
        if (nu.mass(i) > 0.0) {
            cols.push_back(i);
            demand.push_back(nu.mass(i));
        }
    }
    const int R = static_cast<int>(rows.size());
    const int C = static_cast<int>(cols.size());
    auto cost_of = [&](int r, int c) {
        double d = g.center(rows[r]) - g.center(cols[c]);
        return d * d;
    };

    // Perturbed copies guarantee nondegenerate pivots and hence termination;
    // flows are recomputed on the final basis with the true marginals.
    const double eps = 1e-11 / (R + 1);
    std::vector<double> ps(supply), pd(demand);
    double extra = 0.0;
    for (int r = 0; r < R; ++r) {
        ps[r] += eps * (r + 1);
        extra += eps * (r + 1);
    }
    pd[C - 1] += extra;

    // Northwest-corner start (equals the monotone matching on sorted data).
    std::vector<SimplexArc> basis;
    {
        std::vector<double> s(ps), d(pd);
        int r = 0, c = 0;
        while (r < R && c < C) {
            double f = std::min(s[r], d[c]);
            basis.push_back({r, c, f});
            s[r] -= f;
            d[c] -= f;
            if (s[r] <= d[c])
                ++r;
            else
                ++c;
        }
        while (static_cast<int>(basis.size()) < R + C - 1) basis.push_back({R - 1, C - 1, 0.0});
    }

    const int nodes = R + C;
    auto node_row = [](int r) { return r; };
    auto node_col = [&](int c) { return R + c; };

    const int max_pivots = 50 * (R + 1) * (C + 1);
    for (int pivot = 0;; ++pivot) {
        require(pivot < max_pivots, Err::NoConvergence, "transportation simplex stalled");

        // duals from the spanning tree
        std::vector<std::vector<int>> adj(nodes);
        for (int a = 0; a < static_cast<int>(basis.size()); ++a) {
            adj[node_row(basis[a].row)].push_back(a);
            adj[node_col(basis[a].col)].push_back(a);
        }
        std::vector<double> pot(nodes, 0.0);
        std::vector<char> known(nodes, 0);
        std::vector<int> stack{0};
        known[0] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int a : adj[u]) {
                int other = (node_row(basis[a].row) == u) ? node_col(basis[a].col)
                                                          : node_row(basis[a].row);
                if (!known[other]) {
                    known[other] = 1;
                    pot[other] = cost_of(basis[a].row, basis[a].col) - pot[u];
                    stack.push_back(other);
                }
            }
        }

        // entering arc: most negative reduced cost
        int er = -1, ec = -1;
        double best = -1e-12;
        for (int r = 0; r < R; ++r) {
            for (int c = 0; c < C; ++c) {
                double red = cost_of(r, c) - pot[node_row(r)] - pot[node_col(c)];
                if (red < best) {
                    best = red;
                    er = r;
                    ec = c;
                }
            }
        }
        if (er < 0) break;

        // cycle: tree path from the entering row node to the entering col node
        std::vector<int> parent_arc(nodes, -1), parent_node(nodes, -1);
        std::vector<char> seen(nodes, 0);
        std::vector<int> queue{node_row(er)};
        seen[node_row(er)] = 1;
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            int u = queue[qi];
            for (int a : adj[u]) {
                int other = (node_row(basis[a].row) == u) ? node_col(basis[a].col)
                                                          : node_row(basis[a].row);
                if (!seen[other]) {
                    seen[other] = 1;
                    parent_arc[other] = a;
                    parent_node[other] = u;
                    queue.push_back(other);
                }
            }
        }
        std::vector<int> path;  // arcs from col node back to row node
        for (int u = node_col(ec); u != node_row(er); u = parent_node[u])
            path.push_back(parent_arc[u]);

        // alternate signs along the cycle starting with + on the entering arc
        double theta = 1e300;
        for (std::size_t p = 0; p < path.size(); p += 2) theta = std::min(theta, basis[path[p]].flow);
        int leaving = -1;
        for (std::size_t p = 0; p < path.size(); ++p) {
            if (p % 2 == 0) {
                basis[path[p]].flow -= theta;
                if (leaving < 0 && basis[path[p]].flow <= 0.0) leaving = path[p];
            } else {
                basis[path[p]].flow += theta;
            }
        }
        basis[leaving] = {er, ec, theta};
    }

    // exact flows on the optimal tree with the unperturbed marginals
    {
        std::vector<double> residual(nodes, 0.0);
        for (int r = 0; r < R; ++r) residual[node_row(r)] = supply[r];
        for (int c = 0; c < C; ++c) residual[node_col(c)] = -demand[c];
        std::vector<std::vector<int>> adj(nodes);
        for (int a = 0; a < static_cast<int>(basis.size()); ++a) {
            adj[node_row(basis[a].row)].push_back(a);
            adj[node_col(basis[a].col)].push_back(a);
        }
        std::vector<int> degree(nodes, 0);
        std::vector<char> removed(basis.size(), 0);
        for (int u = 0; u < nodes; ++u) degree[u] = static_cast<int>(adj[u].size());
        std::vector<int> leaves;
        for (int u = 0; u < nodes; ++u)
            if (degree[u] == 1) leaves.push_back(u);
        for (std::size_t li = 0; li < leaves.size(); ++li) {
            int u = leaves[li];
            int arc = -1;
            for (int a : adj[u])
                if (!removed[a]) arc = a;
            if (arc < 0) continue;
            bool u_is_row = (node_row(basis[arc].row) == u);
            double f = u_is_row ? residual[u] : -residual[u];
            basis[arc].flow = std::max(f, 0.0);
            int other = u_is_row ? node_col(basis[arc].col) : node_row(basis[arc].row);
            residual[other] += residual[u];
            residual[u] = 0.0;
            removed[arc] = 1;
            if (--degree[other] == 1) leaves.push_back(other);
            degree[u] = 0;
        }
    }

    TransportPlan plan;
    plan.coupling.assign(g.n, std::vector<double>(g.n, 0.0));
    for (const SimplexArc& a : basis) {
        plan.coupling[rows[a.row]][cols[a.col]] += a.flow;
        plan.cost += a.flow * cost_of(a.row, a.col);
    }
    return plan;
}

}  // namespace detail

inline TransportPlan lp_oracle_plan(const GridMeasure& mu, const GridMeasure& nu) {
    require(mu.grid() == nu.grid(), Err::GridMismatch, "oracle needs a common grid");
    require(mu.grid().n <= 64, Err::OracleTooLarge, "LP oracle is capped at n <= 64");
    return detail::transport_simplex(mu, nu);
}

inline double lp_oracle_w2(const GridMeasure& mu, const GridMeasure& nu) {
    return std::sqrt(std::max(lp_oracle_plan(mu, nu).cost, 0.0));
}

}  // namespace jkoflow
