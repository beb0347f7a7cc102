#include "pgflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace pgflow {

double DiscreteMeasure::total_mass() const {
    long double s = 0;
    for (double v : w) s += v;
    return static_cast<double>(s);
}

double DiscreteMeasure::second_moment() const {
    long double s = 0;
    for (int i = 0; i < size(); ++i) s += (long double)w[i] * points[i].squaredNorm();
    return static_cast<double>(s);
}

void DiscreteMeasure::validate(double tol) const {
    if (points.size() != w.size())
        throw SizeError("DiscreteMeasure: points/weights length mismatch");
    for (double v : w)
        if (v < 0) throw SizeError("DiscreteMeasure: negative weight");
    if (std::abs(total_mass() - 1.0) > tol)
        throw SizeError("DiscreteMeasure: weights sum to " +
                        std::to_string(total_mass()));
}

std::vector<double> TransportPlan::row_sums() const {
    std::vector<double> r(n_source, 0.0);
    for (const auto& e : entries) r[e.i] += e.mass;
    return r;
}

std::vector<double> TransportPlan::col_sums() const {
    std::vector<double> c(n_target, 0.0);
    for (const auto& e : entries) c[e.j] += e.mass;
    return c;
}

double TransportPlan::recompute_cost(const DiscreteMeasure& mu,
                                     const DiscreteMeasure& nu) const {
    long double s = 0;
    for (const auto& e : entries)
        s += (long double)e.mass * (mu.points[e.i] - nu.points[e.j]).squaredNorm();
    return static_cast<double>(s);
}

// ---------------------------------------------------------------------------
// Transportation network simplex.
//
// Nodes 0..N-1 are sources with supplies a_i, N..N+M-1 sinks with demands
// b_j. The basis is a spanning tree of N+M-1 arcs; entering arcs are picked
// by a block search over reduced costs, duals are recomputed from the tree
// after each pivot. Supplies carry a graded 1e-15 perturbation against
// degenerate cycling; it is far below the 1e-10 marginal tolerance.

namespace {

struct Simplex {
    int N, M;
    const std::vector<Vec>* xs;
    const std::vector<Vec>* ys;
    std::vector<double> supply;   // perturbed a_i
    std::vector<double> demand;   // perturbed b_j

    struct Arc {
        int i, j;
        double flow;
    };
    std::vector<Arc> basis;            // tree arcs
    std::vector<std::vector<int>> adj; // node -> basis arc indices
    std::vector<double> u, v;          // duals
    std::vector<int> parent, parent_arc, order;

    double cost(int i, int j) const {
        return ((*xs)[i] - (*ys)[j]).squaredNorm();
    }

    void init_northwest() {
        basis.clear();
        std::vector<double> a = supply, b = demand;
        int i = 0, j = 0;
        while (i < N && j < M) {
            double f = std::min(a[i], b[j]);
            basis.push_back({i, j, f});
            a[i] -= f;
            b[j] -= f;
            bool advance_i = a[i] <= b[j];
            if (i == N - 1) advance_i = false;
            if (j == M - 1) advance_i = true;
            if (advance_i) {
                ++i;
            } else {
                ++j;
            }
        }
        while (static_cast<int>(basis.size()) < N + M - 1)
            basis.push_back({N - 1, M - 1, 0.0});
    }

    void rebuild_tree() {
        adj.assign(N + M, {});
        for (int k = 0; k < static_cast<int>(basis.size()); ++k) {
            adj[basis[k].i].push_back(k);
            adj[N + basis[k].j].push_back(k);
        }
        parent.assign(N + M, -1);
        parent_arc.assign(N + M, -1);
        order.clear();
        order.reserve(N + M);
        u.assign(N, 0.0);
        v.assign(M, 0.0);
        // BFS from the root source 0
        std::vector<int> stack = {0};
        std::vector<char> seen(N + M, 0);
        seen[0] = 1;
        while (!stack.empty()) {
            int node = stack.back();
            stack.pop_back();
            order.push_back(node);
            for (int k : adj[node]) {
                int other = (node < N) ? N + basis[k].j : basis[k].i;
                if (seen[other]) continue;
                seen[other] = 1;
                parent[other] = node;
                parent_arc[other] = k;
                if (other < N)
                    u[other] = cost(other, basis[k].j) - v[basis[k].j];
                else
                    v[other - N] = cost(basis[k].i, other - N) - u[basis[k].i];
                stack.push_back(other);
            }
        }
    }

    // returns number of pivots or throws SolverError
    long run(long max_pivots) {
        init_northwest();
        rebuild_tree();
        const double scale = [&] {
            double s = 1.0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j) s = std::max(s, cost(i, j));
            return s;
        }();
        const double tol = 1e-13 * scale;
        const long nm = static_cast<long>(N) * M;
        const long block = std::max<long>(64, static_cast<long>(std::sqrt((double)nm)));
        long cursor = 0;
        long pivots = 0;
        while (pivots < max_pivots) {
            // block search for the entering arc
            int bi = -1, bj = -1;
            double best = -tol;
            long scanned = 0;
            while (scanned < nm) {
                long stop = std::min(nm, cursor + block);
                for (long p = cursor; p < stop; ++p) {
                    int i = static_cast<int>(p / M), j = static_cast<int>(p % M);
                    double r = cost(i, j) - u[i] - v[j];
                    if (r < best) {
                        best = r;
                        bi = i;
                        bj = j;
                    }
                }
                scanned += stop - cursor;
                cursor = stop == nm ? 0 : stop;
                if (bi >= 0) break;
            }
            if (bi < 0) return pivots; // optimal
            pivot(bi, bj);
            ++pivots;
        }
        throw SolverError("network simplex: pivot cap exceeded");
    }

    void pivot(int si, int sj) {
        // cycle: entering arc (si,sj) plus the tree path sj -> si
        std::vector<int> path_nodes;
        {
            std::vector<int> from_i, from_j;
            std::vector<char> mark(N + M, 0);
            for (int n = si; n != -1; n = parent[n]) {
                from_i.push_back(n);
                mark[n] = 1;
            }
            int meet = N + sj;
            while (!mark[meet]) {
                from_j.push_back(meet);
                meet = parent[meet];
            }
            // nodes: si .. meet (upward), then down to sj
            for (int n : from_i) {
                path_nodes.push_back(n);
                if (n == meet) break;
            }
            for (auto it = from_j.rbegin(); it != from_j.rend(); ++it)
                path_nodes.push_back(*it);
        }
        // walk the cycle; arcs alternate sign starting with + on (si,sj)
        // path_nodes = si, ..., N+sj ; tree arcs connect consecutive nodes
        double theta = std::numeric_limits<double>::infinity();
        int leaving = -1;
        std::vector<std::pair<int, int>> touched; // (arc, sign)
        int sign = -1; // first tree arc (after entering) carries -theta
        for (size_t k = 0; k + 1 < path_nodes.size(); ++k) {
            int child = path_nodes[k], par = path_nodes[k + 1];
            int arc = (parent[child] == par) ? parent_arc[child] : parent_arc[par];
            touched.push_back({arc, sign});
            if (sign < 0 && basis[arc].flow < theta) {
                theta = basis[arc].flow;
                leaving = arc;
            }
            sign = -sign;
        }
        for (auto [arc, sg] : touched) basis[arc].flow += sg * theta;
        basis[leaving] = {si, sj, theta};
        rebuild_tree();
    }
};

struct Sorted1D {
    std::vector<double> x;
    std::vector<double> w;
};

Sorted1D sort_measure(const DiscreteMeasure& m) {
    std::vector<int> idx(m.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return m.points[a](0) < m.points[b](0);
    });
    Sorted1D s;
    s.x.reserve(m.size());
    s.w.reserve(m.size());
    for (int i : idx) {
        if (m.w[i] <= 0) continue;
        s.x.push_back(m.points[i](0));
        s.w.push_back(m.w[i]);
    }
    return s;
}

// Walk the common refinement of the quantile functions of two measures.
template <class F>
void walk2(const Sorted1D& a, const Sorted1D& b, F&& f) {
    size_t i = 0, j = 0;
    double ra = a.w.empty() ? 0 : a.w[0];
    double rb = b.w.empty() ? 0 : b.w[0];
    while (i < a.x.size() && j < b.x.size()) {
        double m = std::min(ra, rb);
        f(a.x[i], b.x[j], m, i, j);
        ra -= m;
        rb -= m;
        if (ra <= 1e-18 && i + 1 <= a.x.size()) {
            ++i;
            ra = i < a.x.size() ? a.w[i] : 0;
        }
        if (rb <= 1e-18 && j + 1 <= b.x.size()) {
            ++j;
            rb = j < b.x.size() ? b.w[j] : 0;
        }
    }
}

template <class F>
void walk3(const Sorted1D& a, const Sorted1D& b, const Sorted1D& c, F&& f) {
    size_t i = 0, j = 0, k = 0;
    double ra = a.w.empty() ? 0 : a.w[0];
    double rb = b.w.empty() ? 0 : b.w[0];
    double rc = c.w.empty() ? 0 : c.w[0];
    while (i < a.x.size() && j < b.x.size() && k < c.x.size()) {
        double m = std::min(ra, std::min(rb, rc));
        f(a.x[i], b.x[j], c.x[k], m);
        ra -= m;
        rb -= m;
        rc -= m;
        if (ra <= 1e-18) {
            ++i;
            ra = i < a.x.size() ? a.w[i] : 0;
        }
        if (rb <= 1e-18) {
            ++j;
            rb = j < b.x.size() ? b.w[j] : 0;
        }
        if (rc <= 1e-18) {
            ++k;
            rc = k < c.x.size() ? c.w[k] : 0;
        }
    }
}

} // namespace

WassersteinResult wasserstein(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              std::size_t max_entries) {
    const int N = mu.size(), M = nu.size();
    if (N == 0 || M == 0) throw SizeError("wasserstein: empty measure");
    if (static_cast<std::size_t>(N) * M > max_entries)
        throw SizeError("wasserstein: " + std::to_string((std::size_t)N * M) +
                        " entries exceed the solver cap; use the 1-D fast "
                        "path or subsample");

    Simplex sx;
    sx.N = N;
    sx.M = M;
    sx.xs = &mu.points;
    sx.ys = &nu.points;
    sx.supply = mu.w;
    sx.demand = nu.w;
    // graded anti-degeneracy perturbation, balanced on the last sink;
    // per-atom 1e-15 on small instances, total capped at 2e-11 on large ones
    const double pscale = std::min(1e-15, 4e-11 / ((double)N * (N + 1)));
    long double extra = 0;
    for (int i = 0; i < N; ++i) {
        double p = pscale * (i + 1);
        sx.supply[i] += p;
        extra += p;
    }
    sx.demand[M - 1] += static_cast<double>(extra);

    sx.run(16L * (N + M) * std::max(N, M) + 4096);

    WassersteinResult res;
    res.plan.n_source = N;
    res.plan.n_target = M;
    for (const auto& arc : sx.basis)
        if (arc.flow > 1e-15)
            res.plan.entries.push_back({arc.i, arc.j, arc.flow});
    res.plan.cost = res.plan.recompute_cost(mu, nu);
    res.distance = std::sqrt(std::max(res.plan.cost, 0.0));
    res.source_potential = sx.u;
    res.target_potential = sx.v;

    // complementary-slackness certificate against the recovered potentials
    double scale = 1.0;
    double neg = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) {
            double c = sx.cost(i, j);
            scale = std::max(scale, c);
            neg = std::min(neg, c - sx.u[i] - sx.v[j]);
        }
    res.max_negative_reduced_cost = -neg;
    double slack = 0.0;
    for (const auto& e : res.plan.entries)
        if (e.mass > 1e-13)
            slack = std::max(slack, std::abs(sx.cost(e.i, e.j) -
                                             sx.u[e.i] - sx.v[e.j]));
    res.worst_support_slackness = slack;
    double marg = 0.0;
    auto rows = res.plan.row_sums();
    auto cols = res.plan.col_sums();
    for (int i = 0; i < N; ++i) marg = std::max(marg, std::abs(rows[i] - mu.w[i]));
    for (int j = 0; j < M; ++j) marg = std::max(marg, std::abs(cols[j] - nu.w[j]));
    res.worst_marginal_error = marg;
    res.certified = res.max_negative_reduced_cost <= 1e-9 * scale &&
                    slack <= 1e-9 * scale && marg <= 1e-10;
    return res;
}

double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1)
        throw SizeError("wasserstein_1d: measures must be one-dimensional");
    Sorted1D a = sort_measure(mu), b = sort_measure(nu);
    long double cost = 0;
    walk2(a, b, [&](double x, double y, double m, size_t, size_t) {
        cost += (long double)m * (x - y) * (x - y);
    });
    return std::sqrt(std::max<double>(0.0, static_cast<double>(cost)));
}

double wasserstein_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu) {
    if (mu.dim() == 1) return wasserstein_1d(mu, nu);
    return wasserstein(mu, nu).distance;
}

std::vector<Vec> optimal_map(const DiscreteMeasure& base,
                             const DiscreteMeasure& target) {
    const int N = base.size();
    std::vector<Vec> t(N, Vec::Zero(base.dim()));
    std::vector<double> acc(N, 0.0);
    if (base.dim() == 1) {
        // monotone rearrangement; barycentric value where an atom splits
        std::vector<int> idx(N);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return base.points[a](0) < base.points[b](0);
        });
        Sorted1D a;
        for (int i : idx) {
            a.x.push_back(base.points[i](0));
            a.w.push_back(base.w[i]);
        }
        Sorted1D b = sort_measure(target);
        walk2(a, b, [&](double, double y, double m, size_t i, size_t) {
            acc[idx[i]] += m;
            t[idx[i]](0) += m * y;
        });
    } else {
        auto res = wasserstein(base, target);
        for (const auto& e : res.plan.entries) {
            t[e.i] += e.mass * target.points[e.j];
            acc[e.i] += e.mass;
        }
    }
    for (int i = 0; i < N; ++i) {
        if (acc[i] > 0) t[i] /= acc[i];
        else t[i] = base.points[i];
    }
    return t;
}

double pseudo_wasserstein(const DiscreteMeasure& base,
                          const DiscreteMeasure& mu1,
                          const DiscreteMeasure& mu2) {
    if (base.dim() == 1) {
        // fragment-exact: optimal 1-D maps couple quantiles
        Sorted1D v = sort_measure(base), a = sort_measure(mu1),
                 b = sort_measure(mu2);
        long double s = 0;
        walk3(v, a, b, [&](double, double xa, double xb, double m) {
            s += (long double)m * (xa - xb) * (xa - xb);
        });
        return std::sqrt(std::max<double>(0.0, static_cast<double>(s)));
    }
    std::vector<Vec> t1 = optimal_map(base, mu1);
    std::vector<Vec> t2 = optimal_map(base, mu2);
    long double s = 0;
    for (int i = 0; i < base.size(); ++i)
        s += (long double)base.w[i] * (t1[i] - t2[i]).squaredNorm();
    return std::sqrt(std::max<double>(0.0, static_cast<double>(s)));
}

DiscreteMeasure generalized_geodesic(const DiscreteMeasure& base,
                                     const DiscreteMeasure& mu,
                                     const DiscreteMeasure& e, double s) {
    if (s < 0 || s > 1)
        throw SizeError("generalized_geodesic: s outside [0,1]");
    DiscreteMeasure out;
    if (base.dim() == 1) {
        Sorted1D v = sort_measure(base), a = sort_measure(mu),
                 b = sort_measure(e);
        walk3(v, a, b, [&](double, double xa, double xb, double m) {
            Vec p(1);
            p(0) = (1 - s) * xa + s * xb;
            out.points.push_back(p);
            out.w.push_back(m);
        });
        return out;
    }
    std::vector<Vec> tm = optimal_map(base, mu);
    std::vector<Vec> te = optimal_map(base, e);
    for (int i = 0; i < base.size(); ++i) {
        out.points.push_back((1 - s) * tm[i] + s * te[i]);
        out.w.push_back(base.w[i]);
    }
    return out;
}

bool minkowski_density_check(const std::vector<Vec>& A_samples,
                             const std::vector<Vec>& B_samples,
                             double rel_tol) {
    if (A_samples.empty() || B_samples.empty())
        throw SizeError("minkowski_density_check: empty cloud");
    const int d = static_cast<int>(A_samples[0].size());

    auto voxel_volume = [&](const std::vector<Vec>& pts, double hx) {
        Vec shift = pts[0];
        for (const Vec& p : pts) shift = shift.cwiseMin(p);
        std::unordered_map<long long, char> occ;
        occ.reserve(pts.size() * 2);
        for (const Vec& p : pts) {
            long long key = 0;
            for (int k = 0; k < d; ++k) {
                long long c = static_cast<long long>(std::floor((p(k) - shift(k)) / hx)) + 1;
                key = key * (1LL << 21) + c;
            }
            occ[key] = 1;
        }
        return occ.size() * std::pow(hx, d);
    };

    // common voxel size from the spread of A+B
    Vec lo = A_samples[0] + B_samples[0], hi = lo;
    std::vector<Vec> sum;
    sum.reserve(A_samples.size() * B_samples.size());
    for (const Vec& a : A_samples)
        for (const Vec& b : B_samples) {
            Vec p = a + b;
            sum.push_back(p);
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    double hx = std::max((hi - lo).maxCoeff() / 96.0, 1e-9);

    double va = voxel_volume(A_samples, hx);
    double vb = voxel_volume(B_samples, hx);
    double vs = voxel_volume(sum, hx);
    double lhs = std::pow(vs, 1.0 / d);
    double rhs = std::pow(va, 1.0 / d) + std::pow(vb, 1.0 / d);
    return lhs >= rhs * (1.0 - rel_tol);
}

} // namespace pgflow
