#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "pgflow/transport.hpp"

using namespace pgflow;

namespace {

Vec v1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

DiscreteMeasure random_measure(std::mt19937_64& rng, int n, int d,
                               double box = 2.0) {
    std::uniform_real_distribution<double> u(-box, box), w(0.1, 1.0);
    DiscreteMeasure m;
    double tot = 0;
    for (int i = 0; i < n; ++i) {
        Vec p(d);
        for (int k = 0; k < d; ++k) p(k) = u(rng);
        m.points.push_back(p);
        m.w.push_back(w(rng));
        tot += m.w.back();
    }
    for (double& x : m.w) x /= tot;
    return m;
}

} // namespace

TEST_CASE("wasserstein basics") {
    DiscreteMeasure mu{{v2(0, 0), v2(1, 1)}, {0.5, 0.5}};
    auto same = wasserstein(mu, mu);
    CHECK(same.distance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(same.certified);
    // cost-zero plan is supported on identical points only
    for (const auto& e : same.plan.entries)
        CHECK((mu.points[e.i] - mu.points[e.j]).norm() <= 1e-12);

    DiscreteMeasure da{{v2(0, 0)}, {1.0}}, db{{v2(3, 4)}, {1.0}};
    CHECK(wasserstein(da, db).distance == doctest::Approx(5.0));

    // two-atom instance against coupling enumeration
    DiscreteMeasure m1{{v1(0.0), v1(1.0)}, {0.5, 0.5}};
    DiscreteMeasure m2{{v1(0.1), v1(0.9)}, {0.5, 0.5}};
    // couplings: diagonal (cost 0.01) vs anti-diagonal (cost 0.5*0.81+0.5*0.81)
    double diag = 0.5 * 0.01 + 0.5 * 0.01;
    double anti = 0.5 * 0.81 + 0.5 * 0.81;
    auto res = wasserstein(m1, m2);
    CHECK(res.plan.cost == doctest::Approx(std::min(diag, anti)).epsilon(1e-12));
    CHECK(res.distance == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("wasserstein: certification and marginals on random instances") {
    std::mt19937_64 rng(5);
    for (int it = 0; it < 60; ++it) {
        DiscreteMeasure mu = random_measure(rng, 3 + it % 37, 1 + it % 3);
        DiscreteMeasure nu = random_measure(rng, 5 + (it * 7) % 31, mu.dim());
        auto res = wasserstein(mu, nu);
        CHECK(res.certified);
        CHECK(res.worst_marginal_error <= 1e-10);
        auto rows = res.plan.row_sums();
        for (int i = 0; i < mu.size(); ++i)
            CHECK(rows[i] == doctest::Approx(mu.w[i]).epsilon(1e-9));
        CHECK(res.plan.recompute_cost(mu, nu) ==
              doctest::Approx(res.plan.cost).epsilon(1e-10));
    }
}

TEST_CASE("wasserstein: triangle inequality on random triples") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 40; ++it) {
        int d = 1 + it % 2;
        DiscreteMeasure a = random_measure(rng, 12, d);
        DiscreteMeasure b = random_measure(rng, 9, d);
        DiscreteMeasure c = random_measure(rng, 15, d);
        double ab = wasserstein(a, b).distance;
        double bc = wasserstein(b, c).distance;
        double ac = wasserstein(a, c).distance;
        CHECK(ac <= ab + bc + 1e-8);
    }
}

TEST_CASE("1-D quantile path equals the LP") {
    std::mt19937_64 rng(9);
    for (int it = 0; it < 200; ++it) {
        DiscreteMeasure mu = random_measure(rng, 2 + it % 49, 1);
        DiscreteMeasure nu = random_measure(rng, 2 + (3 * it) % 49, 1);
        double fast = wasserstein_1d(mu, nu);
        double lp = wasserstein(mu, nu).distance;
        CHECK(fast == doctest::Approx(lp).epsilon(1e-10));
    }
    // point masses and shifted uniform grids
    CHECK(wasserstein_1d({{v1(-1)}, {1.0}}, {{v1(2)}, {1.0}}) ==
          doctest::Approx(3.0));
    DiscreteMeasure g1, g2;
    for (int i = 0; i < 20; ++i) {
        g1.points.push_back(v1(i * 0.05));
        g2.points.push_back(v1(i * 0.05 + 0.7));
        g1.w.push_back(0.05);
        g2.w.push_back(0.05);
    }
    CHECK(wasserstein_1d(g1, g2) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("optimal maps in one dimension") {
    // identity
    DiscreteMeasure base;
    for (int i = 0; i < 50; ++i) {
        base.points.push_back(v1((i + 0.5) / 50));
        base.w.push_back(1.0 / 50);
    }
    auto tid = optimal_map(base, base);
    for (int i = 0; i < base.size(); ++i)
        CHECK(tid[i](0) == doctest::Approx(base.points[i](0)).epsilon(1e-12));

    // translation of an identical shape
    DiscreteMeasure target = base;
    for (auto& p : target.points) p(0) += 2.0;
    auto tshift = optimal_map(base, target);
    for (int i = 0; i < base.size(); ++i)
        CHECK(tshift[i](0) ==
              doctest::Approx(base.points[i](0) + 2.0).epsilon(1e-12));

    // uniform base onto two atoms: step map, cost from a quadrature oracle
    DiscreteMeasure atoms{{v1(0.0), v1(1.0)}, {0.5, 0.5}};
    auto tstep = optimal_map(base, atoms);
    double cost = 0;
    for (int i = 0; i < base.size(); ++i) {
        double x = base.points[i](0);
        CHECK(tstep[i](0) == doctest::Approx(x < 0.5 ? 0.0 : 1.0));
        cost += base.w[i] * (tstep[i](0) - x) * (tstep[i](0) - x);
    }
    // quadrature of int |t(x)-x|^2 dx over [0,1] with t the step map
    double quad = 0;
    int nq = 20000;
    for (int q = 0; q < nq; ++q) {
        double x = (q + 0.5) / nq;
        double tx = x < 0.5 ? 0.0 : 1.0;
        quad += (tx - x) * (tx - x) / nq;
    }
    CHECK(quad == doctest::Approx(1.0 / 12).epsilon(1e-6));
    CHECK(cost == doctest::Approx(quad).epsilon(1e-3));
}

TEST_CASE("pseudo-Wasserstein: shift example with the explicit maps") {
    const double e = 0.01;
    DiscreteMeasure base{{v2(-1, 0), v2(1, 0)}, {0.5, 0.5}};
    DiscreteMeasure mu1{{v2(-e, 1), v2(e, -1)}, {0.5, 0.5}};
    DiscreteMeasure mu2{{v2(e, 1), v2(-e, -1)}, {0.5, 0.5}};

    // optimal assignments, written out: (1,0) -> (e,-1), (-1,0) -> (-e,1)
    // for mu1 and (1,0) -> (e,1), (-1,0) -> (-e,-1) for mu2
    auto t1 = optimal_map(base, mu1);
    auto t2 = optimal_map(base, mu2);
    CHECK((t1[0] - v2(-e, 1)).norm() <= 1e-12);
    CHECK((t1[1] - v2(e, -1)).norm() <= 1e-12);
    CHECK((t2[0] - v2(-e, -1)).norm() <= 1e-12);
    CHECK((t2[1] - v2(e, 1)).norm() <= 1e-12);

    double dv = pseudo_wasserstein(base, mu1, mu2);
    CHECK(dv * dv == doctest::Approx(4.0).epsilon(1e-13));

    // while the measures themselves are 2 eps apart
    CHECK(wasserstein(mu1, mu2).distance == doctest::Approx(2 * e));
}

TEST_CASE("pseudo-Wasserstein dominates Wasserstein") {
    std::mt19937_64 rng(13);
    for (int it = 0; it < 100; ++it) {
        DiscreteMeasure base = random_measure(rng, 40, 1);
        DiscreteMeasure m1 = random_measure(rng, 7 + it % 13, 1);
        DiscreteMeasure m2 = random_measure(rng, 5 + it % 17, 1);
        double dv = pseudo_wasserstein(base, m1, m2);
        double dw = wasserstein(m1, m2).distance;
        CHECK(dv >= dw - 1e-9);
    }
    // d >= 2 with barycentric maps
    for (int it = 0; it < 20; ++it) {
        DiscreteMeasure base = random_measure(rng, 25, 2);
        DiscreteMeasure m1 = random_measure(rng, 9, 2);
        DiscreteMeasure m2 = random_measure(rng, 11, 2);
        CHECK(pseudo_wasserstein(base, m1, m2) >= -1e-12);
    }
}

TEST_CASE("generalized geodesic: endpoints, constant speed, density bound") {
    std::mt19937_64 rng(17);
    // nonuniform absolutely-continuous proxy base on [0,1]
    DiscreteMeasure base;
    int nb = 400;
    double tot = 0;
    for (int i = 0; i < nb; ++i) {
        double x = (i + 0.5) / nb;
        base.points.push_back(v1(x));
        base.w.push_back(std::exp(-3 * (x - 0.4) * (x - 0.4)));
        tot += base.w.back();
    }
    for (double& w : base.w) w /= tot;

    // uniform proxy for the Euclidean measure on [0,1]
    DiscreteMeasure e;
    int ne = 500;
    for (int i = 0; i < ne; ++i) {
        e.points.push_back(v1((i + 0.5) / ne));
        e.w.push_back(1.0 / ne);
    }

    // narrow spike near 0.5
    DiscreteMeasure mu{{v1(0.499), v1(0.5), v1(0.501)}, {0.3, 0.4, 0.3}};

    CHECK(wasserstein_1d(generalized_geodesic(base, mu, e, 0.0).points.size()
                             ? generalized_geodesic(base, mu, e, 0.0)
                             : mu,
                         mu) <= 1e-12);
    CHECK(wasserstein_1d(generalized_geodesic(base, mu, e, 1.0), e) <= 1e-12);

    double dme = pseudo_wasserstein(base, mu, e);
    for (double s : {0.1, 0.2, 0.4}) {
        DiscreteMeasure ms = generalized_geodesic(base, mu, e, s);
        double d = pseudo_wasserstein(base, mu, ms);
        CHECK(d == doctest::Approx(s * dme).epsilon(1e-6));

        // binned density bound s^{-1} (1 + tol), bin width >> atom spacing
        const double bin = 0.05;
        std::vector<double> hist(static_cast<int>(1.0 / bin) + 1, 0.0);
        for (int i = 0; i < ms.size(); ++i) {
            int b = static_cast<int>(ms.points[i](0) / bin);
            if (b >= 0 && b < static_cast<int>(hist.size()))
                hist[b] += ms.w[i];
        }
        for (double hmass : hist)
            CHECK(hmass / bin <= (1.0 / s) * 1.05);
    }
    (void)rng;
}

TEST_CASE("Brunn-Minkowski voxel check") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u01(0, 1);

    // unit boxes: equality case vol(A+B)^{1/d} = 2
    std::vector<Vec> boxA, boxB;
    for (int i = 0; i < 1200; ++i) {
        boxA.push_back(v2(u01(rng), u01(rng)));
        boxB.push_back(v2(u01(rng), u01(rng)));
    }
    CHECK(minkowski_density_check(boxA, boxB));

    // balls of radius 1 and 2: homothetic equality case
    auto ball_cloud = [&](double r, int n) {
        std::vector<Vec> pts;
        while (static_cast<int>(pts.size()) < n) {
            Vec p = v2(2 * u01(rng) - 1, 2 * u01(rng) - 1);
            if (p.norm() <= 1.0) pts.push_back(r * p);
        }
        return pts;
    };
    CHECK(minkowski_density_check(ball_cloud(1.0, 900), ball_cloud(2.0, 900)));

    // random ellipses (affine disks): 50 trials
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Matrix2d A, B;
        A << 1 + u01(rng), 0.5 * g(rng), 0.5 * g(rng), 1 + u01(rng);
        B << 1 + u01(rng), 0.5 * g(rng), 0.5 * g(rng), 1 + u01(rng);
        std::vector<Vec> ca, cb;
        for (const Vec& p : ball_cloud(1.0, 500)) ca.push_back(A * p);
        for (const Vec& p : ball_cloud(1.0, 500)) cb.push_back(B * p);
        CHECK(minkowski_density_check(ca, cb));
    }
}

TEST_CASE("size cap and validation errors") {
    DiscreteMeasure tiny{{v1(0)}, {1.0}};
    CHECK_THROWS_AS(wasserstein(tiny, tiny, 0), SizeError);
    DiscreteMeasure bad{{v1(0)}, {0.5}};
    CHECK_THROWS_AS(bad.validate(), SizeError);
}
