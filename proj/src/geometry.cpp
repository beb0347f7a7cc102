#include "pgflow/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace pgflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

Vec fd_gradient(const MovingDomain& dom, const Vec& x, double t) {
    const double h = 1e-6 * std::max(1.0, x.norm());
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (int k = 0; k < x.size(); ++k) {
        xp(k) += h;
        xm(k) -= h;
        g(k) = (dom.signed_distance(xp, t) - dom.signed_distance(xm, t)) / (2 * h);
        xp(k) = x(k);
        xm(k) = x(k);
    }
    return g;
}

} // namespace

MovingDomain::MovingDomain(int dim, double prox_radius, double lipschitz)
    : dim_(dim), prox_radius_(prox_radius), lipschitz_(lipschitz) {}

Vec MovingDomain::outward_normal(const Vec& x, double t) const {
    Vec g = fd_gradient(*this, x, t);
    double n = g.norm();
    if (n < 1e-14) {
        Vec e = Vec::Zero(dim_);
        e(0) = 1.0;
        return e;
    }
    return g / n;
}

Vec MovingDomain::closest_boundary_point(const Vec& x, double t) const {
    // Signed-distance gradient walk; catalog entries override with exact or
    // Newton-polished versions.
    Vec y = x;
    for (int it = 0; it < 100; ++it) {
        double d = signed_distance(y, t);
        if (std::abs(d) < 1e-13 * std::max(1.0, x.norm())) break;
        y -= d * outward_normal(y, t);
    }
    return y;
}

double MovingDomain::boundary_band(double t) const {
    double diam = clamp(bounding_box(t).diameter(), 1.0, 1e6);
    return 1e-9 * diam;
}

Vec MovingDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    Box bb = bounding_box(t);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto sample_box = [&]() {
        Vec p(dim_);
        for (int k = 0; k < dim_; ++k)
            p(k) = bb.lo(k) + u01(rng) * (bb.hi(k) - bb.lo(k));
        return p;
    };
    for (int attempt = 0; attempt < 256; ++attempt) {
        Vec inside = sample_box();
        if (!contains(inside, t)) continue;
        Vec outside = sample_box();
        if (contains(outside, t)) continue;
        // bisect the segment to the boundary
        Vec a = inside, b = outside;
        for (int it = 0; it < 80; ++it) {
            Vec m = 0.5 * (a + b);
            (contains(m, t) ? a : b) = m;
        }
        return 0.5 * (a + b);
    }
    throw DomainError("sample_boundary: could not bracket the boundary");
}

// ---------------------------------------------------------------------------
// BallDomain

BallDomain::BallDomain(Vec center, double radius0, double rate,
                       double prox_radius)
    : MovingDomain(static_cast<int>(center.size()),
                   prox_radius > 0 ? prox_radius : radius0, std::abs(rate)),
      center_(std::move(center)), radius0_(radius0), rate_(rate) {}

double BallDomain::signed_distance(const Vec& x, double t) const {
    return (x - center_).norm() - radius(t);
}

Vec BallDomain::outward_normal(const Vec& x, double t) const {
    (void)t;
    Vec d = x - center_;
    double n = d.norm();
    if (n < 1e-14) {
        Vec e = Vec::Zero(dim_);
        e(0) = 1.0;
        return e;
    }
    return d / n;
}

double BallDomain::boundary_speed(const Vec&, double) const { return rate_; }

Vec BallDomain::closest_boundary_point(const Vec& x, double t) const {
    Vec d = x - center_;
    double n = d.norm();
    if (n < 1e-14) {
        Vec e = Vec::Zero(dim_);
        e(0) = radius(t);
        return center_ + e;
    }
    return center_ + d * (radius(t) / n);
}

Box BallDomain::bounding_box(double t) const {
    double r = radius(t);
    return {center_.array() - r, center_.array() + r};
}

Vec BallDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec d(dim_);
    do {
        for (int k = 0; k < dim_; ++k) d(k) = g(rng);
    } while (d.norm() < 1e-12);
    return center_ + d * (radius(t) / d.norm());
}

// ---------------------------------------------------------------------------
// BoxDomain

BoxDomain::BoxDomain(Vec lo0, Vec hi0, Vec lo_rate, Vec hi_rate,
                     double prox_radius)
    : MovingDomain(static_cast<int>(lo0.size()),
                   // any r works for a convex set; the default keeps the
                   // retraction's interior tube inside the box
                   prox_radius > 0 ? prox_radius
                                   : 0.5 * (hi0 - lo0).minCoeff(),
                   std::max(lo_rate.cwiseAbs().maxCoeff(),
                            hi_rate.cwiseAbs().maxCoeff())),
      lo0_(std::move(lo0)), hi0_(std::move(hi0)),
      lo_rate_(std::move(lo_rate)), hi_rate_(std::move(hi_rate)) {}

BoxDomain BoxDomain::stationary(Vec lo, Vec hi, double prox_radius) {
    Vec z = Vec::Zero(lo.size());
    return BoxDomain(std::move(lo), std::move(hi), z, z, prox_radius);
}

double BoxDomain::signed_distance(const Vec& x, double t) const {
    Vec l = lo(t), h = hi(t);
    double inside = -1e300;
    double out2 = 0.0;
    for (int k = 0; k < dim_; ++k) {
        double dk = std::max(l(k) - x(k), x(k) - h(k));
        inside = std::max(inside, dk);
        if (dk > 0) out2 += dk * dk;
    }
    return inside <= 0 ? inside : std::sqrt(out2);
}

Vec BoxDomain::closest_boundary_point(const Vec& x, double t) const {
    Vec l = lo(t), h = hi(t);
    bool inside = true;
    for (int k = 0; k < dim_; ++k)
        if (x(k) < l(k) || x(k) > h(k)) inside = false;
    Vec y = x;
    if (!inside) {
        for (int k = 0; k < dim_; ++k) y(k) = clamp(x(k), l(k), h(k));
        return y;
    }
    // snap the coordinate with the smallest face distance
    int kb = 0;
    double best = 1e300;
    double target = 0;
    for (int k = 0; k < dim_; ++k) {
        if (x(k) - l(k) < best) { best = x(k) - l(k); kb = k; target = l(k); }
        if (h(k) - x(k) < best) { best = h(k) - x(k); kb = k; target = h(k); }
    }
    y(kb) = target;
    return y;
}

Vec BoxDomain::outward_normal(const Vec& x, double t) const {
    Vec l = lo(t), h = hi(t);
    bool inside = signed_distance(x, t) <= 0;
    Vec n = Vec::Zero(dim_);
    if (!inside) {
        for (int k = 0; k < dim_; ++k)
            n(k) = std::max(l(k) - x(k), 0.0) > 0 ? -(l(k) - x(k))
                 : std::max(x(k) - h(k), 0.0) > 0 ? (x(k) - h(k)) : 0.0;
        double m = n.norm();
        return m > 1e-14 ? Vec(n / m) : outward_normal(closest_boundary_point(x, t), t);
    }
    int kb = 0;
    double best = 1e300;
    double sign = -1;
    for (int k = 0; k < dim_; ++k) {
        if (x(k) - l(k) < best) { best = x(k) - l(k); kb = k; sign = -1; }
        if (h(k) - x(k) < best) { best = h(k) - x(k); kb = k; sign = 1; }
    }
    n(kb) = sign;
    return n;
}

double BoxDomain::boundary_speed(const Vec& x, double t) const {
    // speed of the face nearest to x, positive when that face moves outward
    Vec l = lo(t), h = hi(t);
    int kb = 0;
    double best = 1e300;
    bool low_face = true;
    for (int k = 0; k < dim_; ++k) {
        if (std::abs(x(k) - l(k)) < best) { best = std::abs(x(k) - l(k)); kb = k; low_face = true; }
        if (std::abs(h(k) - x(k)) < best) { best = std::abs(h(k) - x(k)); kb = k; low_face = false; }
    }
    return low_face ? -lo_rate_(kb) : hi_rate_(kb);
}

Box BoxDomain::bounding_box(double t) const { return {lo(t), hi(t)}; }

Vec BoxDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    Vec l = lo(t), h = hi(t);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_int_distribution<int> face(0, 2 * dim_ - 1);
    Vec p(dim_);
    for (int k = 0; k < dim_; ++k) p(k) = l(k) + u01(rng) * (h(k) - l(k));
    int f = face(rng);
    p(f / 2) = (f % 2 == 0) ? l(f / 2) : h(f / 2);
    return p;
}

// ---------------------------------------------------------------------------
// HalfSpaceDomain

HalfSpaceDomain::HalfSpaceDomain(Vec normal, double offset, double prox_radius)
    : MovingDomain(static_cast<int>(normal.size()), prox_radius, 0.0),
      normal_(normal / normal.norm()), offset_(offset) {}

double HalfSpaceDomain::signed_distance(const Vec& x, double t) const {
    (void)t;
    return normal_.dot(x) - offset_;
}

Vec HalfSpaceDomain::outward_normal(const Vec&, double) const { return normal_; }

Vec HalfSpaceDomain::closest_boundary_point(const Vec& x, double t) const {
    return x - signed_distance(x, t) * normal_;
}

Box HalfSpaceDomain::bounding_box(double t) const {
    (void)t;
    const double b = 1e3; // unbounded set; clipped box for sampling/bands
    Vec lo = Vec::Constant(dim_, -b), hi = Vec::Constant(dim_, b);
    return {lo, hi};
}

Vec HalfSpaceDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    (void)t;
    std::normal_distribution<double> g(0.0, 1.0);
    Vec p(dim_);
    for (int k = 0; k < dim_; ++k) p(k) = g(rng);
    p -= normal_.dot(p) * normal_;          // tangential part
    return p + offset_ * normal_;
}

// ---------------------------------------------------------------------------
// CosineDomain

CosineDomain::CosineDomain(double prox_radius)
    : MovingDomain(2, prox_radius, 0.0) {}

namespace {

// 0.5 * squared distance from (px,py) to the graph point (s, cos(2 pi s))
double cos_obj_deriv(double s, double px, double py) {
    double c = std::cos(2 * kPi * s), sn = std::sin(2 * kPi * s);
    return (s - px) - 2 * kPi * sn * (c - py);
}

double cos_obj(double s, double px, double py) {
    double c = std::cos(2 * kPi * s);
    return 0.5 * ((s - px) * (s - px) + (c - py) * (c - py));
}

} // namespace

double CosineDomain::nearest_graph_parameter(const Vec& x) const {
    const double px = x(0), py = x(1);
    // Any s with |s - px| > |py - cos(2 pi px)| is beaten by the vertical
    // candidate, so a window of that half-width suffices.
    double w = std::min(std::abs(py - std::cos(2 * kPi * px)) + 0.75, 50.0);
    const int n = std::max(16, static_cast<int>(96 * w));
    double best_s = px, best_f = cos_obj(px, px, py);
    for (int i = 0; i <= n; ++i) {
        double s = px - w + 2 * w * i / n;
        double f = cos_obj(s, px, py);
        if (f < best_f) { best_f = f; best_s = s; }
    }
    // Newton polish on the derivative of the squared distance
    double s = best_s;
    for (int it = 0; it < 60; ++it) {
        double c = std::cos(2 * kPi * s), sn = std::sin(2 * kPi * s);
        double g = (s - px) - 2 * kPi * sn * (c - py);
        double gp = 1.0 + 4 * kPi * kPi * (sn * sn - c * (c - py));
        if (std::abs(gp) < 1e-12) break;
        double step = g / gp;
        s -= step;
        if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(s))) break;
    }
    if (cos_obj(s, px, py) > best_f + 1e-18) s = best_s;
    return s;
}

double CosineDomain::signed_distance(const Vec& x, double t) const {
    (void)t;
    double s = nearest_graph_parameter(x);
    double dx = x(0) - s, dy = x(1) - std::cos(2 * kPi * s);
    double d = std::sqrt(dx * dx + dy * dy);
    bool inside = x(1) >= std::cos(2 * kPi * x(0));
    return inside ? -d : d;
}

Vec CosineDomain::outward_normal(const Vec& x, double t) const {
    (void)t;
    double s = nearest_graph_parameter(x);
    double sn = std::sin(2 * kPi * s);
    Vec n(2);
    n << -2 * kPi * sn, -1.0;
    return n / n.norm();
}

Vec CosineDomain::closest_boundary_point(const Vec& x, double t) const {
    (void)t;
    double s = nearest_graph_parameter(x);
    Vec y(2);
    y << s, std::cos(2 * kPi * s);
    return y;
}

Box CosineDomain::bounding_box(double t) const {
    (void)t;
    Vec lo(2), hi(2);
    lo << -1e3, -1.0;
    hi << 1e3, 1e3;
    return {lo, hi};
}

Vec CosineDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    (void)t;
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double s = u(rng);
    Vec p(2);
    p << s, std::cos(2 * kPi * s);
    return p;
}

// ---------------------------------------------------------------------------
// PolytopeDomain

PolytopeDomain::PolytopeDomain(Eigen::MatrixXd A, Vec b, double prox_radius)
    : MovingDomain(static_cast<int>(A.cols()), prox_radius, 0.0),
      A_(std::move(A)), b_(std::move(b)) {
    for (int i = 0; i < A_.rows(); ++i) {
        double n = A_.row(i).norm();
        A_.row(i) /= n;
        b_(i) /= n;
    }
}

Vec PolytopeDomain::project_inside(const Vec& x) const {
    // Dykstra's alternating projections onto the half-spaces
    const int m = static_cast<int>(A_.rows());
    Vec y = x;
    Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(m, dim_);
    for (int sweep = 0; sweep < 200; ++sweep) {
        double moved = 0.0;
        for (int i = 0; i < m; ++i) {
            Vec z = y + corr.row(i).transpose();
            double viol = A_.row(i).dot(z) - b_(i);
            Vec ynew = viol > 0 ? Vec(z - viol * A_.row(i).transpose()) : z;
            corr.row(i) = (z - ynew).transpose();
            moved += (ynew - y).norm();
            y = ynew;
        }
        if (moved < 1e-14 * std::max(1.0, x.norm())) break;
    }
    return y;
}

double PolytopeDomain::signed_distance(const Vec& x, double t) const {
    (void)t;
    double worst = -1e300;
    for (int i = 0; i < A_.rows(); ++i)
        worst = std::max(worst, A_.row(i).dot(x) - b_(i));
    if (worst <= 0) return worst; // interior: exact distance to nearest face
    return (x - project_inside(x)).norm();
}

Vec PolytopeDomain::closest_boundary_point(const Vec& x, double t) const {
    (void)t;
    double worst = -1e300;
    int iw = 0;
    for (int i = 0; i < A_.rows(); ++i) {
        double v = A_.row(i).dot(x) - b_(i);
        if (v > worst) { worst = v; iw = i; }
    }
    if (worst > 0) return project_inside(x);
    return x - worst * A_.row(iw).transpose();
}

Vec PolytopeDomain::outward_normal(const Vec& x, double t) const {
    (void)t;
    double worst = -1e300;
    int iw = 0;
    for (int i = 0; i < A_.rows(); ++i) {
        double v = A_.row(i).dot(x) - b_(i);
        if (v > worst) { worst = v; iw = i; }
    }
    if (worst > 1e-12) {
        Vec p = project_inside(x);
        Vec d = x - p;
        if (d.norm() > 1e-13) return d / d.norm();
    }
    return A_.row(iw).transpose();
}

Box PolytopeDomain::bounding_box(double t) const {
    (void)t;
    // support estimates from projections of far probe points per axis
    Vec lo(dim_), hi(dim_);
    Vec center = project_inside(Vec::Zero(dim_));
    for (int k = 0; k < dim_; ++k) {
        Vec probe = center;
        probe(k) += 1e3;
        hi(k) = project_inside(probe)(k);
        probe(k) -= 2e3;
        lo(k) = project_inside(probe)(k);
        double pad = 0.05 * (hi(k) - lo(k)) + 1e-9;
        hi(k) += pad;
        lo(k) -= pad;
    }
    return {lo, hi};
}

Vec PolytopeDomain::sample_boundary(double t, std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> face(0, static_cast<int>(A_.rows()) - 1);
    Box bb = bounding_box(t);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int attempt = 0; attempt < 4096; ++attempt) {
        int i = face(rng);
        Vec p(dim_);
        for (int k = 0; k < dim_; ++k)
            p(k) = -3.0 + 6.0 * u01(rng);
        p -= (A_.row(i).dot(p) - b_(i)) * A_.row(i).transpose();
        bool ok = true;
        for (int j = 0; j < A_.rows(); ++j)
            if (A_.row(j).dot(p) - b_(j) > 1e-12) ok = false;
        if (ok) return p;
    }
    return MovingDomain::sample_boundary(t, rng);
}

// ---------------------------------------------------------------------------
// Factory

std::unique_ptr<MovingDomain> make_domain(const nlohmann::json& spec) {
    if (!spec.contains("type"))
        throw SchemaError("domain.type: missing");
    const std::string type = spec.at("type").get<std::string>();
    auto get_vec = [&](const char* key) {
        std::vector<double> v = spec.at(key).get<std::vector<double>>();
        return Eigen::Map<Vec>(v.data(), static_cast<int>(v.size())).eval();
    };
    double rp = spec.value("prox_radius", -1.0);
    if (type == "ball") {
        Vec c = get_vec("center");
        double r0 = spec.at("radius").get<double>();
        double rate = spec.value("rate", 0.0);
        return std::make_unique<BallDomain>(c, r0, rate, rp);
    }
    if (type == "interval" || type == "box") {
        Vec lo = get_vec("lo"), hi = get_vec("hi");
        Vec lr = Vec::Zero(lo.size()), hr = Vec::Zero(hi.size());
        if (spec.contains("lo_rate")) lr = get_vec("lo_rate");
        if (spec.contains("hi_rate")) hr = get_vec("hi_rate");
        return std::make_unique<BoxDomain>(lo, hi, lr, hr, rp);
    }
    if (type == "halfspace") {
        Vec n = get_vec("normal");
        double off = spec.at("offset").get<double>();
        return std::make_unique<HalfSpaceDomain>(n, off, rp > 0 ? rp : 1e6);
    }
    if (type == "cosine") {
        return std::make_unique<CosineDomain>(rp > 0 ? rp : 0.02);
    }
    if (type == "polytope") {
        auto rows = spec.at("A").get<std::vector<std::vector<double>>>();
        Vec b0;
        {
            std::vector<double> bb = spec.at("b").get<std::vector<double>>();
            b0 = Eigen::Map<Vec>(bb.data(), static_cast<int>(bb.size()));
        }
        Eigen::MatrixXd A(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (size_t i = 0; i < rows.size(); ++i)
            A.row(static_cast<int>(i)) =
                Eigen::Map<Vec>(rows[i].data(), static_cast<int>(rows[i].size()));
        return std::make_unique<PolytopeDomain>(A, b0, rp > 0 ? rp : 1e6);
    }
    throw SchemaError("domain.type: unknown value '" + type + "'");
}

// ---------------------------------------------------------------------------
// Operations

Vec clip_normal_velocity(const Vec& v, const Vec& n, double c) {
    double vn = v.dot(n);
    if (vn <= c) return v;
    return v - (vn - c) * n;
}

Vec project_velocity(const Vec& v, const Vec& x, double t,
                     const MovingDomain& dom) {
    const double band = dom.boundary_band(t);
    const double sd = dom.signed_distance(x, t);
    if (sd > band)
        throw DomainError("project_velocity: point outside the closure");
    if (sd < -band) return v; // interior
    return clip_normal_velocity(v, dom.outward_normal(x, t),
                                dom.boundary_speed(x, t));
}

Vec project_point(const Vec& x, double t, const MovingDomain& dom) {
    const double sd = dom.signed_distance(x, t);
    if (sd <= 0) return x;
    if (sd >= dom.prox_radius())
        throw ProjectionError(
            "project_point: distance " + std::to_string(sd) +
            " >= prox radius " + std::to_string(dom.prox_radius()));
    return dom.closest_boundary_point(x, t);
}

Vec retraction_map(const Vec& x, double t, double tau,
                   const MovingDomain& dom) {
    const double rp = dom.prox_radius();
    const double L = dom.hausdorff_lipschitz();
    const double theta = 3.0 * L * tau / rp;
    if (theta >= 1.0)
        throw StepSizeError("retraction_map: 3 L tau / r_p = " +
                            std::to_string(theta) + " >= 1");
    if (dom.signed_distance(x, t) > dom.boundary_band(t))
        throw DomainError("retraction_map: point outside the closure");
    if (theta == 0.0) return x;
    const double depth = std::max(-dom.signed_distance(x, t), 0.0);
    Vec q = x;
    if (depth < rp / 2) {
        q = x - (rp / 2 - depth) * dom.outward_normal(x, t);
    }
    return (1.0 - theta) * x + theta * q;
}

double projection_energy(const Vec& w, const Vec& n, double c) {
    Vec p = clip_normal_velocity(w, n, c);
    return w.dot(p) - 0.5 * p.squaredNorm();
}

double boundary_work_term(const Vec& w, const Vec& n, double c) {
    Vec p = clip_normal_velocity(w, n, c);
    return (w - p).dot(p);
}

DomainReport validate_domain(const MovingDomain& dom,
                             const std::vector<double>& t_grid,
                             int sample_count, std::uint64_t seed) {
    DomainReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double rp = dom.prox_radius();

    for (double t : t_grid) {
        Box bb = dom.bounding_box(t);
        auto sample_inside = [&]() -> Vec {
            for (int it = 0; it < 4096; ++it) {
                Vec p(dom.dim());
                for (int k = 0; k < dom.dim(); ++k)
                    p(k) = bb.lo(k) + u01(rng) * (bb.hi(k) - bb.lo(k));
                if (dom.contains(p, t)) return p;
            }
            throw DomainError("validate_domain: interior sampling failed");
        };

        std::vector<Vec> boundary(sample_count);
        for (int i = 0; i < sample_count; ++i)
            boundary[i] = dom.sample_boundary(t, rng);

        for (int i = 0; i < sample_count; ++i) {
            const Vec& bx = boundary[i];
            Vec n = dom.outward_normal(bx, t);
            Vec y = sample_inside();
            double num = n.dot(y - bx);
            double den = (y - bx).squaredNorm();
            if (den > 1e-20 && num > 0)
                rep.worst_prox_ratio =
                    std::max(rep.worst_prox_ratio, num * rp / den);

            // normal consistency against the FD signed-distance gradient,
            // evaluated slightly inside the collar
            Vec probe = bx - 0.25 * rp * n;
            Vec g = fd_gradient(dom, probe, t);
            rep.worst_grad_magnitude_error = std::max(
                rep.worst_grad_magnitude_error, std::abs(g.norm() - 1.0));
            if (g.norm() > 1e-12) {
                double align = n.dot(g / g.norm());
                rep.worst_normal_error =
                    std::max(rep.worst_normal_error, 1.0 - align);
            }

            // boundary-speed growth |c| <= L (1 + |x|)
            double c = std::abs(dom.boundary_speed(bx, t));
            double cap = dom.hausdorff_lipschitz() * (1 + bx.norm());
            if (c > 0)
                rep.worst_speed_growth = std::max(
                    rep.worst_speed_growth, c / std::max(cap, 1e-300));
        }
    }

    // Hausdorff rate between consecutive time samples
    for (size_t it = 0; it + 1 < t_grid.size(); ++it) {
        double t = t_grid[it], s = t_grid[it + 1];
        if (std::abs(t - s) < 1e-14) continue;
        double dh = 0.0;
        for (int i = 0; i < sample_count; ++i) {
            Vec bt = dom.sample_boundary(t, rng);
            Vec bs = dom.sample_boundary(s, rng);
            dh = std::max(dh, std::max(dom.signed_distance(bt, s), 0.0));
            dh = std::max(dh, std::max(dom.signed_distance(bs, t), 0.0));
        }
        rep.hausdorff_rate = std::max(rep.hausdorff_rate, dh / std::abs(t - s));
    }

    rep.prox_ok = rep.worst_prox_ratio <= 1.0 + 1e-6;
    rep.lipschitz_ok =
        rep.hausdorff_rate <= dom.hausdorff_lipschitz() * (1 + 1e-6) + 1e-9;
    rep.normals_ok = rep.worst_normal_error < 1e-3 &&
                     rep.worst_grad_magnitude_error < 1e-3;
    rep.speed_ok = rep.worst_speed_growth <= 1.0 + 1e-9;
    return rep;
}

} // namespace pgflow
