#pragma once

#include <Eigen/Core>

#include <cmath>

#include <memory>
#include <random>
#include <vector>

#include "json.hpp"

#include "pgflow/errors.hpp"

namespace pgflow {

using Vec = Eigen::VectorXd;

struct Box {
    Vec lo;
    Vec hi;
    double diameter() const { return (hi - lo).norm(); }
};

//! Time-dependent domain Omega(t), queryable through signed distances,
//! outward normals and boundary speeds. All queries are pure functions of
//! (x,t); instances may be shared read-only across threads.
class MovingDomain {
public:
    MovingDomain(int dim, double prox_radius, double lipschitz);
    virtual ~MovingDomain() = default;

    int dim() const { return dim_; }
    double prox_radius() const { return prox_radius_; }
    double hausdorff_lipschitz() const { return lipschitz_; }

    //! Whether Omega(t) is convex for every t (known per catalog entry).
    virtual bool convex() const { return false; }

    // Negative inside, positive outside. Exact (metric) distance near the
    // boundary; catalog entries are exact everywhere.
    virtual double signed_distance(const Vec& x, double t) const = 0;

    virtual bool contains(const Vec& x, double t) const {
        return signed_distance(x, t) <= 0.0;
    }

    // Unit outward normal, meaningful within a collar of the boundary.
    // Default: normalized central-difference gradient of signed_distance.
    virtual Vec outward_normal(const Vec& x, double t) const;

    // Speed of the boundary in the outward-normal direction at the boundary
    // point nearest to x (positive when expanding).
    virtual double boundary_speed(const Vec& x, double t) const = 0;

    // Nearest boundary point; only trusted within the prox-radius collar.
    virtual Vec closest_boundary_point(const Vec& x, double t) const;

    virtual Box bounding_box(double t) const = 0;

    virtual Vec sample_boundary(double t, std::mt19937_64& rng) const;

    // Tolerance band for the boundary branch of the projection operator.
    double boundary_band(double t) const;

protected:
    int dim_;
    double prox_radius_;
    double lipschitz_;
};

// ---------------------------------------------------------------------------
// Catalog domains

//! Ball with affine radius schedule R(t) = radius0 + rate * t.
class BallDomain : public MovingDomain {
public:
    BallDomain(Vec center, double radius0, double rate = 0.0,
               double prox_radius = -1.0);
    double signed_distance(const Vec& x, double t) const override;
    Vec outward_normal(const Vec& x, double t) const override;
    double boundary_speed(const Vec& x, double t) const override;
    Vec closest_boundary_point(const Vec& x, double t) const override;
    Box bounding_box(double t) const override;
    Vec sample_boundary(double t, std::mt19937_64& rng) const override;
    bool convex() const override { return true; }
    double radius(double t) const { return radius0_ + rate_ * t; }

private:
    Vec center_;
    double radius0_, rate_;
};

//! Axis-aligned box with affine face schedules lo(t) = lo0 + lo_rate*t,
//! hi(t) = hi0 + hi_rate*t. Covers stationary boxes and intervals with
//! moving endpoints (d = 1).
class BoxDomain : public MovingDomain {
public:
    BoxDomain(Vec lo0, Vec hi0, Vec lo_rate, Vec hi_rate,
              double prox_radius = -1.0);
    static BoxDomain stationary(Vec lo, Vec hi, double prox_radius = -1.0);
    double signed_distance(const Vec& x, double t) const override;
    Vec outward_normal(const Vec& x, double t) const override;
    double boundary_speed(const Vec& x, double t) const override;
    Vec closest_boundary_point(const Vec& x, double t) const override;
    Box bounding_box(double t) const override;
    Vec sample_boundary(double t, std::mt19937_64& rng) const override;
    bool convex() const override { return true; }
    Vec lo(double t) const { return lo0_ + t * lo_rate_; }
    Vec hi(double t) const { return hi0_ + t * hi_rate_; }

private:
    Vec lo0_, hi0_, lo_rate_, hi_rate_;
};

//! Stationary half-space {x : n.x <= offset}.
class HalfSpaceDomain : public MovingDomain {
public:
    HalfSpaceDomain(Vec normal, double offset, double prox_radius = 1e6);
    double signed_distance(const Vec& x, double t) const override;
    Vec outward_normal(const Vec& x, double t) const override;
    double boundary_speed(const Vec&, double) const override { return 0.0; }
    Vec closest_boundary_point(const Vec& x, double t) const override;
    Box bounding_box(double t) const override;
    Vec sample_boundary(double t, std::mt19937_64& rng) const override;
    bool convex() const override { return true; }

private:
    Vec normal_;
    double offset_;
};

//! Stationary epigraph {(x,y) : y >= cos(2 pi x)} in d = 2. Distances and
//! normals come from per-query minimization over the graph parameter with
//! Newton polishing (no closed form exists).
class CosineDomain : public MovingDomain {
public:
    explicit CosineDomain(double prox_radius = 0.02);
    bool contains(const Vec& x, double t) const override {
        (void)t;
        return x(1) >= std::cos(2 * 3.14159265358979323846 * x(0));
    }
    double signed_distance(const Vec& x, double t) const override;
    Vec outward_normal(const Vec& x, double t) const override;
    double boundary_speed(const Vec&, double) const override { return 0.0; }
    Vec closest_boundary_point(const Vec& x, double t) const override;
    Box bounding_box(double t) const override;
    Vec sample_boundary(double t, std::mt19937_64& rng) const override;

    // Graph parameter of the nearest boundary point.
    double nearest_graph_parameter(const Vec& x) const;
};

//! Stationary convex polytope {x : A x <= b} with unit row normals.
class PolytopeDomain : public MovingDomain {
public:
    PolytopeDomain(Eigen::MatrixXd A, Vec b, double prox_radius = 1e6);
    double signed_distance(const Vec& x, double t) const override;
    Vec outward_normal(const Vec& x, double t) const override;
    double boundary_speed(const Vec&, double) const override { return 0.0; }
    Vec closest_boundary_point(const Vec& x, double t) const override;
    Box bounding_box(double t) const override;
    Vec sample_boundary(double t, std::mt19937_64& rng) const override;
    bool convex() const override { return true; }

private:
    Vec project_inside(const Vec& x) const; // Dykstra onto the polytope
    Eigen::MatrixXd A_;
    Vec b_;
};

std::unique_ptr<MovingDomain> make_domain(const nlohmann::json& spec);

// ---------------------------------------------------------------------------
// Operations

//! Projection operator on velocities at a point of the closure: clips the
//! outward-normal component to the boundary speed c within the boundary
//! band, identity in the interior. Throws DomainError outside the closure.
Vec project_velocity(const Vec& v, const Vec& x, double t,
                     const MovingDomain& dom);

//! P applied with explicit boundary data (n unit, c): v if v.n <= c,
//! v - (v.n) n + c n otherwise.
Vec clip_normal_velocity(const Vec& v, const Vec& n, double c);

//! Nearest point of the closure of Omega(t); identity inside. Throws
//! ProjectionError when dist(x, Omega(t)) >= prox radius.
Vec project_point(const Vec& x, double t, const MovingDomain& dom);

//! Interior retraction t(x) = (1 - 3 L tau / r_p) x + (3 L tau / r_p) Q(x),
//! mapping the closure of Omega(t) into Omega(t + tau). Throws StepSizeError
//! when 3 L tau / r_p >= 1.
Vec retraction_map(const Vec& x, double t, double tau,
                   const MovingDomain& dom);

//! E(w) = w . P(w) - |P(w)|^2 / 2 for boundary data (n, c).
double projection_energy(const Vec& w, const Vec& n, double c);

//! Boundary work term (w - P(w)) . P(w) = c * max(w.n - c, 0); the part of
//! E whose convexity in w holds iff c >= 0.
double boundary_work_term(const Vec& w, const Vec& n, double c);

struct DomainReport {
    double worst_prox_ratio = 0.0;       // sup <n,y-x> r_p / |y-x|^2
    double hausdorff_rate = 0.0;         // sup d_H(Omega(t),Omega(s))/|t-s|
    double worst_normal_error = 0.0;     // misalignment of n vs grad sdist
    double worst_grad_magnitude_error = 0.0; // | |grad sdist| - 1 | in collar
    double worst_speed_growth = 0.0;     // sup |c(x,t)| / (L (1 + |x|))
    bool prox_ok = false;
    bool lipschitz_ok = false;
    bool normals_ok = false;
    bool speed_ok = false;
    bool pass() const {
        return prox_ok && lipschitz_ok && normals_ok && speed_ok;
    }
};

DomainReport validate_domain(const MovingDomain& dom,
                             const std::vector<double>& t_grid,
                             int sample_count, std::uint64_t seed = 7u);

} // namespace pgflow
