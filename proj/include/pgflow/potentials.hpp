#pragma once

#include <Eigen/Core>

#include <limits>
#include <memory>
#include <random>
#include <string>

#include "json.hpp"

#include "pgflow/errors.hpp"

namespace pgflow {

using Vec = Eigen::VectorXd;

//! Smooth scalar field with analytic gradient and structural constants.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double value(const Vec& x) const = 0;
    virtual Vec gradient(const Vec& x) const = 0;
    //! Convexity modulus: <grad f(x)-grad f(y), x-y> >= lambda |x-y|^2.
    virtual double lambda() const = 0;
    //! Growth constant: |grad f(x)| <= C (1 + |x|).
    virtual double growth_constant() const = 0;
    //! sup |D^2 f|, +inf when no global bound is declared.
    virtual double hessian_bound() const {
        return std::numeric_limits<double>::infinity();
    }
    //! inf f, -inf when unbounded below.
    virtual double lower_bound() const {
        return -std::numeric_limits<double>::infinity();
    }
    virtual std::string describe() const = 0;
};

//! V(x) = a |x - x0|^2
class QuadraticField : public ScalarField {
public:
    QuadraticField(double a, Vec x0);
    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    double lambda() const override { return 2 * a_; }
    double growth_constant() const override;
    double hessian_bound() const override { return 2 * std::abs(a_); }
    double lower_bound() const override { return a_ >= 0 ? 0.0 : -std::numeric_limits<double>::infinity(); }
    std::string describe() const override;

private:
    double a_;
    Vec x0_;
};

//! V(x,y) = x y on R^2; lambda = -1 (Hessian eigenvalues +-1).
class SaddleField : public ScalarField {
public:
    double value(const Vec& x) const override { return x(0) * x(1); }
    Vec gradient(const Vec& x) const override;
    double lambda() const override { return -1.0; }
    double growth_constant() const override { return 1.0; }
    double hessian_bound() const override { return 1.0; }
    std::string describe() const override { return "saddle"; }
};

//! W(x) = -C exp(-|x|^2); attraction well.
class GaussianWellField : public ScalarField {
public:
    explicit GaussianWellField(double strength) : c_(strength) {}
    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    // min Hessian eigenvalue is -4 C e^{-3/2}, attained at |x|^2 = 3/2
    double lambda() const override { return -4.0 * std::exp(-1.5) * c_; }
    double growth_constant() const override { return c_; }
    double hessian_bound() const override { return 2 * c_; }
    double lower_bound() const override { return -c_; }
    std::string describe() const override;

private:
    double c_;
};

class ZeroField : public ScalarField {
public:
    double value(const Vec&) const override { return 0.0; }
    Vec gradient(const Vec& x) const override { return Vec::Zero(x.size()); }
    double lambda() const override { return 0.0; }
    double growth_constant() const override { return 0.0; }
    double hessian_bound() const override { return 0.0; }
    double lower_bound() const override { return 0.0; }
    std::string describe() const override { return "zero"; }
};

//! External potential V and interaction kernel W with their structural
//! constants. W is required to be even; symmetric C^1 kernels force
//! grad W(0) = 0.
class PotentialPair {
public:
    PotentialPair(std::shared_ptr<const ScalarField> V,
                  std::shared_ptr<const ScalarField> W);

    const ScalarField& V() const { return *v_; }
    const ScalarField& W() const { return *w_; }
    double lambda() const;  // common modulus for both fields
    double lambda_V() const { return v_->lambda(); }
    double lambda_W() const { return w_->lambda(); }
    double growth_V() const { return v_->growth_constant(); }
    double growth_W() const { return w_->growth_constant(); }
    bool w_symmetric() const { return w_symmetric_; }

private:
    std::shared_ptr<const ScalarField> v_, w_;
    bool w_symmetric_;
};

Vec grad_V(const PotentialPair& pot, const Vec& x);
Vec grad_W(const PotentialPair& pot, const Vec& x);

std::shared_ptr<const ScalarField> make_field(const nlohmann::json& spec,
                                              int dim);
PotentialPair make_potential_pair(const nlohmann::json& spec, int dim);

// Sampled validators used by the invariant suite. Each returns the worst
// margin seen (nonnegative = pass for the stated tolerance).

//! max |grad f - central difference| / max(1, |grad f|) over samples.
double max_gradient_fd_error(const ScalarField& f, int dim, int samples,
                             std::uint64_t seed, double box = 2.0);

//! max |grad W(x) + grad W(-x)| over samples.
double max_symmetry_defect(const ScalarField& w, int dim, int samples,
                           std::uint64_t seed, double box = 3.0);

//! min over sampled pairs of <grad f(x)-grad f(y), x-y> - lambda |x-y|^2.
double min_lambda_convexity_margin(const ScalarField& f, int dim, int samples,
                                   std::uint64_t seed, double box = 3.0);

//! max over samples of |grad f(x)| - C (1 + |x|).
double max_growth_violation(const ScalarField& f, int dim, int samples,
                            std::uint64_t seed, double box = 10.0);

} // namespace pgflow
