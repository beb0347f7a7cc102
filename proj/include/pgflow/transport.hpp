#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "pgflow/errors.hpp"

namespace pgflow {

using Vec = Eigen::VectorXd;

//! Weighted point cloud representing a probability measure in P_2.
struct DiscreteMeasure {
    std::vector<Vec> points;
    std::vector<double> w;

    int size() const { return static_cast<int>(points.size()); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
    double total_mass() const;
    double second_moment() const;
    void validate(double tol = 1e-12) const;
};

struct PlanEntry {
    int i, j;
    double mass;
};

//! Sparse coupling between two discrete measures with quadratic cost value.
struct TransportPlan {
    std::vector<PlanEntry> entries;
    double cost = 0.0; // sum gamma_ij |x_i - y_j|^2
    int n_source = 0, n_target = 0;

    std::vector<double> row_sums() const;
    std::vector<double> col_sums() const;
    double recompute_cost(const DiscreteMeasure& mu,
                          const DiscreteMeasure& nu) const;
};

struct WassersteinResult {
    double distance = 0.0;
    TransportPlan plan;
    std::vector<double> source_potential; // u_i with u_i + v_j <= c_ij
    std::vector<double> target_potential; // v_j, equality on support
    double max_negative_reduced_cost = 0.0;
    double worst_support_slackness = 0.0;
    double worst_marginal_error = 0.0;
    bool certified = false; // complementary-slackness certificate
};

//! Exact 2-Wasserstein distance and optimal plan via the transportation
//! network simplex. Throws SizeError when N*M exceeds max_entries.
WassersteinResult wasserstein(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              std::size_t max_entries = 4000000);

//! 1-D fast path: quantile matching, equal to the LP optimum.
double wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

//! Distance dispatcher used by audits: quantile path in d = 1, LP otherwise.
double wasserstein_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu);

//! Transport map values t(x_i) per base atom. Exact monotone rearrangement
//! in d = 1 (barycentric where a base atom must split); barycentric
//! projection of the optimal plan in d >= 2.
std::vector<Vec> optimal_map(const DiscreteMeasure& base,
                             const DiscreteMeasure& target);

//! ( integral |t_base^mu1 - t_base^mu2|^2 d base )^{1/2}.
double pseudo_wasserstein(const DiscreteMeasure& base,
                          const DiscreteMeasure& mu1,
                          const DiscreteMeasure& mu2);

//! Pushforward of base under (1-s) t_base^mu + s t_base^e. In d = 1 the
//! interpolated map is computed fragment-exactly; the result has constant
//! speed d_base(mu, result) = s d_base(mu, e).
DiscreteMeasure generalized_geodesic(const DiscreteMeasure& base,
                                     const DiscreteMeasure& mu,
                                     const DiscreteMeasure& e, double s);

//! Voxelized Brunn-Minkowski sanity check on solid sample clouds:
//! vol(A+B)^{1/d} >= vol(A)^{1/d} + vol(B)^{1/d} up to voxel error.
bool minkowski_density_check(const std::vector<Vec>& A_samples,
                             const std::vector<Vec>& B_samples,
                             double rel_tol = 0.05);

} // namespace pgflow
