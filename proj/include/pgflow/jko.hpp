#pragma once

#include <functional>
#include <vector>

#include "pgflow/geometry.hpp"
#include "pgflow/potentials.hpp"
#include "pgflow/transport.hpp"

namespace pgflow {

//! Fixed rectangular lattice shared by all grid measures of a run.
struct GridSpec {
    Vec lo;                // lower corner of the first cell
    double h = 0.0;        // isotropic cell size
    std::vector<int> dims; // cells per axis

    int dim() const { return static_cast<int>(dims.size()); }
    int cells() const;
    Vec cell_center(int k) const;
    double cell_volume() const;
};

//! Cell-centered density on a lattice, masked to Omega(t); proxy for an
//! absolutely continuous measure u L^d.
struct GridMeasure {
    GridSpec grid;
    std::vector<std::uint8_t> mask; // 1 = cell center inside Omega(t)
    std::vector<double> u;          // density, 0 outside the mask
    double t = 0.0;

    double total_mass() const; // sum u_k h^d
    double second_moment() const;
    void validate() const;
    DiscreteMeasure to_discrete() const;
    double l1_distance(const GridMeasure& other) const;
};

std::vector<std::uint8_t> domain_mask(const MovingDomain& dom,
                                      const GridSpec& grid, double t);

//! Density from a profile function, masked and normalized to mass one.
GridMeasure make_grid_measure(const GridSpec& grid, const MovingDomain& dom,
                              double t,
                              const std::function<double(const Vec&)>& profile);

struct JkoConfig {
    double tau = 0.01;
    double eps = 1.0;                // viscosity; must be positive
    double eta_min = -1.0;           // entropic floor, auto when negative
    double marginal_tol = 1e-10;
    int max_iters_per_stage = 4000;
    int anneal_stages = 5;
    int exact_polish_max_cells = 300;
    int polish_iters = 80;
    int w_outer_iters = 4;           // interaction-freezing sweeps

    void validate() const;
};

//! phi^eps(u) = eps int u log u + int V u + 1/2 int int W(x-y) u u,
//! with 0 log 0 = 0.
double energy_phi_eps(const GridMeasure& gm, const PotentialPair& pot,
                      double eps);

struct JkoStepResult {
    GridMeasure next;
    TransportPlan plan;   // optimal plan between gm and next (exact LP)
    double dw2 = 0.0;     // d_W^2(gm, next)
    double energy = 0.0;  // phi^eps(next)
    double energy_pushed = 0.0; // phi^eps of the retraction-pushed candidate
    double pushed_dw2 = 0.0;    // d_W^2(gm, pushed candidate)
    int scaling_iterations = 0;
    double marginal_residual = 0.0;
};

//! One minimizing movement: approximately minimizes
//! d_W^2(gm, .)/(2 tau) + phi^eps over grid measures on Omega(t + tau).
//! The returned value never exceeds the retraction-pushed candidate, so the
//! one-step energy inequality holds by construction.
JkoStepResult jko_step(const GridMeasure& gm, const PotentialPair& pot,
                       const MovingDomain& dom, const JkoConfig& cfg);

//! Variant threading entropic duals across consecutive steps.
JkoStepResult jko_step_warm(const GridMeasure& gm, const PotentialPair& pot,
                            const MovingDomain& dom, const JkoConfig& cfg,
                            std::vector<double>* warm_f,
                            std::vector<double>* warm_g);

struct JkoTrajectory {
    std::vector<double> times;
    std::vector<GridMeasure> grids;
    std::vector<double> energies;  // phi^eps at each time
    std::vector<double> step_dw2;  // d_W^2 between consecutive iterates
    std::vector<double> step_energy_pushed; // energy of the pushed candidate
    std::vector<double> step_pushed_dw2;
};

JkoTrajectory run_jko(const GridMeasure& gm0, const PotentialPair& pot,
                      const MovingDomain& dom, double eps, double tau,
                      double T, const JkoConfig* base_cfg = nullptr);

//! Independent finite-volume oracle: conservative exponential-fitting
//! (Scharfetter-Gummel) fluxes with a zero total-flux boundary closure.
//! Mass is conserved to roundoff; used only as a cross-check for jko.
JkoTrajectory fv_solve(const GridMeasure& gm0, const PotentialPair& pot,
                       const MovingDomain& dom, double eps, double dt,
                       double T, int record_every = 1);

struct BumpField {
    Vec center;
    double width = 1.0;
    int axis = 0;
};

std::vector<BumpField> default_test_fields(const GridMeasure& gm);

//! Max over the test-field family of the discretized Euler-Lagrange
//! functional | int (y-x).psi dgamma + tau int (-eps div psi + grad V.psi
//! + (grad W * mu).psi) dmu_next |.
double euler_lagrange_residual(const GridMeasure& gm_prev,
                               const GridMeasure& gm_next,
                               const TransportPlan& plan,
                               const PotentialPair& pot, double eps,
                               double tau,
                               const std::vector<BumpField>& fields);

double euler_lagrange_residual(const GridMeasure& gm_prev,
                               const GridMeasure& gm_next,
                               const TransportPlan& plan,
                               const PotentialPair& pot, double eps,
                               double tau);

struct ViscosityGapRow {
    double eps;
    double t;
    double gap; // d_W(mu^eps(t), mu(t))
};

struct ViscosityGapResult {
    std::vector<ViscosityGapRow> rows;
    double fitted_C = 0.0; // d_W^2 <= C eps^{1/(d+2)} t e^{ct} over the sweep
    double fitted_c = 0.0;
};

//! Distances between the viscous grid solutions and a reference first-order
//! particle solution across an eps sweep. Refuses non-convex domains.
ViscosityGapResult viscosity_gap(const GridMeasure& gm0,
                                 const DiscreteMeasure& reference0,
                                 const PotentialPair& pot,
                                 const MovingDomain& dom,
                                 const std::vector<double>& eps_list,
                                 double tau, double T, double particle_dt);

} // namespace pgflow
