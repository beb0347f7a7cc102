#pragma once

#include <vector>

#include "pgflow/geometry.hpp"
#include "pgflow/potentials.hpp"
#include "pgflow/transport.hpp"

namespace pgflow {

//! Weighted point cloud (x_i, m_i) at time t representing mu = sum m_i dirac.
struct ParticleEnsemble {
    std::vector<Vec> x;
    std::vector<double> m;
    double t = 0.0;

    int size() const { return static_cast<int>(x.size()); }
    int dim() const { return x.empty() ? 0 : static_cast<int>(x[0].size()); }
    double second_moment() const;
    DiscreteMeasure to_measure() const;
    //! Checks mass normalization and, when a domain is given, support
    //! containment within the boundary band.
    void validate(const MovingDomain* dom = nullptr) const;
};

//! Time-indexed log of ensembles with energy and moment series.
struct ParticleTrajectory {
    std::vector<double> times;
    std::vector<ParticleEnsemble> snapshots;
    std::vector<double> energies;
    std::vector<double> second_moments;
};

//! w(mu)(x) = -grad V(x) - sum_j m_j grad W(x - x_j); the j-term with
//! x_j = x contributes zero for symmetric C^1 kernels.
Vec interaction_velocity(const ParticleEnsemble& ens, const PotentialPair& pot,
                         const Vec& x);

//! All interaction velocities in one sweep (optionally multithreaded;
//! per-particle sums run in a fixed order so results are deterministic).
std::vector<Vec> interaction_velocities(const ParticleEnsemble& ens,
                                        const PotentialPair& pot,
                                        int threads = 1);

//! One catching-up step: project velocities, move, restore feasibility.
ParticleEnsemble step(const ParticleEnsemble& ens, const PotentialPair& pot,
                      const MovingDomain& dom, double dt, int threads = 1);

ParticleTrajectory simulate(const ParticleEnsemble& ens0,
                            const PotentialPair& pot, const MovingDomain& dom,
                            double T, double dt, int record_every = 1,
                            int threads = 1);

//! phi(mu) = sum_i m_i V(x_i) + 1/2 sum_{i,j} m_i m_j W(x_i - x_j),
//! diagonal included.
double energy_phi(const ParticleEnsemble& ens, const PotentialPair& pot);

//! sum over |x_i| > R of m_i |x_i|^2.
double tail_mass(const ParticleEnsemble& ens, double R);

//! dt <= min(r_p / (10 v_max), 1 / (10 |lambda| + 1)).
double default_time_step(const ParticleEnsemble& ens, const PotentialPair& pot,
                         const MovingDomain& dom);

struct SlopeAudit {
    std::vector<double> residuals;    // energy-dissipation slack per interval
    std::vector<double> extra_terms;  // integral of (w - Pw).Pw per interval
    std::vector<double> metric_speeds; // d_W(mu_k, mu_{k+1}) / dt_k
};

//! Per-interval residual of the curve-of-maximal-slope inequality:
//! phi(mu(s)) - phi(mu(t)) - 1/2 int |mu'|^2 - 1/2 int int |Pw|^2 dmu
//! - int int (w - Pw).Pw dmu, metric speed discretized by d_W quotients.
SlopeAudit maximal_slope_audit(const ParticleTrajectory& traj,
                               const PotentialPair& pot,
                               const MovingDomain& dom);

} // namespace pgflow
