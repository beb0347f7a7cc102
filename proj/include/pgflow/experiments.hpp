#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pgflow/jko.hpp"
#include "pgflow/particles.hpp"

namespace pgflow {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Schedule {
    double T = 1.0;
    double dt = 0.01; // dt for particles/fv, tau for jko
    int record_every = 1;
};

//! Parsed scenario: domain, potentials, initial data, solver and schedule.
struct Scenario {
    ojson raw;
    std::shared_ptr<MovingDomain> domain;
    std::optional<PotentialPair> potentials;
    std::string solver; // "particles" | "jko" | "fv"
    double eps = 0.0;   // viscosity for jko/fv
    Schedule schedule;
    std::uint64_t seed = 0;

    // initial data (exactly one is populated)
    std::optional<ParticleEnsemble> initial_particles;
    std::optional<GridMeasure> initial_grid;

    std::string hash() const; // canonical content hash
};

Scenario parse_scenario(const json& spec);
Scenario load_scenario(const std::string& path);

struct ExperimentSummary {
    std::string scenario_hash;
    ojson data;       // metric tables, constants, tolerances, provenance
    bool pass_all = true;

    std::string summary_hash() const;
    void write(const std::string& path) const;
};

//! Executes a scenario, persists CSV/JSON (and grid dumps) under out_dir,
//! and returns the summary. Deterministic for a fixed seed.
ExperimentSummary run_scenario(const Scenario& sc, const std::string& out_dir,
                               int threads = 1);
ExperimentSummary run_scenario(const std::string& path,
                               const std::string& out_dir, int threads = 1);

// ---------------------------------------------------------------------------
// Named experiments

struct EquilibriumRow {
    int N;
    double stable;   // root of 2 pi x = cot(2 pi x) near N - 1/2
    double unstable; // root near N
};

//! Equilibria of the boundary-riding dynamics on the cosine domain with
//! V = xy, classified by the sign of the velocity derivative.
std::vector<EquilibriumRow> cosine_equilibria(int n_min, int n_max);

//! Single-particle tangential velocity on the cosine graph at abscissa x.
double cosine_theta(double x);

struct InstabilityRow {
    int n;
    double d0;    // d_W between the differing tails at time 0
    double dt0;   // the same distance at time t0
    double ratio; // dt0 / d0
};

struct InstabilityResult {
    std::vector<InstabilityRow> rows;
    // final abscissas of the perturbed particles, for equilibrium checks
    std::vector<double> perturbed_final_x;
    std::vector<int> perturbed_index;
};

//! Perturbed-chain experiment on the cosine domain with V = xy, W = 0.
//! mass_law: "exponential" (m_j ~ e^{-j}) or "power" (m_j ~ j^{-beta}).
//! Chains are truncated at max(n_list) + 30. The common particles are
//! identical in both chains (W = 0), so the distances reduce to the
//! differing tails, solved as renormalized couplings and rescaled by the
//! tail mass fraction; far-tail masses would otherwise sit below the
//! solver's feasibility tolerances.
InstabilityResult instability_experiment(double alpha,
                                         const std::string& mass_law,
                                         const std::vector<int>& n_list,
                                         double t0, double beta = 4.0,
                                         int threads = 1);

struct StabilityRow {
    double delta0; // requested initial separation
    double d0;     // measured d_W at time 0
    double dT;     // d_W at time T
    double growth; // dT / d0 (1 when d0 = 0)
};

struct StabilityResult {
    std::vector<StabilityRow> rows;
    double fitted_p = 1.0; // slope of log dT vs log d0
};

StabilityResult stability_experiment(const MovingDomain& dom,
                                     const PotentialPair& pot,
                                     const ParticleEnsemble& base,
                                     const std::vector<double>& delta0_list,
                                     double T, double dt,
                                     std::uint64_t seed = 11);

//! Wraps viscosity_gap with persistence and plot emission.
ExperimentSummary viscosity_experiment(const Scenario& sc,
                                       const std::vector<double>& eps_list,
                                       const std::string& out_dir);

//! SVG plots derived from the summary tables; returns written paths.
std::vector<std::string> emit_plots(const ExperimentSummary& summary,
                                    const std::string& out_dir);

// file helpers shared by the CLI
void write_trajectory_csv(const ParticleTrajectory& traj,
                          const std::string& path);
void write_grid_csv(const GridMeasure& gm, const std::string& path);
void write_grid_binary(const GridMeasure& gm, const std::string& path);
GridMeasure read_grid_binary(const std::string& path);
void write_plan_csv(const TransportPlan& plan, const std::string& path);

std::string fnv1a_hex(const std::string& payload);

} // namespace pgflow
