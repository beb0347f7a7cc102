// Command-line driver: scenario execution, the named experiments and
// domain validation. Exit code 0 iff every embedded acceptance flag passes.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "pgflow/experiments.hpp"

using namespace pgflow;

namespace {

struct CommonOpts {
    std::string scenario;
    std::string out = "out";
    std::uint64_t seed = 0;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool scenario_required = true) {
    auto* opt = cmd->add_option("--scenario", o.scenario, "scenario JSON file");
    if (scenario_required) opt->required();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--threads", o.threads, "worker threads");
}

Scenario load_with_seed(const CommonOpts& o) {
    Scenario sc = load_scenario(o.scenario);
    if (o.seed != 0) {
        nlohmann::json raw = sc.raw;
        raw["seed"] = o.seed;
        sc = parse_scenario(raw);
    }
    return sc;
}

int report(const ExperimentSummary& sum) {
    std::cout << "scenario " << sum.scenario_hash << " summary "
              << sum.summary_hash() << (sum.pass_all ? " PASS" : " FAIL")
              << "\n";
    return sum.pass_all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"confined continuity-equation toolbox"};
    app.require_subcommand(1);

    CommonOpts sim, jko, visc, stab, cosi, vdom;

    auto* c_sim = app.add_subcommand("simulate-particles",
                                     "projected interacting-particle run");
    add_common(c_sim, sim);
    auto* c_jko = app.add_subcommand("run-jko", "minimizing-movement run");
    add_common(c_jko, jko);
    auto* c_visc =
        app.add_subcommand("viscosity-sweep", "vanishing-viscosity comparison");
    add_common(c_visc, visc);
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    c_visc->add_option("--eps", eps_list, "viscosity values");
    auto* c_stab =
        app.add_subcommand("stability-sweep", "paired-ensemble stability");
    add_common(c_stab, stab);
    std::vector<double> delta0{1e-2, 1e-3};
    c_stab->add_option("--delta0", delta0, "initial separations");
    double stab_T = 1.0;
    c_stab->add_option("--T", stab_T, "horizon");
    auto* c_cos = app.add_subcommand("cosine-instability",
                                     "perturbed-chain counterexample");
    add_common(c_cos, cosi, false);
    double alpha = 0.5, t0 = 1.0;
    std::vector<int> n_list{8, 16, 32, 64};
    std::string mass_law = "exponential";
    c_cos->add_option("--alpha", alpha, "perturbation exponent");
    c_cos->add_option("--t0", t0, "evaluation time");
    c_cos->add_option("--n", n_list, "chain cutoffs");
    c_cos->add_option("--mass-law", mass_law, "exponential|power");
    auto* c_dom = app.add_subcommand("validate-domain", "regularity report");
    add_common(c_dom, vdom);
    int vd_samples = 200;
    c_dom->add_option("--samples", vd_samples, "boundary samples per time");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_sim->parsed()) {
            Scenario sc = load_with_seed(sim);
            if (sc.solver != "particles")
                throw SchemaError("solver.type: simulate-particles needs a "
                                  "particle scenario");
            return report(run_scenario(sc, sim.out, sim.threads));
        }
        if (c_jko->parsed()) {
            Scenario sc = load_with_seed(jko);
            if (sc.solver != "jko" && sc.solver != "fv")
                throw SchemaError("solver.type: run-jko needs a jko or fv "
                                  "scenario");
            return report(run_scenario(sc, jko.out, jko.threads));
        }
        if (c_visc->parsed()) {
            Scenario sc = load_with_seed(visc);
            return report(viscosity_experiment(sc, eps_list, visc.out));
        }
        if (c_stab->parsed()) {
            Scenario sc = load_with_seed(stab);
            if (!sc.initial_particles)
                throw SchemaError("initial.type: stability sweep needs particles");
            StabilityResult res = stability_experiment(
                *sc.domain, *sc.potentials, *sc.initial_particles, delta0,
                stab_T, sc.schedule.dt, sc.seed + 11);
            ExperimentSummary sum;
            sum.scenario_hash = sc.hash();
            std::vector<double> d0s, dTs, growth;
            for (const auto& r : res.rows) {
                d0s.push_back(r.d0);
                dTs.push_back(r.dT);
                growth.push_back(r.growth);
            }
            sum.data["tables"]["stability"] = {{"delta0", delta0},
                                               {"d0", d0s},
                                               {"dT", dTs},
                                               {"growth", growth}};
            sum.data["fitted"] = {{"p", res.fitted_p}};
            double lam = sc.potentials->lambda_V();
            double lamW = sc.potentials->lambda_W();
            double C = -lam + std::max(0.0, -2 * lamW);
            bool ok = true;
            for (const auto& r : res.rows)
                if (r.growth > std::exp(C * stab_T) * 1.1) ok = false;
            sum.data["flags"] = {{"gronwall_ok", ok}};
            sum.pass_all = ok;
            std::filesystem::create_directories(stab.out);
            sum.write(stab.out + "/summary.json");
            return report(sum);
        }
        if (c_cos->parsed()) {
            InstabilityResult res = instability_experiment(
                alpha, mass_law, n_list, t0, 4.0, cosi.threads);
            ExperimentSummary sum;
            sum.scenario_hash = fnv1a_hex("cosine-instability");
            std::vector<double> ns, d0s, dts, ratios;
            for (const auto& r : res.rows) {
                ns.push_back(r.n);
                d0s.push_back(r.d0);
                dts.push_back(r.dt0);
                ratios.push_back(r.ratio);
            }
            sum.data["tables"]["instability"] = {{"n", ns},
                                                 {"d0", d0s},
                                                 {"dt0", dts},
                                                 {"ratio", ratios}};
            bool increasing = true;
            for (size_t i = 0; i + 1 < ratios.size(); ++i)
                if (ratios[i + 1] <= ratios[i]) increasing = false;
            sum.data["flags"] = {{"ratios_increasing", increasing}};
            sum.pass_all = increasing;
            std::filesystem::create_directories(cosi.out);
            sum.write(cosi.out + "/summary.json");
            return report(sum);
        }
        if (c_dom->parsed()) {
            Scenario sc = load_with_seed(vdom);
            std::vector<double> t_grid{0.0, 0.25 * sc.schedule.T,
                                       0.5 * sc.schedule.T,
                                       0.75 * sc.schedule.T, sc.schedule.T};
            DomainReport rep =
                validate_domain(*sc.domain, t_grid, vd_samples, sc.seed + 7);
            ExperimentSummary sum;
            sum.scenario_hash = sc.hash();
            sum.data["report"] = {
                {"worst_prox_ratio", rep.worst_prox_ratio},
                {"hausdorff_rate", rep.hausdorff_rate},
                {"worst_normal_error", rep.worst_normal_error},
                {"worst_grad_magnitude_error", rep.worst_grad_magnitude_error}};
            sum.data["flags"] = {{"prox_ok", rep.prox_ok},
                                 {"lipschitz_ok", rep.lipschitz_ok},
                                 {"normals_ok", rep.normals_ok}};
            sum.pass_all = rep.pass();
            std::filesystem::create_directories(vdom.out);
            sum.write(vdom.out + "/summary.json");
            return report(sum);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
