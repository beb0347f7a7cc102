#include "pgflow/experiments.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pgflow/svg.hpp"

namespace pgflow {

namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string fnv1a_hex(const std::string& payload) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : payload) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

std::string Scenario::hash() const { return fnv1a_hex(raw.dump()); }

std::string ExperimentSummary::summary_hash() const {
    return fnv1a_hex(data.dump());
}

void ExperimentSummary::write(const std::string& path) const {
    ojson out;
    out["scenario_hash"] = scenario_hash;
    out["summary_hash"] = summary_hash();
    out["pass_all"] = pass_all;
    out["data"] = data;
    std::ofstream f(path);
    f << out.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Scenario parsing

namespace {

ParticleEnsemble build_particles(const json& init, const MovingDomain& dom,
                                 std::uint64_t seed) {
    ParticleEnsemble ens;
    const std::string type = init.at("type").get<std::string>();
    std::mt19937_64 rng(seed);
    if (type == "particles") {
        auto pos = init.at("positions").get<std::vector<std::vector<double>>>();
        for (auto& p : pos) {
            Vec v = Eigen::Map<Vec>(p.data(), static_cast<int>(p.size()));
            if (v.size() != dom.dim())
                throw SchemaError("initial.positions: wrong dimension");
            ens.x.push_back(v);
        }
        if (init.contains("masses")) {
            ens.m = init.at("masses").get<std::vector<double>>();
            if (ens.m.size() != ens.x.size())
                throw SchemaError("initial.masses: length mismatch");
        } else {
            ens.m.assign(ens.x.size(), 1.0 / ens.x.size());
        }
    } else if (type == "uniform_ball") {
        int n = init.at("n").get<int>();
        double r = init.at("radius").get<double>();
        Vec c = Vec::Zero(dom.dim());
        if (init.contains("center")) {
            auto cc = init.at("center").get<std::vector<double>>();
            c = Eigen::Map<Vec>(cc.data(), static_cast<int>(cc.size()));
        }
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        while (static_cast<int>(ens.x.size()) < n) {
            Vec p(dom.dim());
            for (int k = 0; k < dom.dim(); ++k) p(k) = u(rng);
            if (p.norm() > 1.0) continue;
            Vec q = c + r * p;
            if (!dom.contains(q, 0.0)) continue;
            ens.x.push_back(q);
        }
        ens.m.assign(n, 1.0 / n);
    } else if (type == "exponential_chain" || type == "power_chain") {
        int j_min = init.value("j_min", 1);
        int j_max = init.at("j_max").get<int>();
        double alpha = init.value("alpha", 0.0);
        int perturb_from = init.value("perturb_from", j_max + 1);
        double beta = init.value("beta", 4.0);
        std::vector<double> w;
        for (int j = j_min; j <= j_max; ++j) {
            double xj = j >= perturb_from && alpha > 0
                            ? j + std::pow(double(j), -alpha)
                            : double(j);
            Vec p(2);
            p << xj, std::cos(2 * kPi * xj);
            ens.x.push_back(p);
            w.push_back(type == "exponential_chain"
                            ? std::exp(-(double)(j - j_min))
                            : std::pow(double(j), -beta));
        }
        long double tot = 0;
        for (double v : w) tot += v;
        for (double v : w) ens.m.push_back(static_cast<double>(v / tot));
    } else {
        throw SchemaError("initial.type: unknown value '" + type + "'");
    }
    ens.t = 0.0;
    return ens;
}

GridMeasure build_grid(const json& init, const MovingDomain& dom) {
    auto lov = init.at("lo").get<std::vector<double>>();
    auto hiv = init.at("hi").get<std::vector<double>>();
    auto cells = init.at("cells").get<std::vector<int>>();
    if (lov.size() != hiv.size() || lov.size() != cells.size())
        throw SchemaError("initial.lo/hi/cells: length mismatch");
    GridSpec grid;
    grid.lo = Eigen::Map<Vec>(lov.data(), static_cast<int>(lov.size()));
    grid.dims = cells;
    grid.h = (hiv[0] - lov[0]) / cells[0];
    for (size_t a = 1; a < cells.size(); ++a) {
        double ha = (hiv[a] - lov[a]) / cells[a];
        if (std::abs(ha - grid.h) > 1e-9 * grid.h)
            throw SchemaError("initial.cells: lattice must be isotropic");
    }
    json prof = init.value("profile", json{{"type", "uniform"}});
    const std::string ptype = prof.at("type").get<std::string>();
    std::function<double(const Vec&)> profile;
    if (ptype == "uniform") {
        profile = [](const Vec&) { return 1.0; };
    } else if (ptype == "gaussian") {
        auto cc = prof.at("center").get<std::vector<double>>();
        Vec c = Eigen::Map<Vec>(cc.data(), static_cast<int>(cc.size()));
        double sigma = prof.at("sigma").get<double>();
        profile = [c, sigma](const Vec& x) {
            return std::exp(-(x - c).squaredNorm() / (2 * sigma * sigma));
        };
    } else if (ptype == "spike") {
        auto cc = prof.at("center").get<std::vector<double>>();
        Vec c = Eigen::Map<Vec>(cc.data(), static_cast<int>(cc.size()));
        double w = prof.value("width", grid.h * 2);
        profile = [c, w](const Vec& x) {
            return (x - c).cwiseAbs().maxCoeff() <= w ? 1.0 : 0.0;
        };
    } else {
        throw SchemaError("initial.profile.type: unknown value '" + ptype + "'");
    }
    return make_grid_measure(grid, dom, 0.0, profile);
}

} // namespace

Scenario parse_scenario(const json& spec) {
    Scenario sc;
    sc.raw = spec;
    if (!spec.contains("domain")) throw SchemaError("domain: missing");
    sc.domain = std::shared_ptr<MovingDomain>(make_domain(spec.at("domain")));
    sc.potentials =
        make_potential_pair(spec.value("potential", json::object()),
                            sc.domain->dim());
    if (!spec.contains("solver") || !spec.at("solver").contains("type"))
        throw SchemaError("solver.type: missing");
    sc.solver = spec.at("solver").at("type").get<std::string>();
    if (sc.solver != "particles" && sc.solver != "jko" && sc.solver != "fv")
        throw SchemaError("solver.type: unknown value '" + sc.solver + "'");
    sc.eps = spec.at("solver").value("eps", 0.0);
    if ((sc.solver == "jko" || sc.solver == "fv") && sc.eps <= 0)
        throw SchemaError("solver.eps: must be positive for " + sc.solver);
    json sched = spec.value("schedule", json::object());
    sc.schedule.T = sched.value("T", 1.0);
    sc.schedule.dt = sched.value("dt", sched.value("tau", 0.01));
    sc.schedule.record_every = sched.value("record_every", 1);
    if (sc.schedule.T <= 0 || sc.schedule.dt <= 0)
        throw SchemaError("schedule: T and dt must be positive");
    sc.seed = spec.value("seed", 0);

    if (!spec.contains("initial")) throw SchemaError("initial: missing");
    const json& init = spec.at("initial");
    const std::string itype = init.value("type", "");
    if (itype == "grid") {
        sc.initial_grid = build_grid(init, *sc.domain);
        if (sc.solver == "particles")
            throw SchemaError("initial.type: grid data needs jko or fv");
    } else {
        sc.initial_particles = build_particles(init, *sc.domain, sc.seed);
        if (sc.solver != "particles")
            throw SchemaError("initial.type: " + sc.solver +
                              " needs grid initial data");
    }
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("scenario file not found: " + path);
    json spec;
    try {
        f >> spec;
    } catch (const std::exception& e) {
        throw SchemaError("scenario parse error in " + path + ": " + e.what());
    }
    return parse_scenario(spec);
}

// ---------------------------------------------------------------------------
// File writers

void write_trajectory_csv(const ParticleTrajectory& traj,
                          const std::string& path) {
    std::ofstream f(path);
    if (traj.snapshots.empty()) return;
    int d = traj.snapshots[0].dim();
    f << "t,id";
    for (int k = 0; k < d; ++k) f << ",x" << k;
    f << ",mass\n";
    f.precision(17);
    for (size_t s = 0; s < traj.snapshots.size(); ++s) {
        const auto& e = traj.snapshots[s];
        for (int i = 0; i < e.size(); ++i) {
            f << traj.times[s] << "," << i;
            for (int k = 0; k < d; ++k) f << "," << e.x[i](k);
            f << "," << e.m[i] << "\n";
        }
    }
}

void write_grid_csv(const GridMeasure& gm, const std::string& path) {
    std::ofstream f(path);
    int d = gm.grid.dim();
    for (int k = 0; k < d; ++k) f << "c" << k << ",";
    f << "u\n";
    f.precision(17);
    for (int k = 0; k < gm.grid.cells(); ++k) {
        if (!gm.mask[k]) continue;
        Vec c = gm.grid.cell_center(k);
        for (int a = 0; a < d; ++a) f << c(a) << ",";
        f << gm.u[k] << "\n";
    }
}

void write_grid_binary(const GridMeasure& gm, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    const char magic[4] = {'P', 'G', 'F', 'B'};
    f.write(magic, 4);
    auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); };
    auto w64 = [&](double v) { f.write(reinterpret_cast<char*>(&v), 8); };
    w32(1u); // version
    w32(static_cast<std::uint32_t>(gm.grid.dim()));
    for (int dval : gm.grid.dims) w32(static_cast<std::uint32_t>(dval));
    w64(gm.grid.h);
    w64(gm.t);
    for (int a = 0; a < gm.grid.dim(); ++a) w64(gm.grid.lo(a));
    f.write(reinterpret_cast<const char*>(gm.mask.data()),
            static_cast<std::streamsize>(gm.mask.size()));
    f.write(reinterpret_cast<const char*>(gm.u.data()),
            static_cast<std::streamsize>(gm.u.size() * sizeof(double)));
}

GridMeasure read_grid_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "PGFB", 4) != 0)
        throw SchemaError("read_grid_binary: bad magic in " + path);
    auto r32 = [&]() {
        std::uint32_t v;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r64 = [&]() {
        double v;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    std::uint32_t version = r32();
    if (version != 1) throw SchemaError("read_grid_binary: bad version");
    int d = static_cast<int>(r32());
    GridMeasure gm;
    gm.grid.dims.resize(d);
    for (int a = 0; a < d; ++a) gm.grid.dims[a] = static_cast<int>(r32());
    gm.grid.h = r64();
    gm.t = r64();
    gm.grid.lo.resize(d);
    for (int a = 0; a < d; ++a) gm.grid.lo(a) = r64();
    int cells = gm.grid.cells();
    gm.mask.resize(cells);
    f.read(reinterpret_cast<char*>(gm.mask.data()), cells);
    gm.u.resize(cells);
    f.read(reinterpret_cast<char*>(gm.u.data()),
           static_cast<std::streamsize>(cells * sizeof(double)));
    if (!f) throw SchemaError("read_grid_binary: truncated file " + path);
    return gm;
}

void write_plan_csv(const TransportPlan& plan, const std::string& path) {
    std::ofstream f(path);
    f << "i,j,gamma\n";
    f.precision(17);
    for (const auto& e : plan.entries)
        f << e.i << "," << e.j << "," << e.mass << "\n";
}

// ---------------------------------------------------------------------------
// run_scenario

ExperimentSummary run_scenario(const Scenario& sc, const std::string& out_dir,
                               int threads) {
    fs::create_directories(out_dir);
    {
        std::ofstream f(out_dir + "/scenario.json");
        f << sc.raw.dump(2) << "\n";
    }
    ExperimentSummary sum;
    sum.scenario_hash = sc.hash();
    sum.data["solver"] = sc.solver;
    sum.data["seed"] = sc.seed;
    sum.data["schedule"] = {{"T", sc.schedule.T},
                            {"dt", sc.schedule.dt},
                            {"record_every", sc.schedule.record_every}};
    ojson flags;

    const MovingDomain& dom = *sc.domain;
    const PotentialPair& pot = *sc.potentials;

    if (sc.solver == "particles") {
        const ParticleEnsemble& ens0 = *sc.initial_particles;
        ParticleTrajectory traj =
            simulate(ens0, pot, dom, sc.schedule.T, sc.schedule.dt,
                     sc.schedule.record_every, threads);
        write_trajectory_csv(traj, out_dir + "/trajectory.csv");

        double mass_drift = 0, worst_violation = -1e300;
        for (const auto& e : traj.snapshots) {
            long double s = 0;
            for (double m : e.m) s += m;
            mass_drift = std::max(mass_drift,
                                  std::abs(static_cast<double>(s) - 1.0));
            for (const Vec& p : e.x)
                worst_violation =
                    std::max(worst_violation, dom.signed_distance(p, e.t));
        }
        // moment bound with the Gronwall constant from declared growth data
        double Cm = 2.0 * (3.0 * (pot.growth_V() + pot.growth_W() +
                                  dom.hausdorff_lipschitz() +
                                  dom.hausdorff_lipschitz()) +
                           2.0 * pot.growth_W());
        double m20 = traj.second_moments.front();
        bool m2_ok = true;
        for (size_t k = 0; k < traj.times.size(); ++k) {
            double bound =
                (1 + m20) * std::exp(Cm * (traj.times[k] - traj.times[0])) - 1;
            if (traj.second_moments[k] > bound + 1e-9) m2_ok = false;
        }
        flags["mass_ok"] = mass_drift <= 1e-12;
        flags["containment_ok"] =
            worst_violation <= dom.boundary_band(traj.times.back()) + 1e-12;
        flags["m2_gronwall_ok"] = m2_ok;
        sum.data["tables"]["energy"] = {{"t", traj.times},
                                        {"phi", traj.energies},
                                        {"units", "time, energy"},
                                        {"source", "particle run"}};
        sum.data["tables"]["m2"] = {{"t", traj.times},
                                    {"m2", traj.second_moments},
                                    {"gronwall_constant", Cm},
                                    {"units", "time, length^2"},
                                    {"source", "particle run"}};
        // a few particle tracks for plotting
        int d = ens0.dim();
        int keep = std::min(8, ens0.size());
        std::vector<std::vector<double>> xs(keep), ys(keep);
        for (const auto& e : traj.snapshots)
            for (int i = 0; i < keep; ++i) {
                xs[i].push_back(e.x[i](0));
                ys[i].push_back(d > 1 ? e.x[i](1) : e.t);
            }
        sum.data["tables"]["trajectory_xy"] = {{"x", xs}, {"y", ys}};
        sum.data["sizes"] = {{"particles", ens0.size()},
                             {"steps", traj.times.size()}};
        sum.data["tolerances"] = {
            {"dt", sc.schedule.dt},
            {"boundary_band", dom.boundary_band(traj.times.back())}};
    } else if (sc.solver == "jko") {
        const GridMeasure& gm0 = *sc.initial_grid;
        JkoTrajectory traj = run_jko(gm0, pot, dom, sc.eps, sc.schedule.dt,
                                     sc.schedule.T);
        write_grid_csv(traj.grids.front(), out_dir + "/grid_first.csv");
        write_grid_csv(traj.grids.back(), out_dir + "/grid_last.csv");
        write_grid_binary(traj.grids.back(), out_dir + "/grid_last.bin");
        if (traj.grids.size() >= 2) {
            size_t n = traj.grids.size();
            auto lp = wasserstein(traj.grids[n - 2].to_discrete(),
                                  traj.grids[n - 1].to_discrete());
            write_plan_csv(lp.plan, out_dir + "/plan_last.csv");
        }

        double mass_err = 0, min_u = 0;
        for (const auto& g : traj.grids) {
            mass_err = std::max(mass_err, std::abs(g.total_mass() - 1.0));
            for (double v : g.u) min_u = std::min(min_u, v);
        }
        bool monotone = true;
        if (dom.hausdorff_lipschitz() == 0) {
            for (size_t k = 0; k + 1 < traj.energies.size(); ++k)
                if (traj.energies[k + 1] > traj.energies[k] + 1e-9)
                    monotone = false;
            flags["energy_monotone_ok"] = monotone;
        }
        double sum_dw2_over_tau = 0;
        for (double v : traj.step_dw2) sum_dw2_over_tau += v / sc.schedule.dt;
        flags["mass_ok"] = mass_err <= 1e-8;
        flags["nonnegative_ok"] = min_u >= 0;
        sum.data["tables"]["energy"] = {{"t", traj.times},
                                        {"phi_eps", traj.energies},
                                        {"units", "time, energy"},
                                        {"source", "jko run"}};
        sum.data["tables"]["slope"] = {{"sum_dw2_over_tau", sum_dw2_over_tau},
                                       {"units", "length^2/time"},
                                       {"source", "jko run"}};
        sum.data["sizes"] = {{"cells", gm0.grid.cells()},
                             {"steps", traj.times.size()}};
        sum.data["tolerances"] = {{"eps", sc.eps},
                                  {"tau", sc.schedule.dt},
                                  {"h", gm0.grid.h}};
    } else { // fv
        const GridMeasure& gm0 = *sc.initial_grid;
        JkoTrajectory traj =
            fv_solve(gm0, pot, dom, sc.eps, sc.schedule.dt, sc.schedule.T,
                     sc.schedule.record_every);
        write_grid_csv(traj.grids.back(), out_dir + "/grid_last.csv");
        double mass_err = 0;
        for (const auto& g : traj.grids)
            mass_err = std::max(mass_err, std::abs(g.total_mass() - 1.0));
        flags["mass_ok"] = mass_err <= 1e-8;
        sum.data["tables"]["energy"] = {{"t", traj.times},
                                        {"phi_eps", traj.energies},
                                        {"units", "time, energy"},
                                        {"source", "fv run"}};
        sum.data["metrics"] = {{"mass_drift", mass_err}};
        sum.data["sizes"] = {{"cells", gm0.grid.cells()},
                             {"steps", traj.times.size()}};
        sum.data["tolerances"] = {{"eps", sc.eps},
                                  {"dt", sc.schedule.dt},
                                  {"h", gm0.grid.h}};
    }

    sum.data["flags"] = flags;
    sum.pass_all = true;
    for (auto& [k, v] : flags.items())
        if (v.is_boolean() && !v.get<bool>()) sum.pass_all = false;
    sum.write(out_dir + "/summary.json");
    emit_plots(sum, out_dir);
    return sum;
}

ExperimentSummary run_scenario(const std::string& path,
                               const std::string& out_dir, int threads) {
    return run_scenario(load_scenario(path), out_dir, threads);
}

// ---------------------------------------------------------------------------
// Cosine-domain experiments

double cosine_theta(double x) {
    double s = std::sin(2 * kPi * x), c = std::cos(2 * kPi * x);
    return -(c - 2 * kPi * x * s) / (1 + 4 * kPi * kPi * s * s);
}

namespace {

// 2 pi x - cot(2 pi x); poles at half-integers bracket each root
double cot_gap(double x) {
    double s = std::sin(2 * kPi * x);
    return 2 * kPi * x - std::cos(2 * kPi * x) / s;
}

double bisect_root(double a, double b) {
    double fa = cot_gap(a), fb = cot_gap(b);
    if (fa * fb > 0)
        throw SolverError("cosine_equilibria: bracketing failure");
    for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + b);
        double fm = cot_gap(m);
        if (fa * fm <= 0) {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    return 0.5 * (a + b);
}

} // namespace

std::vector<EquilibriumRow> cosine_equilibria(int n_min, int n_max) {
    if (n_min < 2) throw SolverError("cosine_equilibria: need N >= 2");
    std::vector<EquilibriumRow> rows;
    for (int N = n_min; N <= n_max; ++N) {
        double r1 = bisect_root(N - 0.5 + 1e-9, N - 1e-9);
        double r2 = bisect_root(N + 1e-9, N + 0.5 - 1e-9);
        // classify by the sign of dtheta/dx
        auto dtheta = [](double x) {
            return (cosine_theta(x + 1e-7) - cosine_theta(x - 1e-7)) / 2e-7;
        };
        EquilibriumRow row;
        row.N = N;
        if (dtheta(r1) < 0) {
            row.stable = r1;
            row.unstable = r2;
        } else {
            row.stable = r2;
            row.unstable = r1;
        }
        rows.push_back(row);
    }
    return rows;
}

InstabilityResult instability_experiment(double alpha,
                                         const std::string& mass_law,
                                         const std::vector<int>& n_list,
                                         double t0, double beta, int threads) {
    if (alpha <= 0 || alpha >= 1)
        throw SolverError("instability_experiment: need 0 < alpha < 1");
    if (mass_law != "exponential" && mass_law != "power")
        throw SolverError("instability_experiment: unknown mass law");
    if (mass_law == "power" && beta <= 3)
        throw SolverError("instability_experiment: power law needs beta > 3");
    if (t0 <= 0) throw SolverError("instability_experiment: need t0 > 0");

    CosineDomain dom;
    PotentialPair pot(std::make_shared<SaddleField>(),
                      std::make_shared<ZeroField>());
    int j_lo = *std::min_element(n_list.begin(), n_list.end());
    int j_hi = *std::max_element(n_list.begin(), n_list.end()) + 30;

    // W = 0: particles evolve independently, so each trajectory is computed
    // once; the chains share every particle with index < n.
    auto evolve = [&](double x0) {
        ParticleEnsemble e;
        Vec p(2);
        p << x0, std::cos(2 * kPi * x0);
        e.x = {p};
        e.m = {1.0};
        e.t = 0.0;
        double vmax = std::sqrt((x0 + 2) * (x0 + 2) + 1.0) + 1.0;
        double dt = std::min(dom.prox_radius() / (10 * vmax), 1.0 / 11);
        ParticleTrajectory tr =
            simulate(e, pot, dom, t0, dt, 1 << 30); // record endpoints only
        return tr.snapshots.back().x[0];
    };

    int count = j_hi - j_lo + 1;
    std::vector<Vec> unpert(count), pert(count);
    {
        auto work = [&](int lo, int hi) {
            for (int idx = lo; idx < hi; ++idx) {
                int j = j_lo + idx;
                unpert[idx] = evolve(double(j));
                pert[idx] = evolve(j + std::pow(double(j), -alpha));
            }
        };
        int nt = std::max(1, std::min<int>(threads, count));
        if (nt == 1) {
            work(0, count);
        } else {
            std::vector<std::thread> pool;
            int chunk = (count + nt - 1) / nt;
            for (int k = 0; k < nt; ++k)
                pool.emplace_back(work, std::min(count, k * chunk),
                                  std::min(count, (k + 1) * chunk));
            for (auto& th : pool) th.join();
        }
    }

    InstabilityResult out;
    for (int idx = 0; idx < count; ++idx) {
        out.perturbed_final_x.push_back(pert[idx](0));
        out.perturbed_index.push_back(j_lo + idx);
    }

    // total chain mass, for the absolute scale of the tail distances
    long double full_mass = 0;
    if (mass_law == "exponential") {
        full_mass = std::exp(-1.0L) / (1.0L - std::exp(-1.0L));
    } else {
        for (int j = 1; j <= j_hi; ++j) full_mass += std::pow((long double)j, -beta);
    }

    for (int n : n_list) {
        // the chains share every particle below n, so the distance reduces
        // to the differing tails; weights renormalized within the tail and
        // the tail mass fraction restored as an overall sqrt factor
        DiscreteMeasure a0, b0, a1, b1;
        long double tot = 0;
        std::vector<double> w;
        for (int j = n; j <= j_hi; ++j) {
            double wj = mass_law == "exponential"
                            ? std::exp(-(double)(j - n))
                            : std::pow(double(j), -beta);
            w.push_back(wj);
            tot += wj;
        }
        long double tail_mass =
            mass_law == "exponential"
                ? std::exp((long double)-n) / (1.0L - std::exp(-1.0L))
                : [&] {
                      long double s = 0;
                      for (int j = n; j <= j_hi; ++j)
                          s += std::pow((long double)j, -beta);
                      return s;
                  }();
        double scale =
            std::sqrt(static_cast<double>(tail_mass / full_mass));
        for (int j = n; j <= j_hi; ++j) {
            int idx = j - j_lo;
            double wj = static_cast<double>(w[j - n] / tot);
            double ja = j + std::pow(double(j), -alpha);
            Vec p0(2), q0(2);
            p0 << double(j), std::cos(2 * kPi * j);
            q0 << ja, std::cos(2 * kPi * ja);
            a0.points.push_back(p0);
            a0.w.push_back(wj);
            b0.points.push_back(q0);
            b0.w.push_back(wj);
            a1.points.push_back(unpert[idx]);
            a1.w.push_back(wj);
            b1.points.push_back(pert[idx]);
            b1.w.push_back(wj);
        }
        double d0 = scale * wasserstein(a0, b0).distance;
        double d1 = scale * wasserstein(a1, b1).distance;
        out.rows.push_back({n, d0, d1, d0 > 0 ? d1 / d0 : 1.0});
    }
    return out;
}

StabilityResult stability_experiment(const MovingDomain& dom,
                                     const PotentialPair& pot,
                                     const ParticleEnsemble& base,
                                     const std::vector<double>& delta0_list,
                                     double T, double dt, std::uint64_t seed) {
    StabilityResult out;
    ParticleTrajectory base_traj = simulate(base, pot, dom, T, dt, 1 << 30);
    const ParticleEnsemble& baseT = base_traj.snapshots.back();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double delta0 : delta0_list) {
        if (delta0 == 0.0) {
            // identical pair: both trajectories coincide, report C = 1
            out.rows.push_back({0.0, 0.0, 0.0, 1.0});
            continue;
        }
        ParticleEnsemble pert = base;
        for (auto& p : pert.x) {
            Vec u(p.size());
            for (int k = 0; k < p.size(); ++k) u(k) = g(rng);
            if (u.norm() > 0) p += delta0 * u / u.norm();
            p = project_point(p, 0.0, dom);
        }
        double d0 = wasserstein_distance(base.to_measure(), pert.to_measure());
        ParticleTrajectory pt = simulate(pert, pot, dom, T, dt, 1 << 30);
        double dT = wasserstein_distance(baseT.to_measure(),
                                         pt.snapshots.back().to_measure());
        out.rows.push_back({delta0, d0, dT, d0 > 1e-12 ? dT / d0 : 1.0});
    }
    // fitted exponent p from log dT against log d0
    std::vector<double> lx, ly;
    for (const auto& r : out.rows)
        if (r.d0 > 0 && r.dT > 0) {
            lx.push_back(std::log(r.d0));
            ly.push_back(std::log(r.dT));
        }
    if (lx.size() >= 2) {
        double mx = 0, my = 0;
        for (size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= lx.size();
        my /= ly.size();
        double num = 0, den = 0;
        for (size_t i = 0; i < lx.size(); ++i) {
            num += (lx[i] - mx) * (ly[i] - my);
            den += (lx[i] - mx) * (lx[i] - mx);
        }
        if (den > 0) out.fitted_p = num / den;
    }
    return out;
}

ExperimentSummary viscosity_experiment(const Scenario& sc,
                                       const std::vector<double>& eps_list,
                                       const std::string& out_dir) {
    fs::create_directories(out_dir);
    if (!sc.initial_grid)
        throw SchemaError("initial.type: viscosity experiment needs grid data");
    const GridMeasure& gm0 = *sc.initial_grid;
    const MovingDomain& dom = *sc.domain;
    const PotentialPair& pot = *sc.potentials;

    // first-order reference: quantile particles of the initial density (1-D)
    DiscreteMeasure ref0;
    DiscreteMeasure atoms = gm0.to_discrete();
    if (gm0.grid.dim() == 1) {
        const int nref = 400;
        std::vector<std::pair<double, double>> sorted;
        for (int i = 0; i < atoms.size(); ++i)
            if (atoms.w[i] > 0) sorted.push_back({atoms.points[i](0), atoms.w[i]});
        std::sort(sorted.begin(), sorted.end());
        size_t pos = 0;
        double acc = 0;
        for (int i = 0; i < nref; ++i) {
            double q = (i + 0.5) / nref;
            while (pos < sorted.size() && acc + sorted[pos].second < q)
                acc += sorted[pos++].second;
            Vec p(1);
            p(0) = sorted[std::min(pos, sorted.size() - 1)].first;
            ref0.points.push_back(p);
            ref0.w.push_back(1.0 / nref);
        }
    } else {
        for (int i = 0; i < atoms.size(); ++i)
            if (atoms.w[i] > 0) {
                ref0.points.push_back(atoms.points[i]);
                ref0.w.push_back(atoms.w[i]);
            }
        double tot = ref0.total_mass();
        for (double& v : ref0.w) v /= tot;
    }

    ViscosityGapResult gap =
        viscosity_gap(gm0, ref0, pot, dom, eps_list, sc.schedule.dt,
                      sc.schedule.T, sc.schedule.dt / 5);

    std::string csv;
    {
        std::ostringstream o;
        o.precision(17);
        o << "eps,t,gap\n";
        for (const auto& r : gap.rows)
            o << r.eps << "," << r.t << "," << r.gap << "\n";
        csv = o.str();
        std::ofstream f(out_dir + "/viscosity.csv");
        f << csv;
    }
    std::string data_hash = fnv1a_hex(csv);

    // monotone-in-eps flag at the final time (5% slack)
    bool monotone = true;
    {
        std::vector<std::pair<double, double>> finals; // (eps, gap at T)
        for (double e : eps_list) {
            double tbest = -1, g = 0;
            for (const auto& r : gap.rows)
                if (r.eps == e && r.t > tbest) {
                    tbest = r.t;
                    g = r.gap;
                }
            finals.push_back({e, g});
        }
        std::sort(finals.begin(), finals.end()); // ascending eps
        for (size_t i = 0; i + 1 < finals.size(); ++i)
            if (finals[i].second > finals[i + 1].second * 1.05)
                monotone = false;
    }

    ExperimentSummary sum;
    sum.scenario_hash = sc.hash();
    {
        std::vector<double> es, ts, gs;
        for (const auto& r : gap.rows) {
            es.push_back(r.eps);
            ts.push_back(r.t);
            gs.push_back(r.gap);
        }
        sum.data["tables"]["viscosity"] = {{"eps", es},
                                           {"t", ts},
                                           {"gap", gs},
                                           {"units", "viscosity, time, d_W"},
                                           {"source", "viscosity sweep"}};
    }
    sum.data["fitted"] = {{"C", gap.fitted_C}, {"c", gap.fitted_c}};
    sum.data["data_hash"] = data_hash;
    sum.data["flags"] = {{"monotone_in_eps", monotone}};
    sum.data["tolerances"] = {{"tau", sc.schedule.dt},
                              {"exponent", 1.0 / (gm0.grid.dim() + 2)}};
    sum.pass_all = monotone;
    sum.write(out_dir + "/summary.json");

    // log-log plot of the final-time gaps against eps
    SvgPlot plot;
    plot.set_log_log(true);
    plot.set_title("viscosity gap vs eps (log-log)");
    {
        std::vector<double> es, gs;
        for (double e : eps_list) {
            double tbest = -1, g = 0;
            for (const auto& r : gap.rows)
                if (r.eps == e && r.t > tbest) {
                    tbest = r.t;
                    g = r.gap;
                }
            es.push_back(e);
            gs.push_back(std::max(g * g, 1e-300));
        }
        plot.add_points(es, gs);
        plot.annotate("bound slope 1/(d+2), fitted C=" +
                      std::to_string(gap.fitted_C) +
                      ", c=" + std::to_string(gap.fitted_c));
    }
    plot.write(out_dir + "/viscosity_loglog.svg", "data-hash: " + data_hash);
    return sum;
}

std::vector<std::string> emit_plots(const ExperimentSummary& summary,
                                    const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    const std::string hash_note = "data-hash: " + summary.summary_hash();
    if (summary.data.contains("tables")) {
        const auto& tables = summary.data["tables"];
        if (tables.contains("energy")) {
            SvgPlot p;
            p.set_title("energy decay");
            auto ts = tables["energy"]["t"].get<std::vector<double>>();
            std::string key =
                tables["energy"].contains("phi") ? "phi" : "phi_eps";
            auto es = tables["energy"][key].get<std::vector<double>>();
            p.add_line(ts, es);
            std::string path = out_dir + "/energy.svg";
            p.write(path, hash_note);
            written.push_back(path);
        }
        if (tables.contains("trajectory_xy")) {
            SvgPlot p;
            p.set_title("particle trajectories");
            auto xs = tables["trajectory_xy"]["x"]
                          .get<std::vector<std::vector<double>>>();
            auto ys = tables["trajectory_xy"]["y"]
                          .get<std::vector<std::vector<double>>>();
            for (size_t i = 0; i < xs.size(); ++i) p.add_line(xs[i], ys[i]);
            std::string path = out_dir + "/trajectory.svg";
            p.write(path, hash_note);
            written.push_back(path);
        }
        if (tables.contains("viscosity")) {
            SvgPlot p;
            p.set_log_log(true);
            p.set_title("viscosity sweep");
            auto es = tables["viscosity"]["eps"].get<std::vector<double>>();
            auto gs = tables["viscosity"]["gap"].get<std::vector<double>>();
            p.add_points(es, gs);
            std::string path = out_dir + "/viscosity_points.svg";
            p.write(path, hash_note);
            written.push_back(path);
        }
    }
    return written;
}

} // namespace pgflow
