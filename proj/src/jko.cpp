#include "pgflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pgflow/particles.hpp"

namespace pgflow {

int GridSpec::cells() const {
    int n = 1;
    for (int d : dims) n *= d;
    return n;
}

Vec GridSpec::cell_center(int k) const {
    Vec c(dim());
    for (int a = 0; a < dim(); ++a) {
        int i = k % dims[a];
        k /= dims[a];
        c(a) = lo(a) + (i + 0.5) * h;
    }
    return c;
}

double GridSpec::cell_volume() const { return std::pow(h, dim()); }

double GridMeasure::total_mass() const {
    long double s = 0;
    for (double v : u) s += v;
    return static_cast<double>(s * grid.cell_volume());
}

double GridMeasure::second_moment() const {
    long double s = 0;
    for (int k = 0; k < grid.cells(); ++k)
        if (u[k] > 0) s += (long double)u[k] * grid.cell_center(k).squaredNorm();
    return static_cast<double>(s * grid.cell_volume());
}

void GridMeasure::validate() const {
    if (static_cast<int>(u.size()) != grid.cells() ||
        mask.size() != u.size())
        throw SizeError("GridMeasure: array sizes do not match the lattice");
    for (int k = 0; k < grid.cells(); ++k) {
        if (u[k] < 0) throw SizeError("GridMeasure: negative density");
        if (!mask[k] && u[k] != 0.0)
            throw SizeError("GridMeasure: mass outside the mask");
    }
    if (std::abs(total_mass() - 1.0) > 1e-8)
        throw SizeError("GridMeasure: mass " + std::to_string(total_mass()));
}

DiscreteMeasure GridMeasure::to_discrete() const {
    DiscreteMeasure m;
    const double vol = grid.cell_volume();
    for (int k = 0; k < grid.cells(); ++k) {
        if (!mask[k]) continue;
        m.points.push_back(grid.cell_center(k));
        m.w.push_back(u[k] * vol);
    }
    return m;
}

double GridMeasure::l1_distance(const GridMeasure& other) const {
    if (grid.cells() != other.grid.cells())
        throw SizeError("l1_distance: lattice mismatch");
    long double s = 0;
    for (size_t k = 0; k < u.size(); ++k) s += std::abs(u[k] - other.u[k]);
    return static_cast<double>(s * grid.cell_volume());
}

std::vector<std::uint8_t> domain_mask(const MovingDomain& dom,
                                      const GridSpec& grid, double t) {
    std::vector<std::uint8_t> mask(grid.cells(), 0);
    for (int k = 0; k < grid.cells(); ++k)
        mask[k] = dom.contains(grid.cell_center(k), t) ? 1 : 0;
    return mask;
}

GridMeasure make_grid_measure(const GridSpec& grid, const MovingDomain& dom,
                              double t,
                              const std::function<double(const Vec&)>& profile) {
    GridMeasure gm;
    gm.grid = grid;
    gm.t = t;
    gm.mask = domain_mask(dom, grid, t);
    gm.u.assign(grid.cells(), 0.0);
    long double mass = 0;
    for (int k = 0; k < grid.cells(); ++k) {
        if (!gm.mask[k]) continue;
        double v = std::max(profile(grid.cell_center(k)), 0.0);
        gm.u[k] = v;
        mass += v;
    }
    if (mass <= 0) throw DomainError("make_grid_measure: empty support");
    double scale = static_cast<double>(mass) * grid.cell_volume();
    for (double& v : gm.u) v /= scale;
    return gm;
}

void JkoConfig::validate() const {
    if (tau <= 0) throw SchemaError("jko.tau: must be positive");
    if (eps <= 0)
        throw SchemaError("jko.eps: must be positive (the first-order system "
                          "lives in the particle solver)");
}

double energy_phi_eps(const GridMeasure& gm, const PotentialPair& pot,
                      double eps) {
    const double vol = gm.grid.cell_volume();
    long double entropy = 0, potential = 0, interaction = 0;
    std::vector<int> cells;
    for (int k = 0; k < gm.grid.cells(); ++k)
        if (gm.mask[k] && gm.u[k] > 0) cells.push_back(k);
    std::vector<Vec> centers(cells.size());
    for (size_t a = 0; a < cells.size(); ++a)
        centers[a] = gm.grid.cell_center(cells[a]);
    for (size_t a = 0; a < cells.size(); ++a) {
        double uk = gm.u[cells[a]];
        entropy += (long double)uk * std::log(uk) * vol;
        potential += (long double)pot.V().value(centers[a]) * uk * vol;
    }
    if (pot.W().growth_constant() > 0 || pot.W().hessian_bound() > 0) {
        for (size_t a = 0; a < cells.size(); ++a)
            for (size_t b = 0; b < cells.size(); ++b)
                interaction += 0.5L * gm.u[cells[a]] * gm.u[cells[b]] *
                               pot.W().value(centers[a] - centers[b]) * vol * vol;
    }
    return static_cast<double>(eps * entropy + potential + interaction);
}

// ---------------------------------------------------------------------------
// Inner solver for one minimizing movement.

namespace {

// masses nu_j at target cells; mass-form energy used by the inner solvers
double mass_form_energy(const std::vector<double>& nu,
                        const std::vector<double>& V_at,
                        const Eigen::MatrixXd* Wk, double eps, double logvol) {
    long double e = 0;
    const int M = static_cast<int>(nu.size());
    for (int j = 0; j < M; ++j) {
        if (nu[j] > 0) e += (long double)eps * nu[j] * (std::log(nu[j]) - logvol);
        e += (long double)V_at[j] * nu[j];
    }
    if (Wk) {
        for (int j = 0; j < M; ++j) {
            if (nu[j] == 0) continue;
            long double row = 0;
            for (int l = 0; l < M; ++l) row += (*Wk)(j, l) * nu[l];
            e += 0.5L * nu[j] * row;
        }
    }
    return static_cast<double>(e);
}

struct ScalingResult {
    std::vector<double> nu;
    int iterations = 0;
    double residual = 0.0;
};

// Stabilized scaling iterations for
//   min_{gamma >= 0, gamma 1 = a} sum C gamma + eta KL(gamma)
//                                 + sum_j [eps nu_j (log(nu_j/h^d)) + V_j nu_j]
// with nu = gamma^T 1. The nu-update has closed form; costs are absorbed
// into anchor duals when the scalings overflow.
ScalingResult entropic_inner(const Eigen::MatrixXd& C,
                             const std::vector<double>& a,
                             const std::vector<double>& V_at, double eps,
                             double logvol, double cell_h,
                             const JkoConfig& cfg,
                             std::vector<double>* warm_f,
                             std::vector<double>* warm_g) {
    const int N = static_cast<int>(a.size());
    const int M = static_cast<int>(V_at.size());
    const double cmax = std::max(C.maxCoeff(), 1e-12);

    double eta_min = cfg.eta_min;
    if (eta_min <= 0) {
        // keep the entropic blur below half a cell: sqrt(tau*eta) <= h/2
        eta_min = std::max({1e-9, 5e-3 * cfg.eps,
                            cell_h * cell_h / (8 * cfg.tau)});
    }
    std::vector<double> f(N, 0.0), g(M, 0.0);
    bool warm = warm_f && static_cast<int>(warm_f->size()) == N &&
                warm_g && static_cast<int>(warm_g->size()) == M;
    if (warm) {
        f = *warm_f;
        g = *warm_g;
    }

    // cold starts anneal from a coarse temperature; warm duals from the
    // previous step go straight to the target one
    std::vector<double> etas;
    if (!warm) {
        for (double e = std::max(cmax / 8.0, eta_min); e > eta_min * 1.0001;
             e /= 8.0)
            etas.push_back(e);
    }
    etas.push_back(eta_min);

    std::vector<double> p(N, 1.0), q(M, 1.0), nu(M, 1.0 / M);
    Eigen::MatrixXd K(N, M);
    ScalingResult out;

    for (double eta : etas) {
        auto rebuild = [&]() {
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j)
                    K(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eta);
            std::fill(p.begin(), p.end(), 1.0);
            std::fill(q.begin(), q.end(), 1.0);
        };
        rebuild();
        for (int it = 0; it < cfg.max_iters_per_stage; ++it) {
            // row scaling
            for (int i = 0; i < N; ++i) {
                double row = 0;
                for (int j = 0; j < M; ++j) row += K(i, j) * q[j];
                p[i] = a[i] / std::max(row, 1e-290);
            }
            // closed-form nu update
            for (int j = 0; j < M; ++j) {
                double s = 0;
                for (int i = 0; i < N; ++i) s += p[i] * K(i, j);
                double log_s_true = std::log(std::max(s, 1e-300)) - g[j] / eta;
                double log_nu = (log_s_true + (eps * logvol - eps - V_at[j]) / eta) /
                                (1.0 + eps / eta);
                nu[j] = std::exp(log_nu);
                double g_new = eta * (log_nu - log_s_true);
                q[j] = std::exp((g_new - g[j]) / eta);
            }
            ++out.iterations;
            // absorb scalings into the anchors when they drift
            double pm = 0, qm = 0;
            for (double v : p) pm = std::max(pm, std::abs(std::log(std::max(v, 1e-300))));
            for (double v : q) qm = std::max(qm, std::abs(std::log(std::max(v, 1e-300))));
            bool absorb = pm > 25.0 || qm > 25.0;
            bool check = (it % 10 == 9) || absorb;
            if (check) {
                double res = 0;
                for (int i = 0; i < N; ++i) {
                    double row = 0;
                    for (int j = 0; j < M; ++j) row += p[i] * K(i, j) * q[j];
                    res += std::abs(row - a[i]);
                }
                out.residual = res;
                if (res < cfg.marginal_tol) break;
            }
            if (absorb) {
                for (int i = 0; i < N; ++i) f[i] += eta * std::log(std::max(p[i], 1e-300));
                for (int j = 0; j < M; ++j) g[j] += eta * std::log(std::max(q[j], 1e-300));
                rebuild();
            }
        }
        for (int i = 0; i < N; ++i) f[i] += eta * std::log(std::max(p[i], 1e-300));
        for (int j = 0; j < M; ++j) g[j] += eta * std::log(std::max(q[j], 1e-300));
    }
    if (warm_f) *warm_f = f;
    if (warm_g) *warm_g = g;

    // nu from the final duals; normalize the tiny marginal defect away
    long double tot = 0;
    for (double v : nu) tot += v;
    for (double& v : nu) v = static_cast<double>(v / tot);
    out.nu = nu;
    return out;
}

struct LpEval {
    double cost = 0.0;                 // d_W^2(a, nu)
    std::vector<double> target_duals;  // subgradient of cost w.r.t. nu
    TransportPlan plan;
};

LpEval lp_cost_and_duals(const std::vector<Vec>& xs,
                         const std::vector<double>& a,
                         const std::vector<Vec>& ys,
                         const std::vector<double>& nu) {
    DiscreteMeasure mu{xs, a}, target;
    std::vector<int> keep;
    for (int j = 0; j < static_cast<int>(nu.size()); ++j)
        if (nu[j] > 1e-15) {
            keep.push_back(j);
            target.points.push_back(ys[j]);
            target.w.push_back(nu[j]);
        }
    auto res = wasserstein(mu, target);
    LpEval out;
    out.cost = res.plan.cost;
    out.target_duals.assign(nu.size(), 0.0);
    std::vector<char> have(nu.size(), 0);
    for (size_t k = 0; k < keep.size(); ++k) {
        out.target_duals[keep[k]] = res.target_potential[k];
        have[keep[k]] = 1;
    }
    // tight dual extension for cells carrying no mass
    for (int j = 0; j < static_cast<int>(nu.size()); ++j) {
        if (have[j]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(xs.size()); ++i)
            best = std::min(best, (xs[i] - ys[j]).squaredNorm() -
                                      res.source_potential[i]);
        out.target_duals[j] = best;
    }
    // remap plan indices to the full target enumeration
    out.plan.n_source = static_cast<int>(xs.size());
    out.plan.n_target = static_cast<int>(nu.size());
    out.plan.cost = res.plan.cost;
    for (const auto& e : res.plan.entries)
        out.plan.entries.push_back({e.i, keep[e.j], e.mass});
    return out;
}

} // namespace

JkoStepResult jko_step(const GridMeasure& gm, const PotentialPair& pot,
                       const MovingDomain& dom, const JkoConfig& cfg) {
    return jko_step_warm(gm, pot, dom, cfg, nullptr, nullptr);
}

JkoStepResult jko_step_warm(const GridMeasure& gm, const PotentialPair& pot,
                            const MovingDomain& dom, const JkoConfig& cfg,
                            std::vector<double>* warm_f,
                            std::vector<double>* warm_g) {
    cfg.validate();
    gm.validate();
    const double tau = cfg.tau, eps = cfg.eps;
    const double t_next = gm.t + tau;
    const GridSpec& grid = gm.grid;
    const double vol = grid.cell_volume();
    const double logvol = std::log(vol);

    std::vector<std::uint8_t> mask_next = domain_mask(dom, grid, t_next);
    int m_count = 0;
    for (auto m : mask_next) m_count += m;
    if (m_count == 0) throw DomainError("jko_step: empty target mask");

    // source atoms (positive-mass cells of gm); src_ord maps them back to
    // their ordinal in the masked-cell enumeration used by to_discrete()
    std::vector<Vec> xs;
    std::vector<double> a;
    std::vector<int> src_ord;
    {
        int ord = 0;
        for (int k = 0; k < grid.cells(); ++k) {
            if (!gm.mask[k]) continue;
            if (gm.u[k] > 0) {
                xs.push_back(grid.cell_center(k));
                a.push_back(gm.u[k] * vol);
                src_ord.push_back(ord);
            }
            ++ord;
        }
    }
    // target cells
    std::vector<Vec> ys;
    std::vector<int> tgt_cells;
    for (int k = 0; k < grid.cells(); ++k)
        if (mask_next[k]) {
            ys.push_back(grid.cell_center(k));
            tgt_cells.push_back(k);
        }
    const int N = static_cast<int>(xs.size());
    const int M = static_cast<int>(ys.size());
    if (static_cast<std::size_t>(N) * M > 4000000)
        throw SizeError("jko_step: instance exceeds the solver cap");

    const bool has_w = pot.W().growth_constant() > 0 || pot.W().hessian_bound() > 0;
    Eigen::MatrixXd Wk;
    if (has_w) {
        Wk.resize(M, M);
        for (int j = 0; j < M; ++j)
            for (int l = 0; l < M; ++l)
                Wk(j, l) = pot.W().value(ys[j] - ys[l]);
    }
    std::vector<double> Vs(M);
    for (int j = 0; j < M; ++j) Vs[j] = pot.V().value(ys[j]);

    Eigen::MatrixXd C(N, M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            C(i, j) = (xs[i] - ys[j]).squaredNorm() / (2 * tau);

    // feasible candidate: gm pushed through the interior retraction
    std::vector<double> nu_pushed(M, 0.0);
    {
        auto nearest_target = [&](const Vec& y) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int j = 0; j < M; ++j) {
                double d = (ys[j] - y).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            return best;
        };
        for (int i = 0; i < N; ++i) {
            Vec y = dom.hausdorff_lipschitz() > 0
                        ? retraction_map(xs[i], gm.t, tau, dom)
                        : xs[i];
            nu_pushed[nearest_target(y)] += a[i];
        }
    }

    auto effective_V = [&](const std::vector<double>& nu_freeze) {
        std::vector<double> v = Vs;
        if (has_w)
            for (int j = 0; j < M; ++j) {
                double conv = 0;
                for (int l = 0; l < M; ++l) conv += Wk(j, l) * nu_freeze[l];
                v[j] += conv;
            }
        return v;
    };

    // entropic solve with interaction freezing
    std::vector<double> nu = nu_pushed;
    ScalingResult sc;
    const int outer = has_w ? cfg.w_outer_iters : 1;
    for (int o = 0; o < outer; ++o) {
        sc = entropic_inner(C, a, effective_V(nu), eps, logvol, grid.h, cfg,
                            warm_f, warm_g);
        nu = sc.nu;
    }

    // without the exact polish there is no safety net below; require the
    // scaling iterations to have actually converged
    if (M > cfg.exact_polish_max_cells &&
        sc.residual > std::max(1e3 * cfg.marginal_tol, 1e-6))
        throw SolverError("jko_step: scaling iterations stalled, marginal "
                          "residual " + std::to_string(sc.residual));

    const Eigen::MatrixXd* Wp = has_w ? &Wk : nullptr;
    auto objective = [&](const std::vector<double>& v, double lp_cost) {
        return lp_cost / (2 * tau) + mass_form_energy(v, Vs, Wp, eps, logvol);
    };

    LpEval cur = lp_cost_and_duals(xs, a, ys, nu);
    double J = objective(nu, cur.cost);

    // exact polish: mirror descent with LP subgradients
    if (M <= cfg.exact_polish_max_cells) {
        double step = 1.0;
        for (int it = 0; it < cfg.polish_iters; ++it) {
            std::vector<double> gmass(M);
            double mean = 0;
            for (int j = 0; j < M; ++j) {
                double conv = 0;
                if (has_w)
                    for (int l = 0; l < M; ++l) conv += Wk(j, l) * nu[l];
                gmass[j] = cur.target_duals[j] / (2 * tau) + Vs[j] + conv +
                           (nu[j] > 0 ? eps * (std::log(nu[j]) - logvol + 1)
                                      : -1e3 * eps);
                mean += gmass[j] * nu[j];
            }
            double gmax = 1e-12;
            for (int j = 0; j < M; ++j)
                gmax = std::max(gmax, std::abs(gmass[j] - mean));
            double beta = std::min(step, 1.0) / gmax;
            bool accepted = false;
            for (int bt = 0; bt < 25 && !accepted; ++bt, beta *= 0.5) {
                std::vector<double> trial(M);
                long double tot = 0;
                for (int j = 0; j < M; ++j) {
                    trial[j] = std::max(nu[j], 1e-300) *
                               std::exp(-beta * (gmass[j] - mean));
                    tot += trial[j];
                }
                for (double& v : trial) v = static_cast<double>(v / tot);
                LpEval te = lp_cost_and_duals(xs, a, ys, trial);
                double Jt = objective(trial, te.cost);
                if (Jt < J - 1e-15) {
                    nu = trial;
                    cur = te;
                    J = Jt;
                    accepted = true;
                    step = beta * gmax * 2.0;
                }
            }
            if (!accepted) break;
        }
    }

    // safeguard: never do worse than the pushed candidate
    LpEval pushed_eval = lp_cost_and_duals(xs, a, ys, nu_pushed);
    double J_pushed = objective(nu_pushed, pushed_eval.cost);
    if (J_pushed < J) {
        nu = nu_pushed;
        cur = pushed_eval;
        J = J_pushed;
    }

    JkoStepResult out;
    out.next.grid = grid;
    out.next.mask = mask_next;
    out.next.t = t_next;
    out.next.u.assign(grid.cells(), 0.0);
    for (int j = 0; j < M; ++j) out.next.u[tgt_cells[j]] = nu[j] / vol;
    out.dw2 = cur.cost;
    out.energy = mass_form_energy(nu, Vs, Wp, eps, logvol);
    out.energy_pushed =
        mass_form_energy(nu_pushed, Vs, Wp, eps, logvol);
    out.pushed_dw2 = pushed_eval.cost;
    out.scaling_iterations = sc.iterations;
    out.marginal_residual = sc.residual;
    // plan indexed against the masked-cell enumerations of gm and next
    int masked_src = 0;
    for (int k = 0; k < grid.cells(); ++k) masked_src += gm.mask[k] ? 1 : 0;
    out.plan.n_source = masked_src;
    out.plan.n_target = M;
    for (const auto& e : cur.plan.entries)
        out.plan.entries.push_back({src_ord[e.i], e.j, e.mass});
    out.plan.cost = cur.cost;
    return out;
}

JkoTrajectory run_jko(const GridMeasure& gm0, const PotentialPair& pot,
                      const MovingDomain& dom, double eps, double tau,
                      double T, const JkoConfig* base_cfg) {
    JkoConfig cfg = base_cfg ? *base_cfg : JkoConfig{};
    cfg.tau = tau;
    cfg.eps = eps;
    cfg.validate();
    if (!std::isfinite(energy_phi_eps(gm0, pot, eps)))
        throw SolverError("run_jko: initial energy is not finite");

    JkoTrajectory traj;
    GridMeasure cur = gm0;
    traj.times.push_back(cur.t);
    traj.grids.push_back(cur);
    traj.energies.push_back(energy_phi_eps(cur, pot, eps));

    std::vector<double> warm_f, warm_g;
    const long nsteps = static_cast<long>(std::llround(T / tau));
    for (long k = 0; k < nsteps; ++k) {
        JkoStepResult step =
            jko_step_warm(cur, pot, dom, cfg, &warm_f, &warm_g);
        cur = step.next;
        traj.times.push_back(cur.t);
        traj.grids.push_back(cur);
        traj.energies.push_back(step.energy);
        traj.step_dw2.push_back(step.dw2);
        traj.step_energy_pushed.push_back(step.energy_pushed);
        traj.step_pushed_dw2.push_back(step.pushed_dw2);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Finite-volume oracle (exponential-fitting fluxes, no-flux closure).

namespace {

double bernoulli(double z) {
    if (std::abs(z) < 1e-5) return 1.0 - z / 2 + z * z / 12;
    return z / std::expm1(z);
}

} // namespace

JkoTrajectory fv_solve(const GridMeasure& gm0, const PotentialPair& pot,
                       const MovingDomain& dom, double eps, double dt,
                       double T, int record_every) {
    gm0.validate();
    record_every = std::max(record_every, 1);
    const GridSpec& grid = gm0.grid;
    const int d = grid.dim();
    const double h = grid.h;
    const double vol = grid.cell_volume();
    const int K = grid.cells();
    const bool has_w =
        pot.W().growth_constant() > 0 || pot.W().hessian_bound() > 0;

    std::vector<Vec> centers(K);
    for (int k = 0; k < K; ++k) centers[k] = grid.cell_center(k);
    std::vector<int> stride(d, 1);
    for (int a = 1; a < d; ++a) stride[a] = stride[a - 1] * grid.dims[a - 1];

    GridMeasure cur = gm0;
    JkoTrajectory traj;
    auto record = [&](const GridMeasure& g) {
        traj.times.push_back(g.t);
        traj.grids.push_back(g);
        traj.energies.push_back(energy_phi_eps(g, pot, eps));
    };
    record(cur);

    const long nsteps = static_cast<long>(std::ceil(T / dt - 1e-12));
    std::vector<double> veff(K), flux_in(K);
    for (long s = 0; s < nsteps; ++s) {
        double hstep = std::min(dt, T - (cur.t - gm0.t));
        if (hstep <= 0) break;
        // effective potential with the interaction term frozen per step
        for (int k = 0; k < K; ++k) {
            if (!cur.mask[k]) continue;
            veff[k] = pot.V().value(centers[k]);
            if (has_w) {
                double conv = 0;
                for (int l = 0; l < K; ++l)
                    if (cur.u[l] > 0)
                        conv += pot.W().value(centers[k] - centers[l]) *
                                cur.u[l] * vol;
                veff[k] += conv;
            }
        }
        std::fill(flux_in.begin(), flux_in.end(), 0.0);
        double max_coef = 0;
        for (int k = 0; k < K; ++k) {
            if (!cur.mask[k]) continue;
            std::vector<int> idx(d);
            int kk = k;
            for (int a = 0; a < d; ++a) {
                idx[a] = kk % grid.dims[a];
                kk /= grid.dims[a];
            }
            for (int a = 0; a < d; ++a) {
                if (idx[a] + 1 >= grid.dims[a]) continue;
                int nb = k + stride[a];
                if (!cur.mask[nb]) continue; // no-flux closure at the boundary
                double z = (veff[nb] - veff[k]) / eps;
                double bz = bernoulli(z), bmz = bernoulli(-z);
                double F = (eps / h) * (bz * cur.u[k] - bmz * cur.u[nb]);
                flux_in[k] -= F;
                flux_in[nb] += F;
                max_coef = std::max(max_coef, (eps / h) * (bz + bmz));
            }
        }
        // explicit-step stability bound
        double limit = h / (2.0 * d * std::max(max_coef, 1e-300));
        if (hstep > limit)
            throw StepSizeError("fv_solve: dt " + std::to_string(hstep) +
                                " exceeds the stability limit " +
                                std::to_string(limit));
        for (int k = 0; k < K; ++k)
            if (cur.mask[k]) cur.u[k] += hstep * flux_in[k] / h;
        cur.t += hstep;

        // moving mask: re-home any mass stranded outside the new mask
        std::vector<std::uint8_t> m2 = domain_mask(dom, grid, cur.t);
        if (m2 != cur.mask) {
            for (int k = 0; k < K; ++k) {
                if (cur.mask[k] && !m2[k] && cur.u[k] > 0) {
                    int best = -1;
                    double bd = std::numeric_limits<double>::infinity();
                    for (int l = 0; l < K; ++l)
                        if (m2[l]) {
                            double dd = (centers[l] - centers[k]).squaredNorm();
                            if (dd < bd) {
                                bd = dd;
                                best = l;
                            }
                        }
                    cur.u[best] += cur.u[k];
                    cur.u[k] = 0;
                }
            }
            cur.mask = m2;
        }
        if ((s + 1) % record_every == 0 || s + 1 == nsteps) record(cur);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange residual

namespace {

double bump(double r) {
    if (std::abs(r) >= 1.0 - 1e-12) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r * r));
}

double bump_deriv(double r) {
    if (std::abs(r) >= 1.0 - 1e-12) return 0.0;
    double q = 1.0 - r * r;
    return bump(r) * (-2.0 * r / (q * q));
}

} // namespace

std::vector<BumpField> default_test_fields(const GridMeasure& gm) {
    // mass center and extent of the masked region
    const int d = gm.grid.dim();
    Vec lo = Vec::Constant(d, 1e300), hi = Vec::Constant(d, -1e300);
    for (int k = 0; k < gm.grid.cells(); ++k) {
        if (!gm.mask[k]) continue;
        Vec c = gm.grid.cell_center(k);
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    Vec mid = 0.5 * (lo + hi);
    double extent = (hi - lo).maxCoeff();
    std::vector<BumpField> fields;
    for (int a = 0; a < d; ++a) {
        fields.push_back({mid, 0.55 * extent, a});
        fields.push_back({mid, 0.3 * extent, a});
        for (int b = 0; b < d; ++b) {
            Vec c1 = mid, c2 = mid;
            c1(b) -= 0.2 * extent;
            c2(b) += 0.2 * extent;
            fields.push_back({c1, 0.25 * extent, a});
            fields.push_back({c2, 0.25 * extent, a});
        }
    }
    return fields;
}

double euler_lagrange_residual(const GridMeasure& gm_prev,
                               const GridMeasure& gm_next,
                               const TransportPlan& plan,
                               const PotentialPair& pot, double eps,
                               double tau,
                               const std::vector<BumpField>& fields) {
    // plan indices reference the masked-cell enumerations on both sides
    std::vector<Vec> xs = gm_prev.to_discrete().points;
    std::vector<Vec> ys;
    std::vector<double> nu;
    const double vol = gm_next.grid.cell_volume();
    for (int k = 0; k < gm_next.grid.cells(); ++k)
        if (gm_next.mask[k]) {
            ys.push_back(gm_next.grid.cell_center(k));
            nu.push_back(gm_next.u[k] * vol);
        }
    const bool has_w =
        pot.W().growth_constant() > 0 || pot.W().hessian_bound() > 0;
    const int M = static_cast<int>(ys.size());

    double worst = 0.0;
    for (const BumpField& fld : fields) {
        auto psi = [&](const Vec& y) {
            double r = (y - fld.center).norm() / fld.width;
            return bump(r);
        };
        auto div_psi = [&](const Vec& y) {
            Vec dvec = y - fld.center;
            double r = dvec.norm() / fld.width;
            if (r < 1e-14) return 0.0;
            return bump_deriv(r) * dvec(fld.axis) /
                   (dvec.norm() * fld.width);
        };
        long double acc = 0;
        for (const auto& e : plan.entries)
            acc += (long double)e.mass *
                   (ys[e.j](fld.axis) - xs[e.i](fld.axis)) * psi(ys[e.j]);
        for (int j = 0; j < M; ++j) {
            if (nu[j] == 0) continue;
            double conv = 0;
            if (has_w)
                for (int l = 0; l < M; ++l)
                    if (nu[l] > 0)
                        conv += pot.W().gradient(ys[j] - ys[l])(fld.axis) * nu[l];
            double drift = pot.V().gradient(ys[j])(fld.axis) + conv;
            acc += (long double)tau * nu[j] *
                   (-eps * div_psi(ys[j]) + drift * psi(ys[j]));
        }
        worst = std::max(worst, std::abs(static_cast<double>(acc)));
    }
    return worst;
}

double euler_lagrange_residual(const GridMeasure& gm_prev,
                               const GridMeasure& gm_next,
                               const TransportPlan& plan,
                               const PotentialPair& pot, double eps,
                               double tau) {
    return euler_lagrange_residual(gm_prev, gm_next, plan, pot, eps, tau,
                                   default_test_fields(gm_next));
}

// ---------------------------------------------------------------------------
// Vanishing-viscosity comparison

ViscosityGapResult viscosity_gap(const GridMeasure& gm0,
                                 const DiscreteMeasure& reference0,
                                 const PotentialPair& pot,
                                 const MovingDomain& dom,
                                 const std::vector<double>& eps_list,
                                 double tau, double T, double particle_dt) {
    if (!dom.convex())
        throw DomainError(
            "viscosity_gap: the convergence theorem needs a convex domain");

    // first-order reference: particle solution recorded on the tau-grid
    ParticleEnsemble ens0;
    ens0.x = reference0.points;
    ens0.m = reference0.w;
    ens0.t = gm0.t;
    int sub = std::max(1, static_cast<int>(std::ceil(tau / particle_dt)));
    double pdt = tau / sub;
    ParticleTrajectory ref = simulate(ens0, pot, dom, T, pdt, sub);

    ViscosityGapResult out;
    const int d = gm0.grid.dim();
    for (double eps : eps_list) {
        JkoTrajectory tr = run_jko(gm0, pot, dom, eps, tau, T);
        size_t n = std::min(tr.times.size(), ref.times.size());
        for (size_t k = 0; k < n; ++k) {
            double gap = wasserstein_distance(tr.grids[k].to_discrete(),
                                              ref.snapshots[k].to_measure());
            out.rows.push_back({eps, tr.times[k] - gm0.t, gap});
        }
    }

    // single bound d_W^2 <= C eps^{1/(d+2)} t e^{ct}: pick c minimizing C
    double best_c = 0, best_C = std::numeric_limits<double>::infinity();
    for (double c = 0.0; c <= 4.0 + 1e-9; c += 0.25) {
        double C = 0;
        for (const auto& row : out.rows) {
            if (row.t <= 0) continue;
            C = std::max(C, row.gap * row.gap /
                                (std::pow(row.eps, 1.0 / (d + 2)) * row.t *
                                 std::exp(c * row.t)));
        }
        if (C < best_C) {
            best_C = C;
            best_c = c;
        }
    }
    out.fitted_C = best_C;
    out.fitted_c = best_c;
    return out;
}

} // namespace pgflow
