#include "pgflow/particles.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace pgflow {

double ParticleEnsemble::second_moment() const {
    long double s = 0;
    for (int i = 0; i < size(); ++i) s += (long double)m[i] * x[i].squaredNorm();
    return static_cast<double>(s);
}

DiscreteMeasure ParticleEnsemble::to_measure() const { return {x, m}; }

void ParticleEnsemble::validate(const MovingDomain* dom) const {
    if (x.size() != m.size() || x.empty())
        throw SizeError("ParticleEnsemble: empty or mismatched arrays");
    long double s = 0;
    for (double v : m) {
        if (v < 0) throw SizeError("ParticleEnsemble: negative mass");
        s += v;
    }
    if (std::abs(static_cast<double>(s) - 1.0) > 1e-12)
        throw SizeError("ParticleEnsemble: masses sum to " +
                        std::to_string(static_cast<double>(s)));
    if (dom) {
        const double band = dom->boundary_band(t);
        for (const Vec& p : x)
            if (dom->signed_distance(p, t) > band)
                throw DomainError("ParticleEnsemble: particle outside domain");
    }
}

Vec interaction_velocity(const ParticleEnsemble& ens, const PotentialPair& pot,
                         const Vec& x) {
    Vec w = -pot.V().gradient(x);
    for (int j = 0; j < ens.size(); ++j) {
        Vec d = x - ens.x[j];
        if (d.squaredNorm() == 0.0) continue; // grad W(0) = 0 for even C^1 W
        w -= ens.m[j] * pot.W().gradient(d);
    }
    return w;
}

std::vector<Vec> interaction_velocities(const ParticleEnsemble& ens,
                                        const PotentialPair& pot,
                                        int threads) {
    const int n = ens.size();
    std::vector<Vec> w(n);
    auto work = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i)
            w[i] = interaction_velocity(ens, pot, ens.x[i]);
    };
    if (threads <= 1 || n < 64) {
        work(0, n);
    } else {
        int nt = std::min<int>(threads, std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::thread> pool;
        int chunk = (n + nt - 1) / nt;
        for (int k = 0; k < nt; ++k)
            pool.emplace_back(work, std::min(n, k * chunk),
                              std::min(n, (k + 1) * chunk));
        for (auto& th : pool) th.join();
    }
    return w;
}

ParticleEnsemble step(const ParticleEnsemble& ens, const PotentialPair& pot,
                      const MovingDomain& dom, double dt, int threads) {
    if (dt <= 0) throw StepSizeError("step: dt must be positive");
    if (3 * dom.hausdorff_lipschitz() * dt / dom.prox_radius() >= 1)
        throw StepSizeError("step: 3 L dt / r_p >= 1");
    std::vector<Vec> w = interaction_velocities(ens, pot, threads);
    ParticleEnsemble out;
    out.m = ens.m;
    out.t = ens.t + dt;
    out.x.resize(ens.size());
    for (int i = 0; i < ens.size(); ++i) {
        Vec v = project_velocity(w[i], ens.x[i], ens.t, dom);
        out.x[i] = project_point(ens.x[i] + dt * v, out.t, dom);
    }
    return out;
}

ParticleTrajectory simulate(const ParticleEnsemble& ens0,
                            const PotentialPair& pot, const MovingDomain& dom,
                            double T, double dt, int record_every,
                            int threads) {
    ens0.validate(&dom);
    record_every = std::max(record_every, 1);
    ParticleTrajectory traj;
    auto record = [&](const ParticleEnsemble& e) {
        traj.times.push_back(e.t);
        traj.snapshots.push_back(e);
        traj.energies.push_back(energy_phi(e, pot));
        traj.second_moments.push_back(e.second_moment());
    };
    ParticleEnsemble cur = ens0;
    record(cur);
    const long nsteps = static_cast<long>(std::ceil(T / dt - 1e-12));
    for (long k = 0; k < nsteps; ++k) {
        double h = std::min(dt, T - (cur.t - ens0.t));
        if (h <= 0) break;
        cur = step(cur, pot, dom, h, threads);
        if ((k + 1) % record_every == 0 || k + 1 == nsteps) record(cur);
    }
    return traj;
}

double energy_phi(const ParticleEnsemble& ens, const PotentialPair& pot) {
    long double e = 0;
    for (int i = 0; i < ens.size(); ++i)
        e += (long double)ens.m[i] * pot.V().value(ens.x[i]);
    for (int i = 0; i < ens.size(); ++i)
        for (int j = 0; j < ens.size(); ++j)
            e += 0.5L * ens.m[i] * ens.m[j] *
                 pot.W().value(ens.x[i] - ens.x[j]);
    return static_cast<double>(e);
}

double tail_mass(const ParticleEnsemble& ens, double R) {
    if (R < 0) throw SizeError("tail_mass: R must be nonnegative");
    long double s = 0;
    for (int i = 0; i < ens.size(); ++i) {
        double r2 = ens.x[i].squaredNorm();
        if (std::sqrt(r2) > R) s += (long double)ens.m[i] * r2;
    }
    return static_cast<double>(s);
}

double default_time_step(const ParticleEnsemble& ens, const PotentialPair& pot,
                         const MovingDomain& dom) {
    std::vector<Vec> w = interaction_velocities(ens, pot);
    double vmax = 1e-12;
    for (int i = 0; i < ens.size(); ++i)
        vmax = std::max(vmax, w[i].norm() +
                                  std::abs(dom.boundary_speed(ens.x[i], ens.t)));
    double lam = std::abs(pot.lambda());
    return std::min(dom.prox_radius() / (10 * vmax), 1.0 / (10 * lam + 1));
}

SlopeAudit maximal_slope_audit(const ParticleTrajectory& traj,
                               const PotentialPair& pot,
                               const MovingDomain& dom) {
    SlopeAudit audit;
    const size_t n = traj.times.size();
    if (n < 2) return audit;

    // space integrals of |Pw|^2 and (w - Pw).Pw at each recorded time
    std::vector<double> proj_sq(n, 0.0), extra(n, 0.0);
    for (size_t k = 0; k < n; ++k) {
        const ParticleEnsemble& e = traj.snapshots[k];
        std::vector<Vec> w = interaction_velocities(e, pot);
        long double ps = 0, ex = 0;
        for (int i = 0; i < e.size(); ++i) {
            Vec pw = project_velocity(w[i], e.x[i], e.t, dom);
            ps += (long double)e.m[i] * pw.squaredNorm();
            ex += (long double)e.m[i] * (w[i] - pw).dot(pw);
        }
        proj_sq[k] = static_cast<double>(ps);
        extra[k] = static_cast<double>(ex);
    }

    for (size_t k = 0; k + 1 < n; ++k) {
        double dt = traj.times[k + 1] - traj.times[k];
        double dw = wasserstein_distance(traj.snapshots[k].to_measure(),
                                         traj.snapshots[k + 1].to_measure());
        double speed2 = dw * dw / dt; // int |mu'|^2 over the interval
        double proj_term = 0.5 * dt * (proj_sq[k] + proj_sq[k + 1]) / 2;
        double extra_term = dt * (extra[k] + extra[k + 1]) / 2;
        double residual = traj.energies[k] - traj.energies[k + 1] -
                          0.5 * speed2 - proj_term - extra_term;
        audit.residuals.push_back(residual);
        audit.extra_terms.push_back(extra_term);
        audit.metric_speeds.push_back(dw / dt);
    }
    return audit;
}

} // namespace pgflow
