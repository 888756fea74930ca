#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ppde/generator.hpp"

namespace ppde {

struct McOptions {
    long paths = 20000;     // per block; antithetic pairing rounds this up to even
    int steps_per_slab = 16;
    int blocks = 4;
    std::uint64_t seed = 12345;
    bool antithetic = true;
    bool force_lsmc = false;     // run affine problems through the regression backend
    long control_budget = 4096;  // cap on enumerated slab-constant control sequences
};

// frozen evaluation state: the slab holding t, the committed summaries through
// its entry, the entry value, and the live state at t
struct McQuery {
    double t = 0;
    int slab = 0;
    bool at_entry = true;
    Vd x = Vd::scalar(0.0);
    Vd entry = Vd::scalar(0.0);
    double c_coef = 0;
    double c_term = 0;
};

inline McQuery mc_query(const Problem& p, const TimeGrid& grid, double t, const Path& x) {
    if (std::abs(grid.horizon() - p.horizon) > grid.tol())
        throw std::invalid_argument("mc: grid horizon does not match the problem");
    if (x.dim() != p.dim) throw std::invalid_argument("mc: path dim does not match the problem");
    if (t < -grid.tol() || t > grid.horizon() + grid.tol())
        throw std::invalid_argument("mc: query time outside the horizon");
    t = std::min(std::max(t, 0.0), grid.horizon());

    McQuery q;
    q.slab = grid.slab_index(t);
    q.at_entry = std::abs(t - grid.t(q.slab)) <= grid.tol();
    q.t = q.at_entry ? grid.t(q.slab) : t;
    q.x = x.at(t);
    q.entry = x.at(grid.t(q.slab));

    std::vector<Vd> vals;
    for (int j = 0; j <= q.slab; ++j) vals.push_back(x.at(grid.t(j)));
    const FrozenKey key(grid, static_cast<std::size_t>(q.slab), std::move(vals));
    q.c_coef = key.summary_before(p.lambda, p.summary_dir, p.mode);
    q.c_term = key.summary_before(p.terminal.lam, p.terminal.dir, p.mode);
    return q;
}

// state bump along axis 0 at the query time; the committed summaries stay put,
// and the entry moves only when the query sits on its slab entry
inline McQuery bumped(McQuery q, double delta) {
    q.x[0] += delta;
    if (q.at_entry) q.entry[0] += delta;
    return q;
}

// copy of x whose time-t value is nudged along axis 0, the history before t
// kept as is; the value is held constant afterwards
inline Path bump_path(const Path& x, double t, double delta) {
    Vd v = x.at(t);
    v[0] += delta;
    return concat(x, t, Path::constant(x.mode(), x.horizon(), v));
}

// substep schedule from the query time to the horizon
struct McPlan {
    McQuery q;
    std::vector<double> times;   // times[0] = t < ... < times[nsub] = T
    std::vector<int> slab;       // slab of substep interval k
    std::vector<char> closes;    // interval k ends on a slab boundary
    std::vector<double> mass_c;  // coefficient charge from the slab entry to times[k]
    ChargeSplit cc, ct;          // coefficient / terminal charge splits
    bool coef_active = false, term_active = false;
    int ncoord = 1;

    int nsub() const { return static_cast<int>(times.size()) - 1; }
};

inline McPlan mc_plan(const Problem& p, const TimeGrid& grid, const McQuery& q, int steps_per_slab) {
    if (steps_per_slab < 1) throw std::invalid_argument("mc: need at least one substep per slab");
    if (q.t >= grid.horizon() - grid.tol())
        throw std::logic_error("mc: no substeps remain at the horizon");
    McPlan plan;
    plan.q = q;
    plan.cc = charge_split(p.lambda, grid, p.mode);
    plan.ct = charge_split(p.terminal.lam, grid, p.mode);
    // the committed coefficient summary is a state coordinate whenever the
    // models or a general driver can read it
    plan.coef_active = p.coeffs_use_summary || (p.has_general_driver() && !p.lambda.is_zero());
    plan.term_active = !p.terminal.lam.is_zero();
    const bool any_summary = plan.coef_active || plan.term_active;
    plan.ncoord = p.dim + (any_summary ? p.dim : 0) + (plan.term_active ? 1 : 0) + (plan.coef_active ? 1 : 0);

    plan.times.push_back(q.t);
    for (int i = q.slab; i < grid.slabs(); ++i) {
        const double a = plan.times.back(), b = grid.t(i + 1);
        for (int s = 1; s <= steps_per_slab; ++s) {
            plan.times.push_back(a + (b - a) * s / steps_per_slab);
            plan.slab.push_back(i);
            plan.closes.push_back(s == steps_per_slab ? 1 : 0);
        }
        plan.times[plan.times.size() - 1] = b;
    }
    for (int k = 0; k < plan.nsub(); ++k)
        plan.mass_c.push_back(p.lambda.mass_cc(grid.t(plan.slab[static_cast<std::size_t>(k)]),
                                               plan.times[static_cast<std::size_t>(k)]));
    return plan;
}

// one simulated block of frozen-chain paths
struct ForwardBatch {
    long paths = 0;
    int dim = 1, ncoord = 1, nsub = 0;
    std::vector<double> coords;  // [k * paths + p] * ncoord + c, for k < nsub
    std::vector<double> dw;      // [k * paths + p] * dim + d
    std::vector<double> isum;    // frozen coefficient summary at times[k], per path
    std::vector<double> xT;      // [p] * dim + d
    std::vector<double> uT;      // terminal summary per path
    std::vector<double> yT;      // g0(uT, xT) per path
    std::vector<double> wsum;    // total axis-0 increment per path
    std::vector<double> disc;    // e^{int fy} at T per path (affine weights)
    std::vector<double> src;     // int D f0 per path (affine weights)
};

// Euler walk of the frozen chain. `controls` picks one model per slab (empty:
// the first); `affine` folds the z-slot into the drift and accumulates the
// discount/source weights; `keep_states` stores the regression data.
inline ForwardBatch simulate_block(const Problem& p, const McPlan& plan,
                                   const std::vector<int>& controls, long npaths, std::uint64_t seed,
                                   std::uint64_t block, bool antithetic, bool keep_states, bool affine) {
    const int dim = p.dim;
    const int nsub = plan.nsub();
    if (antithetic && npaths % 2 != 0) ++npaths;

    ForwardBatch b;
    b.paths = npaths;
    b.dim = dim;
    b.ncoord = plan.ncoord;
    b.nsub = nsub;
    b.dw.resize(static_cast<std::size_t>(nsub) * npaths * dim);
    b.xT.resize(static_cast<std::size_t>(npaths) * dim);
    b.uT.resize(static_cast<std::size_t>(npaths));
    b.yT.resize(static_cast<std::size_t>(npaths));
    b.wsum.assign(static_cast<std::size_t>(npaths), 0.0);
    if (keep_states) {
        b.coords.resize(static_cast<std::size_t>(nsub) * npaths * plan.ncoord);
        b.isum.resize(static_cast<std::size_t>(nsub) * npaths);
    }
    if (affine) {
        b.disc.assign(static_cast<std::size_t>(npaths), 1.0);
        b.src.assign(static_cast<std::size_t>(npaths), 0.0);
    }

    // shared per-substep models when the coefficients ignore the summary
    std::vector<ControlModel> shared;
    if (!p.coeffs_use_summary) {
        shared.reserve(static_cast<std::size_t>(nsub));
        for (int k = 0; k < nsub; ++k) {
            const int ctrl = controls.empty() ? 0 : controls[static_cast<std::size_t>(plan.slab[static_cast<std::size_t>(k)] - plan.q.slab)];
            auto ms = p.models_at(plan.times[static_cast<std::size_t>(k)], 0.0);
            if (ctrl < 0 || ctrl >= static_cast<int>(ms.size())) throw std::invalid_argument("mc: control index out of range");
            shared.push_back(ms[static_cast<std::size_t>(ctrl)]);
        }
    }

    RngStream rng(seed, block);
    std::vector<double> cache(static_cast<std::size_t>(nsub) * dim);
    const bool any_summary = plan.coef_active || plan.term_active;

    for (long j = 0; j < npaths; ++j) {
        const bool mirror = antithetic && (j % 2 == 1);
        if (!mirror)
            for (double& c : cache) c = rng.normal();

        Vd x = plan.q.x;
        Vd xi = plan.q.entry;
        double ccoef = plan.q.c_coef, cterm = plan.q.c_term;
        double sxi = dot(p.summary_dir, xi);
        double D = 1.0, S = 0.0, wacc = 0.0;

        for (int k = 0; k < nsub; ++k) {
            const std::size_t ku = static_cast<std::size_t>(k);
            const double s = plan.times[ku];
            const double dt = plan.times[ku + 1] - s;
            const double I = ccoef + sxi * plan.mass_c[ku];

            if (keep_states) {
                double* row = &b.coords[(ku * npaths + j) * plan.ncoord];
                int c = 0;
                for (int d = 0; d < dim; ++d) row[c++] = x[d];
                if (any_summary)
                    for (int d = 0; d < dim; ++d) row[c++] = xi[d];
                if (plan.term_active) row[c++] = cterm;
                if (plan.coef_active) row[c++] = ccoef;
                b.isum[ku * npaths + j] = I;
            }

            ControlModel local;
            const ControlModel* m = nullptr;
            if (p.coeffs_use_summary) {
                const int ctrl = controls.empty() ? 0 : controls[static_cast<std::size_t>(plan.slab[ku] - plan.q.slab)];
                auto ms = p.models_at(s, I);
                if (ctrl < 0 || ctrl >= static_cast<int>(ms.size()))
                    throw std::invalid_argument("mc: control index out of range");
                local = ms[static_cast<std::size_t>(ctrl)];
                m = &local;
            } else {
                m = &shared[ku];
            }

            Vd dw(dim);
            const double root = std::sqrt(dt);
            for (int d = 0; d < dim; ++d) {
                const double n = cache[ku * dim + static_cast<std::size_t>(d)];
                dw[d] = (mirror ? -n : n) * root;
                b.dw[(ku * npaths + j) * dim + static_cast<std::size_t>(d)] = dw[d];
            }
            wacc += dw[0];

            if (affine) {
                S += D * m->f0 * dt;
                D *= std::exp(m->fy * dt);
            }
            const Vd drift = affine ? m->mu + m->sigma.mv(m->fz) : m->mu;
            x = x + dt * drift + m->sigma.mv(dw);

            if (plan.closes[ku]) {
                const std::size_t i = static_cast<std::size_t>(plan.slab[ku]);
                cterm += dot(p.terminal.dir, xi) * plan.ct.A[i] + dot(p.terminal.dir, x) * plan.ct.B[i];
                ccoef += sxi * plan.cc.A[i] + dot(p.summary_dir, x) * plan.cc.B[i];
                xi = x;
                sxi = dot(p.summary_dir, xi);
            }
        }

        for (int d = 0; d < dim; ++d) b.xT[static_cast<std::size_t>(j) * dim + static_cast<std::size_t>(d)] = x[d];
        const double u = cterm + plan.ct.wT * dot(p.terminal.dir, x);
        b.uT[static_cast<std::size_t>(j)] = u;
        b.yT[static_cast<std::size_t>(j)] = p.terminal.g0(u, x);
        b.wsum[static_cast<std::size_t>(j)] = wacc;
        if (affine) {
            b.disc[static_cast<std::size_t>(j)] = D;
            b.src[static_cast<std::size_t>(j)] = S;
        }
    }
    return b;
}

}  // namespace ppde
