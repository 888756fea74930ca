#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ppde/mc/bsde.hpp"
#include "ppde/mc/simulate.hpp"

namespace ppde {

namespace mcdetail {

// d/dI of the z-folded drift, the volatility, and the source, by central
// differences on the model map
struct CoefSens {
    double db = 0, dsig = 0, df0 = 0;
};

inline CoefSens coef_sens(const Problem& p, double s, double I) {
    const double h = 1e-4 * (1.0 + std::abs(I));
    const auto up = p.models_at(s, I + h);
    const auto dn = p.models_at(s, I - h);
    const auto fold = [](const ControlModel& m) { return m.mu[0] + m.sigma.at(0, 0) * m.fz[0]; };
    CoefSens c;
    c.db = (fold(up[0]) - fold(dn[0])) / (2.0 * h);
    c.dsig = (up[0].sigma.at(0, 0) - dn[0].sigma.at(0, 0)) / (2.0 * h);
    c.df0 = (up[0].f0 - dn[0].f0) / (2.0 * h);
    return c;
}

inline void require_tangent_scope(const Problem& p, const McQuery& q, double i0) {
    if (p.dim != 1) throw std::invalid_argument("tangent: one-dimensional problems only");
    if (p.has_general_driver()) throw std::invalid_argument("tangent: affine problems only");
    if (p.models_at(q.t, i0).size() != 1) throw std::invalid_argument("tangent: single-model problems only");
    if (p.coeffs_use_summary) {
        const auto a = p.models_at(q.t, 0.3);
        const auto b = p.models_at(q.t, 1.1);
        double gap = std::abs(a[0].fy - b[0].fy);
        for (int d = 0; d < p.dim; ++d) gap += std::abs(a[0].fz[d] - b[0].fz[d]);
        if (gap > 1e-12) throw std::invalid_argument("tangent: y and z loadings must ignore the summary");
    }
}

struct TangentBlock {
    double val = 0;  // mean tangent of the value
    double dx = 0;   // mean state tangent at the evaluation time
};

// first-variation walk alongside the primal chain for a unit bump at the
// query time. s_eval picks the substep time where the state tangent is read;
// want_value adds the discount-weighted terminal and source terms.
inline TangentBlock tangent_block(const Problem& p, const McPlan& plan, long npaths, std::uint64_t seed,
                                  std::uint64_t block, bool antithetic, double s_eval, bool want_value) {
    const int nsub = plan.nsub();
    if (antithetic && npaths % 2 != 0) ++npaths;
    const double sd0 = p.summary_dir[0];
    const double td0 = p.terminal.dir[0];
    const double tol = 1e-12 * (1.0 + std::abs(plan.times.back()));

    std::vector<ControlModel> shared;
    if (!p.coeffs_use_summary) {
        shared.reserve(static_cast<std::size_t>(nsub));
        for (int k = 0; k < nsub; ++k) shared.push_back(p.models_at(plan.times[static_cast<std::size_t>(k)], 0.0)[0]);
    }

    RngStream rng(seed, block);
    std::vector<double> cache(static_cast<std::size_t>(nsub));
    double vsum = 0, dxsum = 0;

    for (long j = 0; j < npaths; ++j) {
        const bool mirror = antithetic && (j % 2 == 1);
        if (!mirror)
            for (double& c : cache) c = rng.normal();

        double X = plan.q.x[0], xi = plan.q.entry[0];
        double ccoef = plan.q.c_coef, cterm = plan.q.c_term;
        double dX = 1.0, dxi = plan.q.at_entry ? 1.0 : 0.0, dcc = 0.0, dct = 0.0;
        double D = 1.0, acc = 0.0;
        double dxrec = (s_eval <= plan.q.t + tol) ? dX : 0.0;

        for (int k = 0; k < nsub; ++k) {
            const std::size_t ku = static_cast<std::size_t>(k);
            const double s = plan.times[ku];
            const double dt = plan.times[ku + 1] - s;
            const double I = ccoef + sd0 * xi * plan.mass_c[ku];
            const double dI = dcc + sd0 * dxi * plan.mass_c[ku];

            ControlModel local;
            const ControlModel* m = nullptr;
            CoefSens sens;
            if (p.coeffs_use_summary) {
                local = p.models_at(s, I)[0];
                m = &local;
                sens = coef_sens(p, s, I);
            } else {
                m = &shared[ku];
            }

            const double n = cache[ku];
            const double dw = (mirror ? -n : n) * std::sqrt(dt);
            const double sig = m->sigma.at(0, 0);
            const double b = m->mu[0] + sig * m->fz[0];

            if (want_value) {
                acc += D * sens.df0 * dI * dt;
                D *= std::exp(m->fy * dt);
            }
            X += b * dt + sig * dw;
            dX += sens.db * dI * dt + sens.dsig * dI * dw;

            if (std::abs(plan.times[ku + 1] - s_eval) <= tol) dxrec = dX;

            if (plan.closes[ku]) {
                const std::size_t i = static_cast<std::size_t>(plan.slab[ku]);
                cterm += td0 * xi * plan.ct.A[i] + td0 * X * plan.ct.B[i];
                dct += td0 * dxi * plan.ct.A[i] + td0 * dX * plan.ct.B[i];
                ccoef += sd0 * xi * plan.cc.A[i] + sd0 * X * plan.cc.B[i];
                dcc += sd0 * dxi * plan.cc.A[i] + sd0 * dX * plan.cc.B[i];
                xi = X;
                dxi = dX;
            }
        }

        dxsum += dxrec;
        if (want_value) {
            const Vd xv = Vd::scalar(X);
            const double u = cterm + plan.ct.wT * td0 * X;
            const double du = dct + plan.ct.wT * td0 * dX;
            vsum += D * (p.terminal.dg0_du(u, xv) * du + p.terminal.dg0_dxT(u, xv)[0] * dX) + acc;
        }
    }

    TangentBlock out;
    out.val = vsum / static_cast<double>(npaths);
    out.dx = dxsum / static_cast<double>(npaths);
    return out;
}

}  // namespace mcdetail

// expected state tangent E[dX_s] for a unit bump at the query time; s must sit
// on the substep grid
inline McValue tangent_forward(const Problem& p, const TimeGrid& grid, double t, const Path& x,
                               double s_eval, const McOptions& opt = {}) {
    const McQuery q = mc_query(p, grid, t, x);
    if (q.t >= grid.horizon() - grid.tol()) throw std::invalid_argument("tangent: no time remains at the horizon");
    const McPlan plan = mc_plan(p, grid, q, opt.steps_per_slab);
    const double i0 = q.c_coef + p.summary_dir[0] * q.entry[0] * plan.mass_c[0];
    mcdetail::require_tangent_scope(p, q, i0);

    const double tol = grid.tol();
    bool aligned = s_eval <= q.t + tol;
    for (double ts : plan.times)
        if (std::abs(ts - s_eval) <= tol) aligned = true;
    if (!aligned) throw std::invalid_argument("tangent: evaluation time must sit on the substep grid");

    std::vector<double> means;
    long ppb = opt.paths + (opt.antithetic && opt.paths % 2 != 0 ? 1 : 0);
    for (int bl = 0; bl < opt.blocks; ++bl)
        means.push_back(mcdetail::tangent_block(p, plan, opt.paths, opt.seed, static_cast<std::uint64_t>(bl),
                                                opt.antithetic, s_eval, false)
                            .dx);
    return mcdetail::pool_blocks(means, ppb);
}

// tangent of the value for a unit bump at the query time: the
// discount-weighted terminal sensitivity plus the source sensitivity along
// the chain. Affine problems whose y and z loadings ignore the summary, with
// terminal smoothness data present.
inline McValue tangent_value(const Problem& p, const TimeGrid& grid, double t, const Path& x,
                             const McOptions& opt = {}) {
    const McQuery q = mc_query(p, grid, t, x);
    if (q.t >= grid.horizon() - grid.tol()) throw std::invalid_argument("tangent: no time remains at the horizon");
    const McPlan plan = mc_plan(p, grid, q, opt.steps_per_slab);
    const double i0 = q.c_coef + p.summary_dir[0] * q.entry[0] * plan.mass_c[0];
    mcdetail::require_tangent_scope(p, q, i0);
    if (!p.terminal.dg0_du || !p.terminal.dg0_dxT)
        throw std::invalid_argument("tangent: terminal smoothness data missing");

    std::vector<double> means;
    long ppb = opt.paths + (opt.antithetic && opt.paths % 2 != 0 ? 1 : 0);
    for (int bl = 0; bl < opt.blocks; ++bl)
        means.push_back(mcdetail::tangent_block(p, plan, opt.paths, opt.seed, static_cast<std::uint64_t>(bl),
                                                opt.antithetic, plan.q.t, true)
                            .val);
    return mcdetail::pool_blocks(means, ppb);
}

}  // namespace ppde
