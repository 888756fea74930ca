#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ppde/mc/regression.hpp"
#include "ppde/mc/simulate.hpp"

namespace ppde {

struct McValue {
    double value = 0;
    double se = 0;
    long paths = 0;
};

namespace mcdetail {

inline McValue pool_blocks(const std::vector<double>& means, long paths_per_block) {
    McValue out;
    const double nb = static_cast<double>(means.size());
    double s = 0;
    for (double m : means) s += m;
    out.value = s / nb;
    if (means.size() > 1) {
        double ss = 0;
        for (double m : means) ss += (m - out.value) * (m - out.value);
        out.se = std::sqrt(ss / (nb - 1.0) / nb);
    }
    out.paths = static_cast<long>(means.size()) * paths_per_block;
    return out;
}

inline double affine_block_mean(const ForwardBatch& b) {
    double s = 0;
    for (long j = 0; j < b.paths; ++j)
        s += b.disc[static_cast<std::size_t>(j)] * b.yT[static_cast<std::size_t>(j)] + b.src[static_cast<std::size_t>(j)];
    return s / static_cast<double>(b.paths);
}

struct LsmcBlock {
    double y0 = 0;          // regressed value at the query state
    double z0 = 0;          // axis-0 martingale integrand at the query time
    double resid_mean = 0;  // mean martingale residual over paths
    double qc = 0;          // mean(residual * total increment)
    double yvar = 0;        // variance of the terminal values
};

// one backward regression sweep over a stored batch
inline LsmcBlock lsmc_block(const McPlan& plan, const ForwardBatch& b,
                            const std::function<double(double, double, double, const Vd&)>& driver) {
    const long n = b.paths;
    const int dim = b.dim;
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(b.yT.data(), n);
    std::vector<double> fsum(static_cast<std::size_t>(n), 0.0), zdw(static_cast<std::size_t>(n), 0.0);

    LsmcBlock out;
    for (int k = b.nsub - 1; k >= 0; --k) {
        const std::size_t ku = static_cast<std::size_t>(k);
        const double dt = plan.times[ku + 1] - plan.times[ku];
        const double s = plan.times[ku];
        const Regression reg(&b.coords[ku * static_cast<std::size_t>(n) * b.ncoord], n, b.ncoord);
        const Eigen::VectorXd ey = reg.predict(y);

        std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(dim));
        for (int d = 0; d < dim; ++d) {
            Eigen::VectorXd ydw(n);
            for (long j = 0; j < n; ++j)
                ydw(j) = y(j) * b.dw[(ku * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)) * dim + static_cast<std::size_t>(d)];
            z[static_cast<std::size_t>(d)] = reg.predict(ydw) / dt;
        }

        Eigen::VectorXd ynew(n);
        for (long j = 0; j < n; ++j) {
            const std::size_t ju = static_cast<std::size_t>(j);
            Vd zj(dim);
            for (int d = 0; d < dim; ++d) zj[d] = z[static_cast<std::size_t>(d)](j);
            const double f = driver(s, b.isum[ku * static_cast<std::size_t>(n) + ju], ey(j), zj);
            ynew(j) = ey(j) + dt * f;
            fsum[ju] += dt * f;
            double zw = 0;
            for (int d = 0; d < dim; ++d)
                zw += zj[d] * b.dw[(ku * static_cast<std::size_t>(n) + ju) * dim + static_cast<std::size_t>(d)];
            zdw[ju] += zw;
        }
        if (k == 0) out.z0 = z[0](0);
        y = ynew;
    }

    out.y0 = y.mean();
    double ymean = 0;
    for (long j = 0; j < n; ++j) ymean += b.yT[static_cast<std::size_t>(j)];
    ymean /= static_cast<double>(n);
    double rs = 0, rq = 0, yv = 0;
    for (long j = 0; j < n; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        const double r = b.yT[ju] + fsum[ju] - zdw[ju] - out.y0;
        rs += r;
        rq += r * b.wsum[ju];
        yv += (b.yT[ju] - ymean) * (b.yT[ju] - ymean);
    }
    out.resid_mean = rs / static_cast<double>(n);
    out.qc = rq / static_cast<double>(n);
    out.yvar = n > 1 ? yv / static_cast<double>(n - 1) : 0.0;
    return out;
}

inline std::function<double(double, double, double, const Vd&)> driver_of(const Problem& p) {
    if (p.has_general_driver()) return p.driver;
    return [&p](double t, double isum, double y, const Vd& z) {
        const auto ms = p.models_at(t, isum);
        if (ms.size() != 1) throw std::invalid_argument("mc: regression backend needs a single model");
        return ms[0].f0 + ms[0].fy * y + dot(ms[0].fz, z);
    };
}

inline McValue lsmc_value(const Problem& p, const McPlan& plan, const McOptions& opt) {
    const auto driver = driver_of(p);
    std::vector<double> means;
    long ppb = 0;
    for (int bl = 0; bl < opt.blocks; ++bl) {
        const ForwardBatch b = simulate_block(p, plan, {}, opt.paths, opt.seed,
                                              static_cast<std::uint64_t>(bl), opt.antithetic, true, false);
        ppb = b.paths;
        means.push_back(lsmc_block(plan, b, driver).y0);
    }
    return pool_blocks(means, ppb);
}

inline McValue plain_value(const Problem& p, const McPlan& plan, const McOptions& opt) {
    std::vector<double> means;
    long ppb = 0;
    for (int bl = 0; bl < opt.blocks; ++bl) {
        const ForwardBatch b = simulate_block(p, plan, {}, opt.paths, opt.seed,
                                              static_cast<std::uint64_t>(bl), opt.antithetic, false, true);
        ppb = b.paths;
        means.push_back(affine_block_mean(b));
    }
    return pool_blocks(means, ppb);
}

// exhaustive search over slab-constant control sequences under common random
// numbers; exact when an extreme model is optimal per slab, otherwise a lower
// bound for the sup
inline McValue hjb_value_mc(const Problem& p, const TimeGrid& grid, const McPlan& plan, int nmodels,
                            const McOptions& opt) {
    const int nslabs = grid.slabs() - plan.q.slab;
    long nseq = 1;
    for (int i = 0; i < nslabs; ++i) {
        nseq *= nmodels;
        if (nseq > opt.control_budget)
            throw std::invalid_argument("mc: control enumeration exceeds the budget");
    }

    McValue best;
    bool have = false;
    std::vector<int> seq(static_cast<std::size_t>(nslabs), 0);
    for (long s = 0; s < nseq; ++s) {
        long rem = s;
        for (int i = 0; i < nslabs; ++i) {
            seq[static_cast<std::size_t>(i)] = static_cast<int>(rem % nmodels);
            rem /= nmodels;
        }
        std::vector<double> means;
        long ppb = 0;
        for (int bl = 0; bl < opt.blocks; ++bl) {
            const ForwardBatch b = simulate_block(p, plan, seq, opt.paths, opt.seed,
                                                  static_cast<std::uint64_t>(bl), opt.antithetic, false, true);
            ppb = b.paths;
            means.push_back(affine_block_mean(b));
        }
        const McValue v = pool_blocks(means, ppb);
        if (!have || v.value > best.value) {
            best = v;
            have = true;
        }
    }
    best.paths = static_cast<long>(nseq) * best.paths;
    return best;
}

}  // namespace mcdetail

// value of the scheme at an explicit frozen state; routes to the plain affine
// estimator, the control enumeration, or the regression backend
inline McValue mc_value_state(const Problem& p, const TimeGrid& grid, const McQuery& q, const McOptions& opt = {}) {
    const McPlan plan = mc_plan(p, grid, q, opt.steps_per_slab);
    if (p.has_general_driver()) {
        if (p.models_at(q.t, q.c_coef).size() != 1)
            throw std::invalid_argument("mc: a general driver needs a single model");
        return mcdetail::lsmc_value(p, plan, opt);
    }
    const double i0 = q.c_coef + dot(p.summary_dir, q.entry) * plan.mass_c[0];
    const std::size_t nmodels = p.models_at(q.t, i0).size();
    if (nmodels > 1) {
        if (opt.force_lsmc) throw std::invalid_argument("mc: regression backend needs a single model");
        return mcdetail::hjb_value_mc(p, grid, plan, static_cast<int>(nmodels), opt);
    }
    if (opt.force_lsmc) return mcdetail::lsmc_value(p, plan, opt);
    return mcdetail::plain_value(p, plan, opt);
}

inline McValue mc_value(const Problem& p, const TimeGrid& grid, double t, const Path& x, const McOptions& opt = {}) {
    const McQuery q = mc_query(p, grid, t, x);
    if (q.t >= grid.horizon() - grid.tol()) {
        std::vector<Vd> vals;
        for (int j = 0; j <= grid.slabs(); ++j) vals.push_back(x.at(grid.t(j)));
        McValue out;
        out.value = p.terminal.on_key(grid, vals, p.mode);
        return out;
    }
    return mc_value_state(p, grid, q, opt);
}

inline McValue mc_value_key(const Problem& p, const TimeGrid& grid, const FrozenKey& key, const McOptions& opt = {}) {
    McQuery q;
    q.t = key.entry_time();
    q.slab = static_cast<int>(key.slab);
    q.at_entry = true;
    q.x = key.entry();
    q.entry = key.entry();
    q.c_coef = key.summary_before(p.lambda, p.summary_dir, p.mode);
    q.c_term = key.summary_before(p.terminal.lam, p.terminal.dir, p.mode);
    if (q.t >= grid.horizon() - grid.tol()) {
        McValue out;
        out.value = p.terminal.on_key(key.grid, key.values, p.mode);
        return out;
    }
    return mc_value_state(p, grid, q, opt);
}

// two estimates of the axis-0 martingale integrand at the query time plus
// martingale-residual checks, all from the regression backend
struct ZDiagnostics {
    double z_increment = 0, se_increment = 0;  // from increment regression
    double z_bump = 0, se_bump = 0;            // sigma times a common-noise state bump
    double resid_mean = 0, resid_se = 0;       // martingale residual across paths
    double qc = 0;                             // orthogonality check, normalized by sqrt(T - t)
    double scale = 0;                          // sd of terminal values
};

inline ZDiagnostics z_diagnostics(const Problem& p, const TimeGrid& grid, double t, const Path& x,
                                  double delta, const McOptions& opt = {}) {
    if (p.dim != 1) throw std::invalid_argument("mc: z diagnostics cover one-dimensional problems");
    if (delta <= 0) throw std::invalid_argument("mc: z diagnostics need a positive bump");
    const McQuery q = mc_query(p, grid, t, x);
    if (q.t >= grid.horizon() - grid.tol())
        throw std::invalid_argument("mc: z diagnostics need time to run");

    const McPlan plan = mc_plan(p, grid, q, opt.steps_per_slab);
    const double i0 = q.c_coef + dot(p.summary_dir, q.entry) * plan.mass_c[0];
    if (!p.has_general_driver() && p.models_at(q.t, i0).size() != 1)
        throw std::invalid_argument("mc: z diagnostics need a single model");
    const auto driver = mcdetail::driver_of(p);
    const double sig = p.models_at(q.t, i0)[0].sigma.at(0, 0);

    const McPlan plan_up = mc_plan(p, grid, bumped(q, delta), opt.steps_per_slab);
    const McPlan plan_dn = mc_plan(p, grid, bumped(q, -delta), opt.steps_per_slab);

    std::vector<double> zi, zb, rm, qcs;
    double yvar = 0;
    for (int bl = 0; bl < opt.blocks; ++bl) {
        const auto blk = static_cast<std::uint64_t>(bl);
        const ForwardBatch b = simulate_block(p, plan, {}, opt.paths, opt.seed, blk, opt.antithetic, true, false);
        const mcdetail::LsmcBlock lb = mcdetail::lsmc_block(plan, b, driver);
        zi.push_back(lb.z0);
        rm.push_back(lb.resid_mean);
        qcs.push_back(lb.qc);
        yvar += lb.yvar;

        const ForwardBatch bu = simulate_block(p, plan_up, {}, opt.paths, opt.seed, blk, opt.antithetic, true, false);
        const ForwardBatch bd = simulate_block(p, plan_dn, {}, opt.paths, opt.seed, blk, opt.antithetic, true, false);
        const double vu = mcdetail::lsmc_block(plan_up, bu, driver).y0;
        const double vd = mcdetail::lsmc_block(plan_dn, bd, driver).y0;
        zb.push_back(sig * (vu - vd) / (2.0 * delta));
    }

    ZDiagnostics out;
    const McValue mi = mcdetail::pool_blocks(zi, 1);
    const McValue mb = mcdetail::pool_blocks(zb, 1);
    const McValue mr = mcdetail::pool_blocks(rm, 1);
    const McValue mq = mcdetail::pool_blocks(qcs, 1);
    out.z_increment = mi.value;
    out.se_increment = mi.se;
    out.z_bump = mb.value;
    out.se_bump = mb.se;
    out.resid_mean = mr.value;
    out.resid_se = mr.se;
    out.qc = mq.value / std::sqrt(grid.horizon() - q.t);
    out.scale = std::sqrt(yvar / static_cast<double>(opt.blocks));
    return out;
}

}  // namespace ppde
