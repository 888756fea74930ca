#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/math.hpp"
#include "ppde/measure.hpp"
#include "ppde/path.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

// integral of <dir, x_s> against lam over [a, b]; exact for step paths and
// for piecewise-linear paths (the sampled density is piecewise linear too)
inline double path_integral(const AtomicMeasure& lam, const Path& x, const Vd& dir, double a, double b,
                            bool include_a = true, bool include_b = true) {
    if (b < a) return 0.0;
    const double tol = x.tol();
    const auto f = [&](double s) { return dot(dir, x.at(s)); };
    if (x.mode() == PathMode::PL) {
        std::vector<double> hints;
        for (std::size_t k = 0; k < x.breakpoints(); ++k) hints.push_back(x.time(k));
        return lam.integrate(f, a, b, hints, include_a, include_b);
    }
    double m = 0;
    std::vector<double> cuts{a, b};
    for (std::size_t k = 0; k < x.breakpoints(); ++k)
        if (x.time(k) > a + tol && x.time(k) < b - tol) cuts.push_back(x.time(k));
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (cuts[i] - cuts[i - 1] > tol) m += lam.density_mass(cuts[i - 1], cuts[i]) * f(0.5 * (cuts[i - 1] + cuts[i]));
    for (const auto& [tau, wt] : lam.atoms()) {
        const bool at_a = std::abs(tau - a) <= tol;
        const bool at_b = std::abs(tau - b) <= tol;
        const bool inside = tau > a && tau < b;
        if ((at_a && include_a) || (at_b && include_b) || (!at_a && !at_b && inside)) m += wt * f(tau);
    }
    return m;
}

// one admissible coefficient model: dynamics dX = mu dt + sigma dW and the
// affine driver f = f0 + fy y + fz . z with z = sigma grad v. The operator
// reads sup over the model list; a single entry is the linear case.
struct ControlModel {
    Vd mu;
    Sym sigma;
    double f0 = 0;
    double fy = 0;
    Vd fz;

    static ControlModel make(int dim) {
        ControlModel m;
        m.mu = Vd(dim);
        m.sigma = Sym(dim);
        m.fz = Vd(dim);
        return m;
    }
};

// coefficients of the scalar operator L phi = 1/2 <a, D2 phi> + b . grad phi
// + c phi + d obtained by folding the driver's z-slot through sigma
struct OpCoef {
    Sym a;
    Vd b;
    double c = 0;
    double d = 0;
};

inline OpCoef op_of(const ControlModel& m) {
    OpCoef o;
    o.a = m.sigma.square();
    o.b = m.mu + m.sigma.mv(m.fz);
    o.c = m.fy;
    o.d = m.f0;
    return o;
}

// how a measure charges projected node values across grid slabs: node j earns
// A_j against the slab-j entry and B_j against the closing node, and the
// terminal atom wT charges x_T. Holding paths put the whole slab on the entry;
// interpolating paths split it between the rising and falling hat halves.
struct ChargeSplit {
    std::vector<double> A, B;
    double wT = 0;
};

inline ChargeSplit charge_split(const AtomicMeasure& lam, const TimeGrid& g, PathMode mode) {
    ChargeSplit cs;
    const int n = g.slabs();
    cs.A.assign(static_cast<std::size_t>(n), 0.0);
    cs.B.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const std::size_t j = static_cast<std::size_t>(i);
        const double t0 = g.t(i), t1 = g.t(i + 1);
        if (mode == PathMode::PC) {
            cs.A[j] = lam.mass_co(t0, t1);
        } else {
            const auto r = [t0, t1](double s) { return (s - t0) / (t1 - t0); };
            cs.A[j] = lam.integrate([&](double s) { return 1.0 - r(s); }, t0, t1, {}, true, false);
            cs.B[j] = lam.integrate(r, t0, t1, {}, true, false);
        }
        if (cs.A[j] < -1e-12 || cs.B[j] < -1e-12) throw std::logic_error("charge split: negative mass");
        cs.A[j] = std::max(cs.A[j], 0.0);
        cs.B[j] = std::max(cs.B[j], 0.0);
    }
    cs.wT = lam.atom_at(g.horizon());
    return cs;
}

// continuity modulus w(u) = scale u^beta used by the convergence diagnostics
struct Modulus {
    double beta = 1.0;
    double scale = 1.0;
    double operator()(double u) const { return u <= 0 ? 0.0 : scale * std::pow(u, beta); }
};

// terminal functional g(x) = g0(int <dir, x> dlam, x_T); a zero measure gives
// plain functions of the endpoint value
struct TerminalSpec {
    AtomicMeasure lam = AtomicMeasure::zero(1.0);
    Vd dir = Vd::scalar(1.0);
    std::function<double(double u, const Vd& xT)> g0;
    std::function<double(double u, const Vd& xT)> dg0_du;  // optional smoothness data
    std::function<Vd(double u, const Vd& xT)> dg0_dxT;
    double lip = 1.0;

    double summary_of_key(const TimeGrid& g, const std::vector<Vd>& values, PathMode mode) const {
        if (values.size() != g.points().size())
            throw std::invalid_argument("terminal: key must carry one value per grid node");
        const auto w = lam.node_weights(g, mode == PathMode::PC);
        double u = 0;
        for (std::size_t j = 0; j < w.size(); ++j) u += w[j] * dot(dir, values[j]);
        return u;
    }
    double on_key(const TimeGrid& g, const std::vector<Vd>& values, PathMode mode) const {
        return g0(summary_of_key(g, values, mode), values.back());
    }
    double on_path(const Path& x) const {
        return g0(path_integral(lam, x, dir, 0.0, x.horizon()), x.at(x.horizon()));
    }
};

// a path-frozen slab operator: model coefficients depend on time only, the
// history having been committed through the slab entry
struct SlabProblem {
    double t0 = 0, t1 = 0;
    int dim = 1;
    std::function<std::vector<ControlModel>(double s)> models;
    std::function<double(double s, double y, const Vd& z)> driver;  // set only for general drivers

    bool has_driver() const { return static_cast<bool>(driver); }
};

// node values along a grid prefix: values[j] = x(t_j) for j = 0..slab. The
// key for slab i fixes the history; slab == grid.slabs() is a full terminal key.
struct FrozenKey {
    TimeGrid grid;
    std::size_t slab = 0;
    std::vector<Vd> values;

    FrozenKey(TimeGrid g, std::size_t i, std::vector<Vd> vals)
        : grid(std::move(g)), slab(i), values(std::move(vals)) {
        if (slab > static_cast<std::size_t>(grid.slabs())) throw std::invalid_argument("key: slab index beyond the grid");
        if (values.size() != slab + 1) throw std::invalid_argument("key: need one value per node through the slab entry");
        for (std::size_t j = 1; j < values.size(); ++j)
            if (values[j].n != values[0].n) throw std::invalid_argument("key: mixed value dims");
    }

    int dim() const { return values[0].n; }
    double entry_time() const { return grid.t(slab); }
    const Vd& entry() const { return values.back(); }

    FrozenKey extended(const Vd& next) const {
        std::vector<Vd> v = values;
        v.push_back(next);
        return FrozenKey(grid, slab + 1, std::move(v));
    }

    // the projected path this key pins down, stopped at the entry time
    Path to_path(PathMode mode, double horizon) const {
        std::vector<double> ts;
        std::vector<double> vs;
        for (std::size_t j = 0; j <= slab; ++j) {
            ts.push_back(grid.t(j));
            Path::append(vs, values[j]);
        }
        return Path(mode, horizon, dim(), std::move(ts), std::move(vs));
    }

    // lam-integral of <dir, .> along the frozen history over [0, entry_time)
    double summary_before(const AtomicMeasure& lam, const Vd& dir, PathMode mode) const {
        if (slab == 0) return 0.0;
        return path_integral(lam, to_path(mode, grid.horizon()), dir, 0.0, entry_time(), true, false);
    }
};

// a path-dependent semilinear problem. Coefficients see the path through the
// running summary I_t = int_[0,t] <summary_dir, x> dlambda; terminal g sees
// the projected node values. A general driver, when set, replaces the affine
// (f0, fy, fz) pieces for backends that can integrate it.
struct Problem {
    std::string name = "problem";
    int dim = 1;
    double horizon = 1.0;
    PathMode mode = PathMode::PC;
    Vd x0 = Vd::scalar(0.0);
    AtomicMeasure lambda = AtomicMeasure::zero(1.0);
    Vd summary_dir = Vd::scalar(1.0);
    bool coeffs_use_summary = false;
    std::function<std::vector<ControlModel>(double t, double summary)> models;
    std::function<double(double t, double summary, double y, const Vd& z)> driver;
    TerminalSpec terminal;
    Modulus modulus;
    double lip_coef = 1.0;

    std::vector<ControlModel> models_at(double t, double summary) const {
        auto ms = models(t, summary);
        if (ms.empty()) throw std::logic_error("problem: empty control model list");
        return ms;
    }
    bool is_linear() const { return !driver && models_at(0.0, 0.0).size() == 1; }
    bool has_general_driver() const { return static_cast<bool>(driver); }

    // running summary along an explicit path over [0, t)
    double summary_along(const Path& x, double t) const {
        return path_integral(lambda, x, summary_dir, 0.0, t, true, false);
    }
};

// freeze the problem's coefficients along a history key: inside slab i the
// summary is the committed part plus the entry value charged on [t_i, s]
inline SlabProblem freeze(const Problem& p, const FrozenKey& key) {
    if (key.slab >= static_cast<std::size_t>(key.grid.slabs())) throw std::invalid_argument("freeze: terminal key has no slab to solve");
    if (key.dim() != p.dim) throw std::invalid_argument("freeze: key dim does not match the problem");
    SlabProblem s;
    s.t0 = key.grid.t(key.slab);
    s.t1 = key.grid.t(key.slab + 1);
    s.dim = p.dim;
    if (!p.coeffs_use_summary) {
        const auto& pm = p.models;
        s.models = [pm](double u) { return pm(u, 0.0); };
        if (p.driver) {
            const auto& dr = p.driver;
            s.driver = [dr](double u, double y, const Vd& z) { return dr(u, 0.0, y, z); };
        }
        return s;
    }
    const double c = key.summary_before(p.lambda, p.summary_dir, p.mode);
    const double xi = dot(p.summary_dir, key.entry());
    const double t0 = s.t0;
    const AtomicMeasure lam = p.lambda;
    const auto frozen_summary = [c, xi, t0, lam](double u) { return c + xi * lam.mass_cc(t0, u); };
    const auto& pm = p.models;
    s.models = [pm, frozen_summary](double u) { return pm(u, frozen_summary(u)); };
    if (p.driver) {
        const auto& dr = p.driver;
        s.driver = [dr, frozen_summary](double u, double y, const Vd& z) { return dr(u, frozen_summary(u), y, z); };
    }
    return s;
}

// sampled witnesses for the standing assumptions: summary-Lipschitz
// coefficients, nonnegative diffusion (monotone second-order term), a
// Lipschitz driver in (y, z), and a Lipschitz terminal map
struct AssumptionReport {
    bool ok = true;
    double coef_lip = 0;
    double driver_lip_y = 0;
    double driver_lip_z = 0;
    double terminal_lip = 0;
    double min_diffusion = std::numeric_limits<double>::infinity();
    int control_count = 0;
    std::vector<std::string> failures;
};

namespace detail {

inline double min_principal_minor(const Sym& a) {
    double m = a.at(0, 0);
    if (a.n >= 2) m = std::min(m, a.at(0, 0) * a.at(1, 1) - a.at(0, 1) * a.at(1, 0));
    if (a.n >= 3) {
        const double det = a.at(0, 0) * (a.at(1, 1) * a.at(2, 2) - a.at(1, 2) * a.at(2, 1)) -
                           a.at(0, 1) * (a.at(1, 0) * a.at(2, 2) - a.at(1, 2) * a.at(2, 0)) +
                           a.at(0, 2) * (a.at(1, 0) * a.at(2, 1) - a.at(1, 1) * a.at(2, 0));
        m = std::min(m, det);
    }
    return m;
}

inline double model_gap(const ControlModel& a, const ControlModel& b) {
    double g = (a.mu - b.mu).norm();
    const Sym ds = a.sigma - b.sigma;
    g = std::max(g, std::sqrt(frob(ds, ds)));
    g = std::max(g, std::abs(a.f0 - b.f0));
    g = std::max(g, std::abs(a.fy - b.fy));
    g = std::max(g, (a.fz - b.fz).norm());
    return g;
}

}  // namespace detail

inline AssumptionReport validate_assumptions(const Problem& p, std::uint64_t seed = 17, int samples = 200) {
    AssumptionReport r;
    RngStream rng(seed, 0);
    const auto fail = [&r](const std::string& what) {
        r.ok = false;
        r.failures.push_back(what);
    };

    r.control_count = static_cast<int>(p.models_at(0.0, 0.0).size());
    const double slack = 1.05;

    for (int k = 0; k < samples; ++k) {
        const double t = p.horizon * rng.uniform();
        const double I = 4.0 * (rng.uniform() - 0.5);
        const double Ip = I + 2.0 * (rng.uniform() - 0.5);
        const auto ms = p.models_at(t, I);
        const auto msp = p.models_at(t, Ip);
        if (msp.size() != ms.size()) {
            fail("control model list changes size across summary values");
            break;
        }
        for (std::size_t m = 0; m < ms.size(); ++m) {
            r.min_diffusion = std::min(r.min_diffusion, detail::min_principal_minor(ms[m].sigma.square()));
            if (std::abs(Ip - I) > 1e-9)
                r.coef_lip = std::max(r.coef_lip, detail::model_gap(ms[m], msp[m]) / std::abs(Ip - I));
            r.driver_lip_y = std::max(r.driver_lip_y, std::abs(ms[m].fy));
            r.driver_lip_z = std::max(r.driver_lip_z, ms[m].fz.norm());
        }
        if (p.driver) {
            const double y = 2.0 * (rng.uniform() - 0.5);
            Vd z(p.dim);
            for (int i = 0; i < p.dim; ++i) z[i] = 2.0 * (rng.uniform() - 0.5);
            const double dy = 0.5 * rng.uniform() + 1e-3;
            Vd zp = z;
            zp[0] += dy;
            const double base = p.driver(t, I, y, z);
            r.driver_lip_y = std::max(r.driver_lip_y, std::abs(p.driver(t, I, y + dy, z) - base) / dy);
            r.driver_lip_z = std::max(r.driver_lip_z, std::abs(p.driver(t, I, y, zp) - base) / dy);
        }
        const double u = 4.0 * (rng.uniform() - 0.5);
        const double du = 2.0 * (rng.uniform() - 0.5);
        Vd xT(p.dim), xTp(p.dim);
        for (int i = 0; i < p.dim; ++i) {
            xT[i] = 4.0 * (rng.uniform() - 0.5);
            xTp[i] = xT[i] + 2.0 * (rng.uniform() - 0.5);
        }
        const double denom = std::abs(du) + (xTp - xT).norm();
        if (denom > 1e-9)
            r.terminal_lip = std::max(
                r.terminal_lip, std::abs(p.terminal.g0(u + du, xTp) - p.terminal.g0(u, xT)) / denom);
    }

    if (r.coef_lip > p.lip_coef * slack)
        fail("coefficient summary-Lipschitz witness " + fmt_g17(r.coef_lip) + " exceeds the declared bound " +
             fmt_g17(p.lip_coef));
    if (r.min_diffusion < -1e-12) fail("diffusion matrix has a negative principal minor");
    if (r.terminal_lip > p.terminal.lip * slack)
        fail("terminal Lipschitz witness " + fmt_g17(r.terminal_lip) + " exceeds the declared bound " +
             fmt_g17(p.terminal.lip));
    if (std::abs(p.lambda.horizon() - p.horizon) > 1e-12 * p.horizon) fail("summary measure horizon mismatch");
    if (std::abs(p.terminal.lam.horizon() - p.horizon) > 1e-12 * p.horizon) fail("terminal measure horizon mismatch");
    return r;
}

}  // namespace ppde
