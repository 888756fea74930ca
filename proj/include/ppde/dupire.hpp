#pragma once

// Vertical derivatives of path functionals and scheme values: bump the path
// at the observation time and difference the results, or propagate a
// first-variation process through the sampling backend. Around them, the
// machinery that certifies derivative data: terminal mollification with
// window-measure certificates, a probe for the window structure of the
// terminal data, and regularity ratio tables for the derivative itself,
// including its jump across an atom of the window measure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ppde/approximation.hpp"
#include "ppde/evaluator.hpp"
#include "ppde/generator.hpp"
#include "ppde/math.hpp"
#include "ppde/mc/tangent.hpp"
#include "ppde/path.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

enum class DerivMethod { CentralBump, TangentFBSDE };

struct DerivativeEstimate {
    Vd value = Vd::scalar(0.0);  // one entry per path coordinate
    Vd proxy = Vd::scalar(0.0);  // per-coordinate accuracy proxy (never negative)
    Vd se = Vd::scalar(0.0);     // sampling error bound (zero for deterministic backends)
    double delta = 0;            // bump size used (zero for the tangent method)
    DerivMethod method = DerivMethod::CentralBump;
    bool accepted = true;
};

struct DupireOptions {
    std::vector<double> ladder{1e-2, 5e-3, 2.5e-3};
    double accept_rel = 0.10;  // proxy below this fraction of the value accepts
    double tiny = 1e-8;        // values below this accept outright
};

namespace dupdetail {

// central difference at delta plus the half-step recheck, one coordinate
template <class F>
std::pair<double, double> central_pair(F&& f, double t, const Path& x, double delta, int axis) {
    const auto est = [&](double d) {
        const double vp = f(t, apxdetail::bump_from(x, t, d, axis));
        const double vm = f(t, apxdetail::bump_from(x, t, -d, axis));
        return (vp - vm) / (2.0 * d);
    };
    const double e1 = est(delta);
    const double e2 = est(0.5 * delta);
    return {e1, std::abs(e1 - e2)};
}

}  // namespace dupdetail

// Vertical derivative of an arbitrary functional f(t, path): bump the path at
// the observation time, coordinate by coordinate. The proxy is the gap
// between the delta and delta/2 estimates.
template <class F>
    requires std::invocable<F&, double, const Path&>
DerivativeEstimate vertical_derivative(F&& f, double t, const Path& x, double delta) {
    if (!(delta > 0)) throw std::invalid_argument("derivative: bump size must be positive");
    DerivativeEstimate d;
    d.value = Vd(x.dim());
    d.proxy = Vd(x.dim());
    d.se = Vd(x.dim());
    d.delta = delta;
    for (int i = 0; i < x.dim(); ++i) {
        const auto [e, p] = dupdetail::central_pair(f, t, x, delta, i);
        d.value[i] = e;
        d.proxy[i] = p;
    }
    return d;
}

// Scheme-value derivative through the backend facade. Sampling backends reuse
// one seed, so bumped pairs share their noise; the reported se is the
// independent-run bound, the proxy the practical accuracy signal.
inline DerivativeEstimate vertical_derivative(const Evaluator& ev, const TimeGrid& grid, double t,
                                              const Path& x, double delta) {
    if (!(delta > 0)) throw std::invalid_argument("derivative: bump size must be positive");
    DerivativeEstimate d;
    d.value = Vd(x.dim());
    d.proxy = Vd(x.dim());
    d.se = Vd(x.dim());
    d.delta = delta;
    for (int i = 0; i < x.dim(); ++i) {
        const auto est = [&](double h) {
            const EvalResult vp = ev.value(grid, t, apxdetail::bump_from(x, t, h, i));
            const EvalResult vm = ev.value(grid, t, apxdetail::bump_from(x, t, -h, i));
            d.se[i] = std::max(d.se[i], (vp.se + vm.se) / (2.0 * h));
            return (vp.value - vm.value) / (2.0 * h);
        };
        const double e1 = est(delta);
        const double e2 = est(0.5 * delta);
        d.value[i] = e1;
        d.proxy[i] = std::abs(e1 - e2);
    }
    return d;
}

// Walk the bump ladder until the proxy is small against the value (or the
// value is negligible); flags failure instead of guessing further.
inline DerivativeEstimate vertical_derivative(const Evaluator& ev, const TimeGrid& grid, double t,
                                              const Path& x, const DupireOptions& opt) {
    if (opt.ladder.empty()) throw std::invalid_argument("derivative: empty bump ladder");
    DerivativeEstimate d;
    for (double delta : opt.ladder) {
        d = vertical_derivative(ev, grid, t, x, delta);
        double vmax = 0, pmax = 0;
        for (int i = 0; i < d.value.n; ++i) {
            vmax = std::max(vmax, std::abs(d.value[i]));
            pmax = std::max(pmax, d.proxy[i]);
        }
        if (vmax <= opt.tiny || pmax <= opt.accept_rel * vmax) {
            d.accepted = true;
            return d;
        }
    }
    d.accepted = false;
    return d;
}

// First-variation estimate from the sampling backend (line problems with
// summary-free y/z loadings; see the tangent scope guards).
inline DerivativeEstimate tangent_derivative(const Problem& p, const TimeGrid& grid, double t,
                                             const Path& x, const McOptions& opt = {}) {
    const McValue v = tangent_value(p, grid, t, x, opt);
    DerivativeEstimate d;
    d.value = Vd::scalar(v.value);
    d.se = Vd::scalar(v.se);
    d.proxy = Vd::scalar(3.0 * v.se);
    d.delta = 0.0;
    d.method = DerivMethod::TangentFBSDE;
    return d;
}

// --- terminal mollification ---------------------------------------------------

namespace dupdetail {

// compact bump kernel exp(-1/(1-s^2)) on (-1,1), discretized by Simpson
// weights and normalized to unit mass; c1 bounds the total variation of the
// density, which controls the mollified second derivative
struct BumpKernel {
    std::vector<double> s, w;
    double c1 = 0;

    static const BumpKernel& instance() {
        static const BumpKernel k = build();
        return k;
    }

private:
    static BumpKernel build() {
        BumpKernel k;
        const int n = 41;
        std::vector<double> dens(n);
        double z = 0;
        for (int i = 0; i < n; ++i) {
            const double s = -1.0 + 2.0 * i / (n - 1);
            const double q = 1.0 - s * s;
            const double v = q > 1e-14 ? std::exp(-1.0 / q) : 0.0;
            const double sw = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            k.s.push_back(s);
            dens[static_cast<std::size_t>(i)] = v;
            k.w.push_back(sw * v);
            z += sw * v;
        }
        for (double& w : k.w) w /= z;
        // continuous normalizer via the same rule, then the density peak
        const double h3 = (2.0 / (n - 1)) / 3.0;
        const double zc = z * h3;
        k.c1 = 2.0 * std::exp(-1.0) / zc;
        return k;
    }
};

}  // namespace dupdetail

struct TerminalCertificates {
    std::vector<double> node_bound;     // claimed |d g^n / d x_j| limits: lip * window_j
    std::vector<double> node_observed;  // sampled central differences
    double second_bound = 0;            // claimed |d^2/du^2| of the mollified map
    double second_observed = 0;
    bool exact = false;  // smoothing left the data unchanged (linear case)
    bool pass = false;
};

struct SmoothedTerminal {
    TerminalSpec spec;      // mollified copy of the terminal data
    double bandwidth = 0;   // fixed bandwidth, or 0 for 1e-3 * (1 + |u|)
    TerminalCertificates cert;
};

namespace dupdetail {

inline double bandwidth_at(double bw, double u) { return bw > 0 ? bw : 1e-3 * (1.0 + std::abs(u)); }

}  // namespace dupdetail

// Mollify the terminal map in its window integral and certify the node
// derivatives of the smoothed data against the window masses. The window
// measure is the certificate's yardstick, so a terminal without one cannot
// be certified here.
inline SmoothedTerminal smooth_terminal(const TerminalSpec& term, const TimeGrid& grid, PathMode mode,
                                        double bandwidth = 0.0) {
    if (!term.g0) throw std::invalid_argument("smooth: terminal map missing");
    if (term.lam.is_zero())
        throw std::invalid_argument("smooth: terminal carries no window measure to certify against");
    if (bandwidth < 0) throw std::invalid_argument("smooth: bandwidth must not be negative");

    SmoothedTerminal out;
    out.bandwidth = bandwidth;
    out.spec = term;
    const auto base = term.g0;
    const double bw = bandwidth;
    out.spec.g0 = [base, bw](double u, const Vd& xT) {
        const auto& K = dupdetail::BumpKernel::instance();
        const double h = dupdetail::bandwidth_at(bw, u);
        double acc = 0;
        for (std::size_t i = 0; i < K.s.size(); ++i) acc += K.w[i] * base(u + h * K.s[i], xT);
        return acc;
    };
    const auto smooth = out.spec.g0;
    out.spec.dg0_du = [smooth](double u, const Vd& xT) {
        const double e = 1e-6 * (1.0 + std::abs(u));
        return (smooth(u + e, xT) - smooth(u - e, xT)) / (2.0 * e);
    };

    // --- certificates over deterministic probe keys ---
    const std::vector<double> w = term.lam.node_weights(grid, mode == PathMode::PC);
    const std::size_t nn = grid.points().size();
    const int nkeys = 8;

    // does the map read the endpoint directly, beyond the window integral?
    bool xt_direct = false;
    for (double u : {-0.7, 0.2, 1.3}) {
        const double a = base(u, Vd::scalar(0.4));
        const double b = base(u, Vd::scalar(-1.1));
        if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a))) xt_direct = true;
    }

    TerminalCertificates& c = out.cert;
    c.node_bound.assign(nn, 0.0);
    c.node_observed.assign(nn, 0.0);
    for (std::size_t j = 0; j < nn; ++j)
        c.node_bound[j] = term.lip * w[j] + (xt_direct && j + 1 == nn ? term.lip : 0.0);

    const auto gk = [&](const std::vector<Vd>& vals) { return out.spec.on_key(grid, vals, mode); };
    double ident = 0, iscale = 1, hmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < nkeys; ++k) {
        RngStream rng(416, static_cast<std::uint64_t>(k));
        std::vector<Vd> vals;
        for (std::size_t j = 0; j < nn; ++j) vals.push_back(Vd::scalar(1.5 * rng.normal()));
        const double u = term.summary_of_key(grid, vals, mode);
        hmin = std::min(hmin, dupdetail::bandwidth_at(bw, u));

        const double gs = gk(vals);
        const double gb = base(u, vals.back());
        ident = std::max(ident, std::abs(gs - gb));
        iscale = std::max(iscale, std::abs(gb));

        for (std::size_t j = 0; j < nn; ++j) {
            const double e = 1e-6 * (1.0 + std::abs(vals[j][0]));
            std::vector<Vd> up = vals, dn = vals;
            up[j][0] += e;
            dn[j][0] -= e;
            c.node_observed[j] = std::max(c.node_observed[j], std::abs(gk(up) - gk(dn)) / (2.0 * e));
        }

        // second difference through the window integral at a quarter bandwidth
        const double e2 = 0.25 * dupdetail::bandwidth_at(bw, u);
        const double d2 =
            std::abs(smooth(u + e2, vals.back()) - 2.0 * smooth(u, vals.back()) + smooth(u - e2, vals.back())) /
            (e2 * e2);
        c.second_observed = std::max(c.second_observed, d2);
    }
    c.exact = ident <= 1e-12 * iscale;
    c.second_bound = term.lip * dupdetail::BumpKernel::instance().c1 / hmin;
    c.pass = c.second_observed <= 1.05 * c.second_bound + 1e-12;
    for (std::size_t j = 0; j < nn; ++j)
        if (c.node_observed[j] > 1.05 * c.node_bound[j] + 1e-9) c.pass = false;
    return out;
}

// --- window structure probe ---------------------------------------------------

// Sampled node derivatives of the terminal map against the window masses.
// For data of window form g0(sum_j w_j x_j), the derivative profile is
// proportional to the windows at every key, so both residual parts vanish:
// the tail-normalized profile matches w_i / lam([t_j, T]) and the profile is
// the same across keys. Data mixing nodes outside one window integral breaks
// the cross-key consistency and shows up as a positive residual.
struct StructureProbe {
    std::vector<double> windows;               // node masses of the window measure
    std::vector<std::vector<double>> derivs;   // per key, per node, absolute values
    double residual = 0;
    bool degenerate = false;   // windows carry no mass (endpoint-only data)
};

inline StructureProbe structure_condition_probe(const TerminalSpec& term, const TimeGrid& grid,
                                                PathMode mode, int nkeys = 8, std::uint64_t seed = 2024) {
    if (!term.g0) throw std::invalid_argument("structure: terminal map missing");
    if (nkeys < 2) throw std::invalid_argument("structure: need at least two probe keys");

    StructureProbe out;
    out.windows = term.lam.node_weights(grid, mode == PathMode::PC);
    const std::size_t nn = out.windows.size();
    double wtot = 0;
    for (double w : out.windows) wtot += w;
    out.degenerate = wtot <= 1e-14;

    double scale = 0;
    for (int k = 0; k < nkeys; ++k) {
        RngStream rng(seed, static_cast<std::uint64_t>(k));
        std::vector<Vd> vals;
        for (std::size_t j = 0; j < nn; ++j) vals.push_back(Vd::scalar(1.5 * rng.normal()));
        std::vector<double> d(nn, 0.0);
        for (std::size_t j = 0; j < nn; ++j) {
            const double e = 1e-6 * (1.0 + std::abs(vals[j][0]));
            std::vector<Vd> up = vals, dn = vals;
            up[j][0] += e;
            dn[j][0] -= e;
            d[j] = std::abs(term.on_key(grid, up, mode) - term.on_key(grid, dn, mode)) / (2.0 * e);
            scale = std::max(scale, d[j]);
        }
        out.derivs.push_back(std::move(d));
    }
    if (scale <= 1e-12) return out;

    // tail-normalized profile against the analytic windows
    if (!out.degenerate) {
        for (const auto& d : out.derivs) {
            std::vector<double> tw(nn + 1, 0.0), td(nn + 1, 0.0);
            for (std::size_t j = nn; j-- > 0;) {
                tw[j] = tw[j + 1] + out.windows[j];
                td[j] = td[j + 1] + d[j];
            }
            for (std::size_t j = 0; j < nn; ++j) {
                if (tw[j] <= 1e-12 * wtot || td[j] <= 1e-9 * scale) continue;
                for (std::size_t i = j; i < nn; ++i)
                    out.residual = std::max(out.residual, std::abs(d[i] / td[j] - out.windows[i] / tw[j]));
            }
        }
    }

    // cross-key consistency of the normalized profile
    std::vector<double> ref;
    for (const auto& d : out.derivs) {
        double sum = 0;
        for (double v : d) sum += v;
        if (sum <= 1e-9 * scale) continue;
        std::vector<double> n(nn);
        for (std::size_t j = 0; j < nn; ++j) n[j] = d[j] / sum;
        if (ref.empty()) {
            ref = n;
            continue;
        }
        for (std::size_t j = 0; j < nn; ++j)
            out.residual = std::max(out.residual, std::abs(n[j] - ref[j]));
    }
    return out;
}

// --- regularity certificates for the derivative -------------------------------

struct CertificateRow {
    double size = 0;
    double num = 0;
    double den = 0;
    double ratio = 0;
    bool skipped = false;
};

struct RegularityOptions {
    double alpha = 1.0;        // declared space regularity of the data
    double delta = 1e-3;       // bump size for the derivative itself
    std::vector<double> space_deltas{0.2, 0.1, 0.05, 0.025};
    std::vector<double> history_backs;  // optional bump starts this far before t
    double history_delta = 0.1;
    std::vector<double> dts{0.2, 0.1, 0.05, 0.025};
    double atom_time = std::numeric_limits<double>::quiet_NaN();
    double atom_eps = 1e-3;    // evaluation offset strictly inside the flanking slabs
    double zero = 1e-12;
};

struct RegularityReport {
    std::vector<CertificateRow> space;  // bumps at t and, when asked, from earlier times
    std::vector<CertificateRow> time;   // derivative drift along the stopped path
    double uniform_bound = 0;           // largest |derivative| seen anywhere
    double alpha = 1.0;
    double atom_jump = 0;
    double atom_mass = 0;
    bool atom_checked = false;
    bool atom_pass = true;

    static double max_ratio(const std::vector<CertificateRow>& rows) {
        double m = 0;
        for (const auto& r : rows)
            if (!r.skipped) m = std::max(m, r.ratio);
        return m;
    }
};

// Ratio tables for the vertical derivative: perturb the query in space (with
// the window-weighted history distance) and in time (with the parabolic
// exponent alpha/(2+2alpha) plus the window mass of the skipped stretch), and
// measure the derivative's jump across an atom of the window measure against
// the atom's mass.
inline RegularityReport regularity_certificates(const Evaluator& ev, const TimeGrid& grid, double t,
                                                const Path& x, const RegularityOptions& opt = {}) {
    if (!(opt.alpha > 0)) throw std::invalid_argument("certificates: alpha must be positive");
    const Problem& p = ev.problem();
    const AtomicMeasure& lam = !p.terminal.lam.is_zero() ? p.terminal.lam : p.lambda;

    const auto grad = [&](double s, const Path& y) {
        const DerivativeEstimate d = vertical_derivative(ev, grid, s, y, opt.delta);
        return d.value[0];
    };

    RegularityReport rep;
    rep.alpha = opt.alpha;
    const double g0 = grad(t, x);
    rep.uniform_bound = std::abs(g0);
    const auto note = [&](double g) { rep.uniform_bound = std::max(rep.uniform_bound, std::abs(g)); };

    const auto push = [&](std::vector<CertificateRow>& rows, double size, double num, double den) {
        CertificateRow r;
        r.size = size;
        r.num = num;
        r.den = den;
        r.skipped = num <= opt.zero * std::max(1.0, rep.uniform_bound);
        r.ratio = r.skipped ? 0.0 : num / std::max(den, opt.zero);
        rows.push_back(r);
    };

    for (double d : opt.space_deltas) {
        if (!(d > 0)) throw std::invalid_argument("certificates: bump sizes must be positive");
        const double g = grad(t, apxdetail::bump_from(x, t, d));
        note(g);
        push(rep.space, d, std::abs(g - g0), std::pow(d, opt.alpha));
    }
    for (double back : opt.history_backs) {
        const double tau = std::max(t - back, 0.0);
        const double g = grad(t, apxdetail::bump_from(x, tau, opt.history_delta));
        note(g);
        const double den = std::pow(opt.history_delta * lam.mass_co(tau, t), opt.alpha) +
                           std::pow(opt.history_delta, opt.alpha);
        push(rep.space, back, std::abs(g - g0), den);
    }

    const Path held = x.stopped(t);
    for (double dt : opt.dts) {
        if (!(dt > 0)) throw std::invalid_argument("certificates: time offsets must be positive");
        const double tp = std::min(t + dt, grid.horizon());
        if (tp >= grid.horizon() - grid.tol()) continue;  // derivative at the horizon is the data's
        const double g = grad(tp, held);
        note(g);
        const double den = std::pow(tp - t, opt.alpha / (2.0 + 2.0 * opt.alpha)) + lam.mass_co(t, tp);
        push(rep.time, tp - t, std::abs(g - g0), den);
    }

    if (!std::isnan(opt.atom_time)) {
        const double ts = opt.atom_time;
        rep.atom_mass = lam.atom_at(ts);
        const double gm = grad(ts - opt.atom_eps, x.stopped(ts - opt.atom_eps));
        const double gp = grad(ts + opt.atom_eps, x.stopped(ts + opt.atom_eps));
        note(gm);
        note(gp);
        rep.atom_jump = std::abs(gp - gm);
        rep.atom_checked = true;
        if (rep.atom_mass > 0) rep.atom_pass = std::abs(rep.atom_jump - rep.atom_mass) <= 0.10 * rep.atom_mass;
    }
    return rep;
}

}  // namespace ppde
