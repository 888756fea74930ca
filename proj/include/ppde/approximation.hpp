#pragma once

// Level-ladder diagnostics for the frozen-slab scheme: run one query through
// a refinement sequence, measure the consecutive value gaps, fit their decay
// rate against the mesh, and extrapolate the limit from the observed
// contraction. Companion checks: independence of that limit from the
// refinement sequence, space/time regularity ratio tables, stability under
// data perturbations, and agreement with classical closed forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppde/evaluator.hpp"
#include "ppde/generator.hpp"
#include "ppde/math.hpp"
#include "ppde/metrics.hpp"
#include "ppde/path.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

struct ConvergenceOptions {
    double cauchy_tol = 1e-2;   // finest gap at or below this passes the Cauchy check
    double rate_floor = 0.25;   // smallest acceptable fitted decay exponent
    double zero_gap = 1e-12;    // gaps below scale * zero_gap count as exact agreement
    double min_contraction = 1.05;  // last-gap ratio below this disables extrapolation
};

// One ladder run. `limit` extrapolates from the finest pair using the local
// contraction r = gap[k-1]/gap[k] (so limit = v_K + gap_K / (r - 1)); when
// the gaps do not contract the finest value is reported unchanged. The
// global log-gap fit is kept separately as the rate diagnostic.
struct ConvergenceReport {
    std::vector<int> levels;
    std::vector<double> meshes;
    std::vector<double> values;
    std::vector<double> ses;
    std::vector<double> gaps;   // |values[k] - values[k-1]|, k >= 1

    double rate = 0;            // fitted slope of log gap against log mesh
    double rate_residual = 0;   // RMS residual of that fit
    bool exact_chain = false;   // all gaps at rounding level
    double contraction = 0;     // finest-pair gap ratio (0 when unavailable)
    double limit = 0;           // extrapolated value, else finest value
    double predicted_gap = 0;   // fitted gap one level past the finest
    double value_finest = 0;
    double se_finest = 0;
    bool extrapolated = false;
    bool cauchy_ok = false;
    bool rate_ok = false;

    int finest_level() const { return levels.back(); }
};

struct RateDiagnostic {
    double slope = 0;
    double residual = 0;
    bool degenerate = false;  // all gaps at rounding level: nothing to fit
    bool ok = false;          // slope at or above the floor (or degenerate)
};

// Fit log gap against log mesh. `meshes` holds the finer level's mesh for
// each gap. Gaps at rounding level are dropped from the fit; if none remain
// the chain already agrees exactly and the diagnostic degenerates.
inline RateDiagnostic rate_diagnostic(const std::vector<double>& meshes, const std::vector<double>& gaps,
                                      double rate_floor = 0.25, double zero_gap = 1e-12) {
    if (meshes.size() != gaps.size()) throw std::invalid_argument("rate: one mesh per gap");
    if (gaps.size() < 2) throw std::invalid_argument("rate: need at least three levels (two gaps)");
    double scale = 0;
    for (double g : gaps) scale = std::max(scale, g);
    RateDiagnostic d;
    if (scale <= zero_gap) {
        d.degenerate = true;
        d.slope = std::numeric_limits<double>::infinity();
        d.ok = true;
        return d;
    }
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
        if (gaps[k] > zero_gap * std::max(1.0, scale)) {
            lx.push_back(std::log(meshes[k]));
            ly.push_back(std::log(gaps[k]));
        }
    }
    if (lx.size() < 2) {
        d.degenerate = true;
        d.slope = std::numeric_limits<double>::infinity();
        d.ok = true;
        return d;
    }
    const LineFit f = fit_line(lx, ly);
    d.slope = f.slope;
    d.residual = f.residual;
    d.ok = f.slope >= rate_floor;
    return d;
}

inline RateDiagnostic rate_diagnostic(const ConvergenceReport& r, double rate_floor = 0.25,
                                      double zero_gap = 1e-12) {
    std::vector<double> meshes(r.meshes.begin() + 1, r.meshes.end());
    return rate_diagnostic(meshes, r.gaps, rate_floor, zero_gap);
}

// Evaluate one query across levels `level_min..level_max` of the sequence and
// assemble the ladder report.
inline ConvergenceReport approximate_solution(const Evaluator& ev, const GridSequence& seq, int level_min,
                                              int level_max, double t, const Path& x,
                                              const ConvergenceOptions& opt = {}) {
    if (level_min < 1 || level_max < level_min)
        throw std::invalid_argument("ladder: levels must satisfy 1 <= min <= max");
    ConvergenceReport r;
    for (int l = level_min; l <= level_max; ++l) {
        const TimeGrid g = seq.grid(l);
        const EvalResult e = ev.value(g, t, x);
        r.levels.push_back(l);
        r.meshes.push_back(g.mesh());
        r.values.push_back(e.value);
        r.ses.push_back(e.se);
        if (r.values.size() > 1) r.gaps.push_back(std::abs(e.value - r.values[r.values.size() - 2]));
    }
    r.value_finest = r.values.back();
    r.se_finest = r.ses.back();
    r.limit = r.value_finest;

    double vscale = 1.0;
    for (double v : r.values) vscale = std::max(vscale, std::abs(v));
    double gmax = 0;
    for (double g : r.gaps) gmax = std::max(gmax, g);
    r.exact_chain = !r.gaps.empty() && gmax <= opt.zero_gap * vscale;

    if (r.gaps.size() >= 2 && !r.exact_chain) {
        const RateDiagnostic d = rate_diagnostic(r, opt.rate_floor, opt.zero_gap * vscale);
        r.rate = d.slope;
        r.rate_residual = d.residual;
        r.rate_ok = d.ok;
    } else if (r.exact_chain) {
        r.rate = std::numeric_limits<double>::infinity();
        r.rate_ok = true;
    }

    const std::size_t K = r.gaps.size();
    if (K >= 2 && !r.exact_chain && r.gaps[K - 1] > opt.zero_gap * vscale) {
        r.contraction = r.gaps[K - 2] / r.gaps[K - 1];
        if (r.contraction >= opt.min_contraction) {
            const double signed_gap = r.values.back() - r.values[r.values.size() - 2];
            r.limit = r.value_finest + signed_gap / (r.contraction - 1.0);
            r.predicted_gap = r.gaps[K - 1] / r.contraction;
            r.extrapolated = true;
        } else {
            r.predicted_gap = r.gaps[K - 1];
        }
    } else if (!r.gaps.empty() && !r.exact_chain) {
        r.predicted_gap = r.gaps.back();
    }

    r.cauchy_ok = r.exact_chain || (!r.gaps.empty() && r.gaps.back() <= opt.cauchy_tol * vscale);
    return r;
}

// --- grid independence -----------------------------------------------------

struct GridCheckRow {
    double t = 0;
    std::string path_name;
    double limit_a = 0, limit_b = 0;
    double discrepancy = 0;
    double tol = 0;   // 2 * (predicted next gap of a + of b), plus sampling slack
    bool pass = false;
};

struct GridCheck {
    std::vector<GridCheckRow> rows;
    double max_discrepancy = 0;
    double max_tol = 0;
    bool pass = true;
    ConvergenceReport last_a, last_b;  // reports for the final query, for inspection
};

struct GridQuery {
    double t = 0;
    Path x;
    std::string name;
};

// Two refinement sequences must land on the same limit. The tolerance is
// twice the sum of the sequences' fitted gap bounds one level past their
// finest grids (their remaining-convergence estimates), widened by sampling
// error when the backend reports one.
inline GridCheck grid_independence(const Evaluator& ev, const GridSequence& seq_a, int levels_a,
                                   const GridSequence& seq_b, int levels_b,
                                   const std::vector<GridQuery>& queries,
                                   const ConvergenceOptions& opt = {}) {
    if (queries.empty()) throw std::invalid_argument("gridcheck: need at least one query");
    GridCheck c;
    for (const GridQuery& q : queries) {
        const ConvergenceReport ra = approximate_solution(ev, seq_a, 1, levels_a, q.t, q.x, opt);
        const ConvergenceReport rb = approximate_solution(ev, seq_b, 1, levels_b, q.t, q.x, opt);
        GridCheckRow row;
        row.t = q.t;
        row.path_name = q.name;
        row.limit_a = ra.limit;
        row.limit_b = rb.limit;
        row.discrepancy = std::abs(ra.limit - rb.limit);
        row.tol = 2.0 * (ra.predicted_gap + rb.predicted_gap) + 3.0 * (ra.se_finest + rb.se_finest);
        row.pass = row.discrepancy <= row.tol;
        c.max_discrepancy = std::max(c.max_discrepancy, row.discrepancy);
        c.max_tol = std::max(c.max_tol, row.tol);
        c.pass = c.pass && row.pass;
        c.rows.push_back(row);
        c.last_a = ra;
        c.last_b = rb;
    }
    return c;
}

// --- regularity ratio tables -------------------------------------------------

namespace apxdetail {

// root modulus u -> sqrt(w(u^2)) for w(u) = scale * u^beta
inline double modulus_root(const Modulus& m, double u) {
    return u <= 0 ? 0.0 : std::sqrt(m(u * u));
}

// vertical shift of one coordinate from time t onward
inline Path bump_from(const Path& x, double t, double delta, int axis = 0) {
    Vd v = x.at(t);
    v[axis] += delta;
    return concat(x, t, Path::constant(x.mode(), x.horizon(), v));
}

}  // namespace apxdetail

struct ModulusTable {
    std::vector<double> sizes;    // perturbation sizes, largest first
    std::vector<double> nums;     // |v' - v|
    std::vector<double> dens;     // modulus of the perturbation distance
    std::vector<double> ratios;   // nums/dens where defined, else 0 marked skipped
    std::vector<bool> skipped;    // 0/0 entries carry no information

    double max_ratio() const {
        double m = 0;
        for (std::size_t k = 0; k < ratios.size(); ++k)
            if (!skipped[k]) m = std::max(m, ratios[k]);
        return m;
    }
    double min_ratio() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ratios.size(); ++k)
            if (!skipped[k]) m = std::min(m, ratios[k]);
        return m;
    }
    // largest over smallest informative ratio; 1 when none or one entry
    double band() const {
        const double lo = min_ratio(), hi = max_ratio();
        if (!std::isfinite(lo) || lo <= 0) return 1.0;
        return hi / lo;
    }
    bool bounded(double cap) const {
        for (std::size_t k = 0; k < ratios.size(); ++k)
            if (!skipped[k] && !(ratios[k] <= cap)) return false;
        return true;
    }
};

struct ModulusReport {
    int level = 0;
    ModulusTable space;  // vertical bumps delta against the root modulus of the stopped distance
    ModulusTable time;   // forward offsets dt against the root modulus of sqrt(dt)
};

struct ModulusOptions {
    std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};  // space bump ladder
    std::vector<double> dts{0.2, 0.1, 0.05, 0.025};     // time offset ladder
    double mesh_quarter = 0;  // optional |pi|^(1/4) cushion added inside the time modulus
    double zero = 1e-12;
    // false: advance from the query, pairs (t, t + dt). true: back off from the
    // horizon, pairs (T - dt, T) -- the sharp probe when the data has a kink at
    // the terminal time, where the value genuinely moves like sqrt(dt).
    bool anchor_horizon = false;
};

// Ratio tables certifying the scheme's regularity: perturb the query and
// compare the value change against the problem's modulus of the perturbation
// size. Space rows bump the path vertically at the query time; time rows
// advance the query along the stopped path, t' = t + dt, and use the
// parabolic argument sqrt(dt) (plus an optional mesh cushion). Entries where
// both the change and the modulus vanish are skipped.
inline ModulusReport modulus_check(const Evaluator& ev, const TimeGrid& grid, double t, const Path& x,
                                   const ModulusOptions& opt = {}) {
    const Modulus& m = ev.problem().modulus;
    ModulusReport rep;
    rep.level = grid.slabs();
    const double base = ev.value(grid, t, x).value;
    const double vscale = std::max(1.0, std::abs(base));

    for (double d : opt.deltas) {
        if (!(d > 0)) throw std::invalid_argument("modulus: bump sizes must be positive");
        const Path xp = apxdetail::bump_from(x, t, d);
        const double num = std::abs(ev.value(grid, t, xp).value - base);
        const double den = apxdetail::modulus_root(m, dist_uniform(x, xp, t));
        rep.space.sizes.push_back(d);
        rep.space.nums.push_back(num);
        rep.space.dens.push_back(den);
        // a change at rounding level cannot witness a blow-up: the row is kept
        // but carries no ratio information
        const bool skip = num <= opt.zero * vscale;
        rep.space.skipped.push_back(skip);
        rep.space.ratios.push_back(skip ? 0.0 : num / std::max(den, opt.zero));
    }

    const Path stopped = x.stopped(t);
    for (double dt : opt.dts) {
        if (!(dt > 0)) throw std::invalid_argument("modulus: time offsets must be positive");
        double num, span;
        if (opt.anchor_horizon) {
            const double tk = std::max(grid.horizon() - dt, 0.0);
            const Path held = x.stopped(tk);
            num = std::abs(ev.value(grid, grid.horizon(), held).value - ev.value(grid, tk, x).value);
            span = grid.horizon() - tk;
        } else {
            const double tp = std::min(t + dt, grid.horizon());
            num = std::abs(ev.value(grid, tp, stopped).value - base);
            span = tp - t;
        }
        const double den = apxdetail::modulus_root(m, std::sqrt(span) + opt.mesh_quarter);
        rep.time.sizes.push_back(span);
        rep.time.nums.push_back(num);
        rep.time.dens.push_back(den);
        const bool skip = num <= opt.zero * vscale;
        rep.time.skipped.push_back(skip);
        rep.time.ratios.push_back(skip ? 0.0 : num / std::max(den, opt.zero));
    }
    return rep;
}

// --- stability under data perturbations --------------------------------------

struct StabilityReport {
    std::vector<double> eps;     // perturbation sizes, decreasing
    std::vector<double> values;
    double reference = 0;        // value of the unperturbed instance
    std::vector<double> gaps;    // |value_k - reference|
    std::vector<double> ratios;  // gap_k / gap_{k+1} for successive sizes
};

// Evaluate a perturbed family at sizes `eps` (family(0) is the reference) on
// one grid and report how fast the values return to the reference.
inline StabilityReport stability_experiment(const std::function<Problem(double)>& family,
                                            const std::vector<double>& eps, Backend backend,
                                            const TimeGrid& grid, double t, const Path& x,
                                            const EvalOptions& opt = {}) {
    if (eps.size() < 2) throw std::invalid_argument("stability: need at least two perturbation sizes");
    for (std::size_t k = 1; k < eps.size(); ++k)
        if (!(eps[k] < eps[k - 1])) throw std::invalid_argument("stability: sizes must decrease");
    StabilityReport r;
    r.reference = Evaluator(family(0.0), backend, opt).value(grid, t, x).value;
    for (double e : eps) {
        r.eps.push_back(e);
        r.values.push_back(Evaluator(family(e), backend, opt).value(grid, t, x).value);
        r.gaps.push_back(std::abs(r.values.back() - r.reference));
    }
    for (std::size_t k = 0; k + 1 < r.gaps.size(); ++k)
        r.ratios.push_back(r.gaps[k] / std::max(r.gaps[k + 1], 1e-300));
    return r;
}

// --- classical consistency ----------------------------------------------------

struct ClassicalRow {
    int level = 0;
    double max_gap = 0;  // over queries, |v^n - w|
    double max_se = 0;
};

struct ClassicalReport {
    std::vector<ClassicalRow> rows;
    double final_gap = 0;  // max gap at the finest level
};

// Compare the scheme against a known classical solution w(t, x) over a query
// set and a level ladder. The gap at the finest level is the headline number.
inline ClassicalReport classical_consistency(const Evaluator& ev, const GridSequence& seq, int level_min,
                                             int level_max, const std::vector<GridQuery>& queries,
                                             const std::function<double(double, const Path&)>& w) {
    if (queries.empty()) throw std::invalid_argument("classical: need at least one query");
    if (!w) throw std::invalid_argument("classical: need the reference solution");
    ClassicalReport rep;
    for (int l = level_min; l <= level_max; ++l) {
        const TimeGrid g = seq.grid(l);
        ClassicalRow row;
        row.level = l;
        for (const GridQuery& q : queries) {
            const EvalResult e = ev.value(g, q.t, q.x);
            row.max_gap = std::max(row.max_gap, std::abs(e.value - w(q.t, q.x)));
            row.max_se = std::max(row.max_se, e.se);
        }
        rep.rows.push_back(row);
    }
    rep.final_gap = rep.rows.back().max_gap;
    return rep;
}

}  // namespace ppde
