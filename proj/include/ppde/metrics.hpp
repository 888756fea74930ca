#pragma once

// Distances between paths observed up to a cut-off time t: the stopped
// uniform distance, and a jump-aware distance for step paths that combines a
// time-change cost with a stopped sup cost plus an integral penalty against a
// reference measure. The time-change infimum is taken over piecewise-linear
// reparameterizations whose knots match breakpoints of one path to breakpoints
// of the other; that restriction makes the value an upper bound of the full
// infimum, tightened by optional midpoint refinement of the breakpoint
// lattice, with the last refinement improvement reported as a gap estimate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ppde/math.hpp"
#include "ppde/measure.hpp"
#include "ppde/path.hpp"

namespace ppde {

// sup_{s <= t} |x_s - xp_s|. Probes every merged breakpoint from the right
// and from the left (1e-9 T back), which covers step and linear segments.
inline double dist_uniform(const Path& x, const Path& xp, double t) {
    if (x.dim() != xp.dim()) throw std::invalid_argument("dist_uniform: path dims differ");
    t = std::min(std::max(t, 0.0), std::min(x.horizon(), xp.horizon()));
    std::vector<double> probes{0.0, t};
    const double eps = 1e-9 * std::max(x.horizon(), xp.horizon());
    auto add = [&](double s) {
        if (s <= t + eps) {
            probes.push_back(std::min(s, t));
            probes.push_back(std::max(std::min(s, t) - eps, 0.0));
        }
    };
    for (std::size_t k = 0; k < x.breakpoints(); ++k) add(x.time(k));
    for (std::size_t k = 0; k < xp.breakpoints(); ++k) add(xp.time(k));
    double d = 0;
    for (double s : probes) d = std::max(d, (x.at(s) - xp.at(s)).norm());
    return d;
}

struct SkorokhodOptions {
    int refine_rounds = 1;    // midpoint-insertion rounds beyond the raw lattice
    int max_events = 48;      // per-path cap on (real + pseudo) breakpoints
};

struct SkorokhodResult {
    double value = 0;      // best upper bound found
    double gap = 0;        // improvement in the last refinement round
    double time_shift = 0; // |lambda - id| part of the optimum
    double value_sup = 0;  // stopped sup part of the optimum
    double integral = 0;   // measure-weighted integral term
};

namespace detail {

struct EventList {
    std::vector<double> times;   // e_0 = 0 < e_1 < ... <= t
    std::vector<Vd> values;      // value on [e_k, e_{k+1}), last value on [e_m, t]
};

inline EventList events_of(const Path& x, double t) {
    EventList ev;
    const Path s = x.stopped(t);
    for (std::size_t k = 0; k < s.breakpoints(); ++k) {
        if (k > 0 && s.time(k) >= t - x.tol()) break;
        ev.times.push_back(s.time(k));
        ev.values.push_back(s.value(k));
    }
    ev.times.push_back(t);
    ev.values.push_back(s.at(t));
    return ev;
}

inline void insert_midpoints(EventList& ev, int cap) {
    EventList out;
    for (std::size_t k = 0; k + 1 < ev.times.size(); ++k) {
        out.times.push_back(ev.times[k]);
        out.values.push_back(ev.values[k]);
        if (static_cast<int>(ev.times.size() + out.times.size()) < cap) {
            out.times.push_back(0.5 * (ev.times[k] + ev.times[k + 1]));
            out.values.push_back(ev.values[k]);  // pseudo event: no value change
        }
    }
    out.times.push_back(ev.times.back());
    out.values.push_back(ev.values.back());
    ev = std::move(out);
}

// Largest value discrepancy over one span [sa, sb] -> [ra, rb] under the
// linear time change, walking unmatched interior events in merged order.
inline double span_cost(const EventList& X, std::size_t ia, std::size_t ib, const EventList& P,
                        std::size_t ja, std::size_t jb) {
    const double sa = X.times[ia], sb = X.times[ib];
    const double ra = P.times[ja], rb = P.times[jb];
    const double scale = (rb - ra) / (sb - sa);
    double cost = (X.values[ia] - P.values[ja]).norm();
    std::size_t i = ia + 1, j = ja + 1;  // next interior events
    std::size_t cx = ia, cp = ja;        // current segment values
    while (i < ib || j < jb) {
        // position of the next xp event pulled back through the time change
        const double si = i < ib ? X.times[i] : std::numeric_limits<double>::infinity();
        const double rj = j < jb ? sa + (P.times[j] - ra) / scale : std::numeric_limits<double>::infinity();
        if (si <= rj) cx = i++;
        if (rj <= si) cp = j++;
        cost = std::max(cost, (X.values[cx] - P.values[cp]).norm());
    }
    return cost;
}

// min over anchored alignments of the value sup, given a cap on anchor time
// shifts. Returns +inf when no alignment respects the cap (cannot happen:
// skipping all interior anchors is always allowed).
inline double best_value_sup(const EventList& X, const EventList& P, double shift_cap) {
    const std::size_t m = X.times.size() - 1;
    const std::size_t q = P.times.size() - 1;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> f(m + 1, std::vector<double>(q + 1, inf));
    f[0][0] = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= q; ++j) {
            const bool final_anchor = (i == m && j == q);
            if (!final_anchor && std::abs(X.times[i] - P.times[j]) > shift_cap + 1e-15) continue;
            double best = inf;
            for (std::size_t a = 0; a < i; ++a)
                for (std::size_t b = 0; b < j; ++b) {
                    if (f[a][b] == inf) continue;
                    const double c = std::max(f[a][b], span_cost(X, a, i, P, b, j));
                    best = std::min(best, c);
                }
            f[i][j] = best;
        }
    }
    return std::max(f[m][q], (X.values[m] - P.values[q]).norm());
}

inline SkorokhodResult skorokhod_once(const EventList& X, const EventList& P) {
    // candidate shift caps: 0 plus all pairwise interior breakpoint offsets
    std::vector<double> caps{0.0};
    for (std::size_t i = 1; i + 1 < X.times.size(); ++i)
        for (std::size_t j = 1; j + 1 < P.times.size(); ++j)
            caps.push_back(std::abs(X.times[i] - P.times[j]));
    std::sort(caps.begin(), caps.end());
    caps.erase(std::unique(caps.begin(), caps.end()), caps.end());
    SkorokhodResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (double cap : caps) {
        if (cap >= best.value) break;  // the shift term alone is already worse
        const double vs = best_value_sup(X, P, cap);
        if (cap + vs < best.value) {
            best.value = cap + vs;
            best.time_shift = cap;
            best.value_sup = vs;
        }
    }
    return best;
}

}  // namespace detail

// Jump-aware distance for step paths up to time t. `mu` weights the integral
// penalty; pass AtomicMeasure::zero to drop it.
inline SkorokhodResult dist_skorokhod(const Path& x, const Path& xp, double t, const AtomicMeasure& mu,
                                      const SkorokhodOptions& opts = {}) {
    if (x.mode() != PathMode::PC || xp.mode() != PathMode::PC)
        throw std::invalid_argument("dist_skorokhod: defined for PC (cadlag step) paths");
    if (x.dim() != xp.dim()) throw std::invalid_argument("dist_skorokhod: path dims differ");
    t = std::min(std::max(t, 0.0), std::min(x.horizon(), xp.horizon()));

    if (t <= x.tol()) {
        SkorokhodResult r0;
        r0.value_sup = (x.at(0.0) - xp.at(0.0)).norm();
        r0.integral = mu.atom_at(0.0) * r0.value_sup;
        r0.value = r0.value_sup + r0.integral;
        return r0;
    }

    detail::EventList X = detail::events_of(x, t);
    detail::EventList P = detail::events_of(xp, t);
    SkorokhodResult r = detail::skorokhod_once(X, P);
    double prev = r.value;
    for (int round = 0; round < opts.refine_rounds; ++round) {
        detail::insert_midpoints(X, opts.max_events);
        detail::insert_midpoints(P, opts.max_events);
        const SkorokhodResult rr = detail::skorokhod_once(X, P);
        prev = r.value;
        if (rr.value < r.value) r = rr;
    }
    r.gap = std::max(prev - r.value, 0.0);

    if (!mu.is_zero()) {
        // the gap of two step paths is constant between merged breakpoints, so
        // the density part integrates exactly piece by piece; atoms weight the
        // right-continuous gap on closed [0, t]
        const auto gap = [&](double s) { return (x.at(s) - xp.at(s)).norm(); };
        const double tol = x.tol();
        std::vector<double> cuts{0.0, t};
        for (std::size_t k = 0; k < x.breakpoints(); ++k)
            if (x.time(k) > tol && x.time(k) < t - tol) cuts.push_back(x.time(k));
        for (std::size_t k = 0; k < xp.breakpoints(); ++k)
            if (xp.time(k) > tol && xp.time(k) < t - tol) cuts.push_back(xp.time(k));
        std::sort(cuts.begin(), cuts.end());
        double m = 0;
        for (std::size_t i = 1; i < cuts.size(); ++i)
            if (cuts[i] - cuts[i - 1] > tol)
                m += mu.density_mass(cuts[i - 1], cuts[i]) * gap(0.5 * (cuts[i - 1] + cuts[i]));
        for (const auto& [tau, wt] : mu.atoms())
            if (tau <= t + tol) m += wt * gap(std::min(tau, t));
        r.integral = m;
        r.value += r.integral;
    }
    return r;
}

}  // namespace ppde
