#pragma once

// Finitely-parameterized paths on [0, T]: breakpoint times with d-dimensional
// values, read either as a cadlag step function (PC) or as the piecewise
// linear interpolant (PL). Both modes extend the last value up to T, so a
// breakpoint list ending before T still defines a path on all of [0, T].

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/math.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

enum class PathMode { PC, PL };

inline const char* to_string(PathMode m) { return m == PathMode::PC ? "pc" : "pl"; }

class Path {
  public:
    Path(PathMode mode, double horizon, int dim, std::vector<double> times, std::vector<double> values)
        : mode_(mode), horizon_(horizon), dim_(dim), times_(std::move(times)), vals_(std::move(values)) {
        if (!(horizon > 0)) throw std::invalid_argument("Path: horizon must be > 0");
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Path: dim must be in [1,3]");
        if (times_.empty()) throw std::invalid_argument("Path: need at least one breakpoint");
        if (std::abs(times_.front()) > tol()) throw std::invalid_argument("Path: first breakpoint must be 0");
        if (times_.back() > horizon_ + tol()) throw std::invalid_argument("Path: breakpoint beyond horizon");
        times_.front() = 0.0;
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1] + tol()))
                throw std::invalid_argument("Path: breakpoints must strictly increase");
        if (vals_.size() != times_.size() * static_cast<std::size_t>(dim))
            throw std::invalid_argument("Path: value count does not match breakpoints * dim");
    }

    static Path constant(PathMode mode, double horizon, const Vd& v) {
        std::vector<double> vals(static_cast<std::size_t>(v.n));
        for (int i = 0; i < v.n; ++i) vals[static_cast<std::size_t>(i)] = v[i];
        return Path(mode, horizon, v.n, {0.0}, std::move(vals));
    }

    static Path constant1(PathMode mode, double horizon, double v) {
        return constant(mode, horizon, Vd::scalar(v));
    }

    PathMode mode() const { return mode_; }
    double horizon() const { return horizon_; }
    int dim() const { return dim_; }
    double tol() const { return 1e-12 * horizon_; }
    std::size_t breakpoints() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    double time(std::size_t k) const { return times_[k]; }

    Vd value(std::size_t k) const {
        Vd v(dim_);
        for (int i = 0; i < dim_; ++i)
            v[i] = vals_[k * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i)];
        return v;
    }

    Vd at(double s) const {
        s = std::min(std::max(s, 0.0), horizon_);
        const std::size_t k = segment(s);
        if (mode_ == PathMode::PC) return value(k);
        if (k + 1 == times_.size() || s <= times_[k] + tol()) return value(k);
        const double t0 = times_[k], t1 = times_[k + 1];
        const double w = (s - t0) / (t1 - t0);
        const Vd a = value(k), b = value(k + 1);
        Vd r(dim_);
        for (int i = 0; i < dim_; ++i) r[i] = (1.0 - w) * a[i] + w * b[i];
        return r;
    }

    double at1(double s) const { return at(s)[0]; }

    // x_{t ^ .}: the path stopped at t (constant equal to x_t from t on).
    Path stopped(double t) const {
        t = std::min(std::max(t, 0.0), horizon_);
        std::vector<double> ts, vs;
        for (std::size_t k = 0; k < times_.size() && times_[k] < t - tol(); ++k) {
            ts.push_back(times_[k]);
            append(vs, value(k));
        }
        ts.push_back(ts.empty() ? 0.0 : t);
        append(vs, at(t));
        return Path(mode_, horizon_, dim_, std::move(ts), std::move(vs));
    }

    // Breakpoint index k with times_[k] <= s < times_[k+1] (last index if s is
    // past the final breakpoint). Times within tol of a breakpoint snap to it.
    std::size_t segment(double s) const {
        if (s <= times_.front() + tol()) return 0;
        std::size_t lo = 0, hi = times_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (times_[mid] <= s + tol())
                lo = mid;
            else
                hi = mid;
        }
        return times_[hi] <= s + tol() ? hi : lo;
    }

    static void append(std::vector<double>& vs, const Vd& v) {
        for (int i = 0; i < v.n; ++i) vs.push_back(v[i]);
    }

  private:
    PathMode mode_;
    double horizon_;
    int dim_;
    std::vector<double> times_;
    std::vector<double> vals_;
};

// x concatenated with xp at time t: equals x before t and xp from t on. In PL
// mode a genuine mismatch x_t != xp_t is a jump the interpolant cannot carry,
// so the left limit is pinned by an extra breakpoint at t - 1e-9 T; sampling
// and metric evaluations never look inside that sliver.
inline Path concat(const Path& x, double t, const Path& xp) {
    if (x.mode() != xp.mode()) throw std::invalid_argument("concat: path modes differ");
    if (x.dim() != xp.dim()) throw std::invalid_argument("concat: path dims differ");
    if (std::abs(x.horizon() - xp.horizon()) > x.tol()) throw std::invalid_argument("concat: horizons differ");
    const double tol = x.tol();
    t = std::min(std::max(t, 0.0), x.horizon());
    std::vector<double> ts;
    std::vector<double> vs;
    for (std::size_t k = 0; k < x.breakpoints() && x.time(k) < t - tol; ++k) {
        ts.push_back(x.time(k));
        Path::append(vs, x.value(k));
    }
    if (x.mode() == PathMode::PL && !ts.empty()) {
        const double eps = 1e-9 * x.horizon();
        const Vd left = x.at(t - eps);
        const Vd right = xp.at(t);
        if ((left - right).norm() > tol && t - eps > ts.back() + tol) {
            ts.push_back(t - eps);
            Path::append(vs, left);
        }
    }
    ts.push_back(ts.empty() ? 0.0 : t);
    Path::append(vs, xp.at(t));
    for (std::size_t k = 0; k < xp.breakpoints(); ++k) {
        if (xp.time(k) > t + tol) {
            ts.push_back(xp.time(k));
            Path::append(vs, xp.value(k));
        }
    }
    return Path(x.mode(), x.horizon(), x.dim(), std::move(ts), std::move(vs));
}

// Pi^n_t[x]: the grid projection of x at time t. PC mode freezes grid-point
// values on each slab up to t and holds x_t afterwards; PL mode interpolates
// the sampled values (t_0,...,t_k, t) linearly and holds x_t afterwards.
inline Path project(const TimeGrid& g, const Path& x, double t) {
    if (std::abs(g.horizon() - x.horizon()) > g.tol())
        throw std::invalid_argument("project: grid and path horizons differ");
    t = std::min(std::max(t, 0.0), g.horizon());
    std::vector<double> ts;
    std::vector<double> vs;
    for (int j = 0; j <= g.slabs() && g.t(j) < t - g.tol(); ++j) {
        ts.push_back(g.t(j));
        Path::append(vs, x.at(g.t(j)));
    }
    ts.push_back(ts.empty() ? 0.0 : t);
    Path::append(vs, x.at(t));
    return Path(x.mode(), x.horizon(), x.dim(), std::move(ts), std::move(vs));
}

// Pi^n[x] := Pi^n_T[x].
inline Path project(const TimeGrid& g, const Path& x) { return project(g, x, x.horizon()); }

}  // namespace ppde
