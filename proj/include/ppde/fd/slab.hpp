#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/generator.hpp"
#include "ppde/math.hpp"

namespace ppde {

struct Mesh1D {
    double lo = -1, hi = 1;
    int nodes = 65;

    Mesh1D() = default;
    Mesh1D(double a, double b, int n) : lo(a), hi(b), nodes(n) {
        if (!(b > a) || n < 3) throw std::invalid_argument("mesh: need hi > lo and at least 3 nodes");
    }
    double dx() const { return (hi - lo) / (nodes - 1); }
    double x(int k) const { return lo + dx() * k; }

    // linear interpolation with constant extension beyond the ends
    double interp(const std::vector<double>& v, double xq) const {
        if (xq <= lo) return v.front();
        if (xq >= hi) return v.back();
        const double r = (xq - lo) / dx();
        const int k = std::min(static_cast<int>(r), nodes - 2);
        const double w = r - k;
        return (1.0 - w) * v[k] + w * v[k + 1];
    }
};

// value function samples on a mesh at a fixed time; dim 2 stores row-major
// with x fastest
struct ValueField {
    int dim = 1;
    double time = 0;
    Mesh1D mx, my;
    std::vector<double> v;

    double at(int ix, int iy = 0) const { return v[static_cast<std::size_t>(iy) * mx.nodes + ix]; }
    double& at(int ix, int iy = 0) { return v[static_cast<std::size_t>(iy) * mx.nodes + ix]; }

    double interp(double x, double y = 0) const {
        if (dim == 1) return mx.interp(v, x);
        const auto clamp01 = [](double r, int n) {
            return std::min(std::max(r, 0.0), static_cast<double>(n - 1));
        };
        const double rx = clamp01((x - mx.lo) / mx.dx(), mx.nodes);
        const double ry = clamp01((y - my.lo) / my.dx(), my.nodes);
        const int kx = std::min(static_cast<int>(rx), mx.nodes - 2);
        const int ky = std::min(static_cast<int>(ry), my.nodes - 2);
        const double wx = rx - kx, wy = ry - ky;
        return (1 - wx) * (1 - wy) * at(kx, ky) + wx * (1 - wy) * at(kx + 1, ky) +
               (1 - wx) * wy * at(kx, ky + 1) + wx * wy * at(kx + 1, ky + 1);
    }
};

inline void write_value_field(std::ostream& out, const ValueField& f) {
    out << "ppde-field 1\n";
    out << "dim " << f.dim << "\n";
    out << "time " << fmt_g17(f.time) << "\n";
    out << "xmesh " << fmt_g17(f.mx.lo) << ' ' << fmt_g17(f.mx.hi) << ' ' << f.mx.nodes << "\n";
    if (f.dim == 2) out << "ymesh " << fmt_g17(f.my.lo) << ' ' << fmt_g17(f.my.hi) << ' ' << f.my.nodes << "\n";
    out << "values\n";
    for (double x : f.v) out << fmt_g17(x) << "\n";
}

struct Fd1Options {
    double cfl = 0.9;
    int min_steps = 1;       // floor on time steps (time accuracy for mild operators)
    bool implicit = false;
    int implicit_steps = 0;  // 0: one step per dx of slab span
    int howard_max_sweeps = 50;
    double howard_tol = 1e-10;
};

namespace detail {

// growth rate of the explicit update at one node; the step must keep
// 1 - dt * rate nonnegative for monotonicity
inline double explicit_rate_1d(const OpCoef& o, double dx) {
    return o.a.at(0, 0) / (dx * dx) + std::abs(o.b[0]) / dx - std::min(o.c, 0.0);
}

inline std::vector<OpCoef> ops_at(const SlabProblem& sp, double s) {
    const auto ms = sp.models(s);
    std::vector<OpCoef> ops;
    ops.reserve(ms.size());
    for (const auto& m : ms) ops.push_back(op_of(m));
    return ops;
}

// one explicit monotone update of the whole row at data time s
inline void explicit_sweep_1d(std::vector<double>& phi, const std::vector<OpCoef>& ops, double dx, double dt,
                              std::vector<double>& next) {
    const int n = static_cast<int>(phi.size());
    for (int k = 0; k < n; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& o : ops) {
            double l = o.c * phi[k] + o.d;
            if (k > 0 && k + 1 < n) l += 0.5 * o.a.at(0, 0) * (phi[k + 1] - 2.0 * phi[k] + phi[k - 1]) / (dx * dx);
            const double bp = std::max(o.b[0], 0.0), bm = std::max(-o.b[0], 0.0);
            if (k + 1 < n) l += bp * (phi[k + 1] - phi[k]) / dx;
            if (k > 0) l -= bm * (phi[k] - phi[k - 1]) / dx;
            best = std::max(best, l);
        }
        next[k] = phi[k] + dt * best;
    }
    phi.swap(next);
}

inline void thomas_solve(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                         std::vector<double>& rhs) {
    const int n = static_cast<int>(diag.size());
    for (int k = 1; k < n; ++k) {
        const double w = lower[k] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (int k = n - 2; k >= 0; --k) rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
}

// operator value at node k under model o (same stencil the implicit rows use)
inline double l_value_1d(const std::vector<double>& phi, int k, const OpCoef& o, double dx) {
    const int n = static_cast<int>(phi.size());
    double l = o.c * phi[k] + o.d;
    if (k > 0 && k + 1 < n) l += 0.5 * o.a.at(0, 0) * (phi[k + 1] - 2.0 * phi[k] + phi[k - 1]) / (dx * dx);
    const double bp = std::max(o.b[0], 0.0), bm = std::max(-o.b[0], 0.0);
    if (k + 1 < n) l += bp * (phi[k + 1] - phi[k]) / dx;
    if (k > 0) l -= bm * (phi[k] - phi[k - 1]) / dx;
    return l;
}

// one implicit step via policy iteration over the control list
inline void howard_step_1d(std::vector<double>& phi, const std::vector<OpCoef>& ops, double dx, double dt,
                           const Fd1Options& opt) {
    const int n = static_cast<int>(phi.size());
    const int m = static_cast<int>(ops.size());
    std::vector<int> policy(n, 0);
    for (int k = 0; k < n; ++k) {
        double best = l_value_1d(phi, k, ops[0], dx);
        for (int j = 1; j < m; ++j) {
            const double l = l_value_1d(phi, k, ops[j], dx);
            if (l > best) {
                best = l;
                policy[k] = j;
            }
        }
    }
    std::vector<double> lower(n), diag(n), upper(n), rhs(n), sol(n);
    std::vector<double> prev = phi;
    for (int sweep = 0; sweep < opt.howard_max_sweeps; ++sweep) {
        for (int k = 0; k < n; ++k) {
            const OpCoef& o = ops[policy[k]];
            const bool has_lo = k > 0, has_hi = k + 1 < n;
            const double axx = (has_lo && has_hi) ? 0.5 * o.a.at(0, 0) / (dx * dx) : 0.0;
            const double bp = has_hi ? std::max(o.b[0], 0.0) / dx : 0.0;
            const double bm = has_lo ? std::max(-o.b[0], 0.0) / dx : 0.0;
            lower[k] = -dt * (axx + bm);
            upper[k] = -dt * (axx + bp);
            diag[k] = 1.0 + dt * (2.0 * axx + bp + bm - o.c);
            rhs[k] = prev[k] + dt * o.d;
        }
        sol = rhs;
        {
            std::vector<double> lo = lower, di = diag, up = upper;
            thomas_solve(lo, di, up, sol);
        }
        bool changed = false;
        for (int k = 0; k < n; ++k) {
            int arg = policy[k];
            double best = l_value_1d(sol, k, ops[arg], dx);
            for (int j = 0; j < m; ++j) {
                if (j == arg) continue;
                const double l = l_value_1d(sol, k, ops[j], dx);
                if (l > best + 1e-14) {
                    best = l;
                    arg = j;
                }
            }
            if (arg != policy[k]) {
                policy[k] = arg;
                changed = true;
            }
        }
        double delta = 0;
        for (int k = 0; k < n; ++k) delta = std::max(delta, std::abs(sol[k] - phi[k]));
        phi = sol;
        if (!changed || delta <= opt.howard_tol) break;
    }
}

}  // namespace detail

// backward solve of -d phi/ds - sup_m L_m phi = 0 over [to_time, from_time]
// on the mesh, starting from the given row at from_time; returns the row at
// to_time. Affine control models only; general drivers need the sampling
// backend.
inline std::vector<double> fd_solve_slab_1d(const SlabProblem& sp, const Mesh1D& mesh, std::vector<double> terminal,
                                            double from_time, double to_time, const Fd1Options& opt = {}) {
    if (sp.has_driver())
        throw std::invalid_argument("fd: general drivers are not representable by affine control models");
    if (static_cast<int>(terminal.size()) != mesh.nodes)
        throw std::invalid_argument("fd: terminal row size does not match the mesh");
    const double span = from_time - to_time;
    if (span <= 0) return terminal;
    const double dx = mesh.dx();

    int steps;
    if (opt.implicit) {
        steps = opt.implicit_steps > 0 ? opt.implicit_steps : std::max(4, static_cast<int>(std::ceil(span / dx)));
    } else {
        double rate = 1e-12;
        for (int q = 0; q <= 64; ++q) {
            const double s = to_time + span * q / 64.0;
            for (const auto& o : detail::ops_at(sp, s)) rate = std::max(rate, detail::explicit_rate_1d(o, dx));
        }
        steps = std::max(1, static_cast<int>(std::ceil(span * rate / opt.cfl)));
    }
    steps = std::max(steps, opt.min_steps);
    const double dt = span / steps;

    std::vector<double> phi = std::move(terminal);
    std::vector<double> scratch(phi.size());
    for (int q = steps - 1; q >= 0; --q) {
        const double s_hi = to_time + dt * (q + 1);
        const auto ops = detail::ops_at(sp, s_hi);
        if (!opt.implicit) {
            for (const auto& o : ops)
                if (dt * detail::explicit_rate_1d(o, dx) > 1.0 + 1e-9)
                    throw std::runtime_error("fd: step violates the monotonicity bound");
            detail::explicit_sweep_1d(phi, ops, dx, dt, scratch);
        } else {
            detail::howard_step_1d(phi, ops, dx, dt, opt);
        }
    }
    return phi;
}

// worst ordering violation at to_time for two ordered terminal rows
// (lower <= upper nodewise); positive values break the comparison principle
inline double fd_comparison_gap(const SlabProblem& sp, const Mesh1D& mesh, const std::vector<double>& lower,
                                const std::vector<double>& upper, double from_time, double to_time,
                                const Fd1Options& opt = {}) {
    for (std::size_t k = 0; k < lower.size(); ++k)
        if (lower[k] > upper[k]) throw std::invalid_argument("comparison: terminal rows are not ordered");
    const auto lo = fd_solve_slab_1d(sp, mesh, lower, from_time, to_time, opt);
    const auto hi = fd_solve_slab_1d(sp, mesh, upper, from_time, to_time, opt);
    double gap = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lo.size(); ++k) gap = std::max(gap, lo[k] - hi[k]);
    return gap;
}

// ---- plane (d = 2) explicit scheme ----

namespace detail {

inline double explicit_rate_2d(const OpCoef& o, double h) {
    const double a11 = o.a.at(0, 0), a22 = o.a.at(1, 1), a12 = std::abs(o.a.at(0, 1));
    return (a11 + a22 - a12) / (h * h) + (std::abs(o.b[0]) + std::abs(o.b[1])) / h - std::min(o.c, 0.0);
}

inline void check_cross_term(const OpCoef& o) {
    const double a11 = o.a.at(0, 0), a22 = o.a.at(1, 1), a12 = std::abs(o.a.at(0, 1));
    if (a12 > std::min(a11, a22) + 1e-12)
        throw std::invalid_argument("fd: cross diffusion exceeds the monotone stencil bound");
}

}  // namespace detail

// backward solve on a square-spaced plane mesh with the seven-point monotone
// stencil; requires |a12| <= min(a11, a22)
inline ValueField fd_solve_slab_2d(const SlabProblem& sp, const Mesh1D& mx, const Mesh1D& my, ValueField terminal,
                                   double from_time, double to_time, const Fd1Options& opt = {}) {
    if (sp.has_driver())
        throw std::invalid_argument("fd: general drivers are not representable by affine control models");
    if (std::abs(mx.dx() - my.dx()) > 1e-12 * mx.dx())
        throw std::invalid_argument("fd: plane scheme needs equal mesh spacing");
    const double span = from_time - to_time;
    if (span <= 0) return terminal;
    const double h = mx.dx();
    const int nx = mx.nodes, ny = my.nodes;

    double rate = 1e-12;
    for (int q = 0; q <= 64; ++q) {
        const double s = to_time + span * q / 64.0;
        for (const auto& o : detail::ops_at(sp, s)) {
            detail::check_cross_term(o);
            rate = std::max(rate, detail::explicit_rate_2d(o, h));
        }
    }
    const int steps = std::max({1, opt.min_steps, static_cast<int>(std::ceil(span * rate / opt.cfl))});
    const double dt = span / steps;

    ValueField f = std::move(terminal);
    f.time = to_time;
    std::vector<double> next(f.v.size());
    for (int q = steps - 1; q >= 0; --q) {
        const double s_hi = to_time + dt * (q + 1);
        const auto ops = detail::ops_at(sp, s_hi);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const bool xin = i > 0 && i + 1 < nx, yin = j > 0 && j + 1 < ny;
                double best = -std::numeric_limits<double>::infinity();
                for (const auto& o : ops) {
                    const double c = f.at(i, j);
                    double l = o.c * c + o.d;
                    const double a12 = o.a.at(0, 1);
                    if (xin) l += 0.5 * (o.a.at(0, 0) - std::abs(a12)) * (f.at(i + 1, j) - 2 * c + f.at(i - 1, j)) / (h * h);
                    if (yin) l += 0.5 * (o.a.at(1, 1) - std::abs(a12)) * (f.at(i, j + 1) - 2 * c + f.at(i, j - 1)) / (h * h);
                    if (xin && yin && a12 != 0.0) {
                        if (a12 > 0)
                            l += 0.5 * a12 * (f.at(i + 1, j + 1) - 2 * c + f.at(i - 1, j - 1)) / (h * h);
                        else
                            l += 0.5 * (-a12) * (f.at(i - 1, j + 1) - 2 * c + f.at(i + 1, j - 1)) / (h * h);
                    }
                    const double bxp = std::max(o.b[0], 0.0), bxm = std::max(-o.b[0], 0.0);
                    const double byp = std::max(o.b[1], 0.0), bym = std::max(-o.b[1], 0.0);
                    if (i + 1 < nx) l += bxp * (f.at(i + 1, j) - c) / h;
                    if (i > 0) l -= bxm * (c - f.at(i - 1, j)) / h;
                    if (j + 1 < ny) l += byp * (f.at(i, j + 1) - c) / h;
                    if (j > 0) l -= bym * (c - f.at(i, j - 1)) / h;
                    best = std::max(best, l);
                }
                next[static_cast<std::size_t>(j) * nx + i] = f.at(i, j) + dt * best;
            }
        }
        f.v.swap(next);
    }
    return f;
}

}  // namespace ppde
