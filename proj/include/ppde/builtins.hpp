#pragma once

#include <cmath>

#include "ppde/generator.hpp"

namespace ppde {

inline Vd axis_dir(int dim, int axis) {
    Vd d(dim);
    d[axis] = 1.0;
    return d;
}

// ---- terminal functionals ----

inline TerminalSpec terminal_coordinate(double horizon, int dim = 1, int axis = 0) {
    TerminalSpec t;
    t.lam = AtomicMeasure::zero(horizon);
    t.dir = axis_dir(dim, axis);
    const int ax = axis;
    t.g0 = [ax](double, const Vd& xT) { return xT[ax]; };
    t.dg0_du = [](double, const Vd&) { return 0.0; };
    t.dg0_dxT = [dim, ax](double, const Vd&) { return axis_dir(dim, ax); };
    t.lip = 1.0;
    return t;
}

inline TerminalSpec terminal_abs(double horizon, int dim = 1, int axis = 0) {
    TerminalSpec t;
    t.lam = AtomicMeasure::zero(horizon);
    t.dir = axis_dir(dim, axis);
    const int ax = axis;
    t.g0 = [ax](double, const Vd& xT) { return std::abs(xT[ax]); };
    t.lip = 1.0;
    return t;
}

inline TerminalSpec terminal_square(double horizon, int dim = 1, int axis = 0) {
    TerminalSpec t;
    t.lam = AtomicMeasure::zero(horizon);
    t.dir = axis_dir(dim, axis);
    const int ax = axis;
    t.g0 = [ax](double, const Vd& xT) { return xT[ax] * xT[ax]; };
    t.dg0_du = [](double, const Vd&) { return 0.0; };
    t.dg0_dxT = [dim, ax](double, const Vd& xT) {
        Vd d(dim);
        d[ax] = 2.0 * xT[ax];
        return d;
    };
    t.lip = 8.0;
    return t;
}

inline TerminalSpec terminal_integral(AtomicMeasure lam, int dim = 1) {
    TerminalSpec t;
    t.lam = std::move(lam);
    t.dir = axis_dir(dim, 0);
    t.g0 = [](double u, const Vd&) { return u; };
    t.dg0_du = [](double, const Vd&) { return 1.0; };
    t.dg0_dxT = [dim](double, const Vd&) { return Vd(dim); };
    t.lip = 1.0;
    return t;
}

inline TerminalSpec terminal_integral_square(AtomicMeasure lam, int dim = 1) {
    TerminalSpec t = terminal_integral(std::move(lam), dim);
    t.g0 = [](double u, const Vd&) { return u * u; };
    t.dg0_du = [](double u, const Vd&) { return 2.0 * u; };
    t.lip = 8.0;
    return t;
}

inline TerminalSpec terminal_sin_integral(AtomicMeasure lam, int dim = 1) {
    TerminalSpec t = terminal_integral(std::move(lam), dim);
    t.g0 = [](double u, const Vd&) { return std::sin(u); };
    t.dg0_du = [](double u, const Vd&) { return std::cos(u); };
    t.lip = 1.0;
    return t;
}

// smooth two-coordinate endpoint functional for plane problems
inline TerminalSpec terminal_smooth_plane(double horizon) {
    TerminalSpec t;
    t.lam = AtomicMeasure::zero(horizon);
    t.dir = axis_dir(2, 0);
    t.g0 = [](double, const Vd& xT) { return std::sin(xT[0]) + std::cos(xT[1]); };
    t.dg0_du = [](double, const Vd&) { return 0.0; };
    t.dg0_dxT = [](double, const Vd& xT) {
        Vd d(2);
        d[0] = std::cos(xT[0]);
        d[1] = -std::sin(xT[1]);
        return d;
    };
    t.lip = 1.5;
    return t;
}

// ---- problem instances ----

// driftless constant-diffusion dynamics with a zero driver
inline Problem heat(int dim, double sigma, double horizon, TerminalSpec term) {
    Problem p;
    p.name = "heat";
    p.dim = dim;
    p.horizon = horizon;
    p.x0 = Vd(dim);
    p.lambda = AtomicMeasure::zero(horizon);
    p.summary_dir = axis_dir(dim, 0);
    p.terminal = std::move(term);
    ControlModel m = ControlModel::make(dim);
    for (int i = 0; i < dim; ++i) m.sigma.set(i, i, sigma);
    p.models = [m](double, double) { return std::vector<ControlModel>{m}; };
    return p;
}

inline Problem heat1(double sigma = 1.0, double horizon = 1.0) {
    return heat(1, sigma, horizon, terminal_coordinate(horizon));
}

// uncertain-volatility operator: sup over two diffusion levels
inline Problem bsb(double sig_lo, double sig_hi, double horizon, TerminalSpec term) {
    if (sig_lo > sig_hi) std::swap(sig_lo, sig_hi);
    Problem p;
    p.name = "bsb";
    p.horizon = horizon;
    p.x0 = Vd::scalar(1.0);
    p.lambda = AtomicMeasure::zero(horizon);
    p.terminal = std::move(term);
    ControlModel lo = ControlModel::make(1), hi = ControlModel::make(1);
    lo.sigma.set(0, 0, sig_lo);
    hi.sigma.set(0, 0, sig_hi);
    p.models = [lo, hi](double, double) { return std::vector<ControlModel>{lo, hi}; };
    return p;
}

// unit diffusion with a drift picked adversarially from {-bound, +bound}
// through the driver's z-slot
inline Problem drift_control(double bound, double horizon, TerminalSpec term) {
    Problem p;
    p.name = "driftctl";
    p.horizon = horizon;
    p.x0 = Vd::scalar(0.0);
    p.lambda = AtomicMeasure::zero(horizon);
    p.terminal = std::move(term);
    ControlModel up = ControlModel::make(1), dn = ControlModel::make(1);
    up.sigma.set(0, 0, 1.0);
    dn.sigma.set(0, 0, 1.0);
    up.fz[0] = bound;
    dn.fz[0] = -bound;
    p.models = [up, dn](double, double) { return std::vector<ControlModel>{up, dn}; };
    return p;
}

// running-average feedback drift with an affine driver that also reads the
// running average; terminal sin of the path integral
inline Problem semilinear(double kappa, double c1, double c2, double c3, double horizon) {
    Problem p;
    p.name = "semilinear";
    p.horizon = horizon;
    p.x0 = Vd::scalar(0.0);
    p.lambda = AtomicMeasure::lebesgue(horizon);
    p.coeffs_use_summary = kappa != 0.0 || c3 != 0.0;
    p.lip_coef = std::max(std::abs(kappa), std::abs(c3));
    p.terminal = terminal_sin_integral(AtomicMeasure::lebesgue(horizon));
    p.models = [kappa, c1, c2, c3](double, double I) {
        ControlModel m = ControlModel::make(1);
        m.mu[0] = kappa * I;
        m.sigma.set(0, 0, 1.0);
        m.f0 = c3 * I;
        m.fy = c1;
        m.fz[0] = c2;
        return std::vector<ControlModel>{m};
    };
    return p;
}

// linear problem with bounded summary-fed coefficient maps
inline Problem pathdep_linear(double horizon, AtomicMeasure lam) {
    Problem p;
    p.name = "pathdep";
    p.horizon = horizon;
    p.x0 = Vd::scalar(0.0);
    p.lambda = lam;
    p.coeffs_use_summary = true;
    p.lip_coef = 0.5;
    p.terminal = terminal_integral(std::move(lam));
    p.models = [](double, double I) {
        const double s = std::tanh(I);
        ControlModel m = ControlModel::make(1);
        m.mu[0] = 0.5 * s;
        m.sigma.set(0, 0, 1.0 + 0.25 * s);
        m.f0 = 0.25 * s;
        m.fy = 0.2 * s;
        m.fz[0] = 0.1;
        return std::vector<ControlModel>{m};
    };
    return p;
}

}  // namespace ppde
