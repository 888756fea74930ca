// Acceptance gate: eleven end-to-end checks at pinned tolerances.
// Each case prints one [PASS]/[FAIL] line with the measured numbers.
#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ppde/approximation.hpp"
#include "ppde/builtins.hpp"
#include "ppde/dupire.hpp"
#include "ppde/evaluator.hpp"
#include "ppde/fd/lift.hpp"
#include "ppde/mc/bsde.hpp"
#include "ppde/mc/tangent.hpp"

using namespace ppde;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string strf(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

bool verdict(const char* id, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    return ok;
}

Path cpath(double v, double horizon = 1.0) { return Path::constant1(PathMode::PC, horizon, v); }

}  // namespace

TEST_CASE("acceptance 01: markovian heat solves exactly at every level", "[acceptance]") {
    // value is x^2 + (T - t); at t = 0, x == 0 every level must report 1
    const Problem p = heat(1, 1.0, 1.0, terminal_square(1.0));
    EvalOptions eo;
    eo.lift.x_nodes = 1201;  // dx = 0.01 on [-6, 6]
    eo.lift.half_width = 6.0;
    const Evaluator ev(p, Backend::Lift, eo);
    const GridSequence dy = GridSequence::dyadic(1.0);

    double max_err = 0, max_sec = 0;
    for (int level = 1; level <= 5; ++level) {
        const auto t0 = std::chrono::steady_clock::now();
        const double v = ev.value(dy.grid(level), 0.0, cpath(0.0)).value;
        max_sec = std::max(max_sec, seconds_since(t0));
        max_err = std::max(max_err, std::abs(v - 1.0));
    }
    const bool ok = max_err <= 5e-3 && max_sec < 5.0;
    REQUIRE(verdict("01 markovian heat oracle", ok,
                    strf("max |v - 1| = %.2e (tol 5e-3), slowest level %.2fs (cap 5s)", max_err, max_sec)));
}

TEST_CASE("acceptance 02: uncertain-volatility oracle, mesh against simulation", "[acceptance]") {
    // sup over sigma in {0.1, 0.2} of E[X_T^2] from X_0 = 1 is 1 + 0.04 T
    const Problem p = bsb(0.1, 0.2, 1.0, terminal_square(1.0));
    const double truth = 1.04;
    const TimeGrid g = GridSequence::dyadic(1.0).grid(2);

    EvalOptions eo;
    eo.lift.x_nodes = 801;
    eo.lift.half_width = 6.0;
    const double vfd = Evaluator(p, Backend::Lift, eo).value(g, 0.0, cpath(1.0)).value;

    McOptions mo;
    mo.paths = 20000;
    mo.blocks = 4;
    mo.steps_per_slab = 16;
    mo.seed = 12345;
    const McValue vmc = mc_value(p, g, 0.0, cpath(1.0), mo);

    const bool fd_ok = std::abs(vfd - truth) <= 1e-2;
    const bool mc_ok = std::abs(vmc.value - truth) <= 3.0 * vmc.se + 1e-2;
    const bool agree = std::abs(vfd - vmc.value) <= 3.0 * vmc.se + 1.5e-2;
    REQUIRE(verdict("02 uncertain-volatility oracle", fd_ok && mc_ok && agree,
                    strf("fd err %.2e (tol 1e-2), mc err %.2e (tol %.2e), |fd-mc| %.2e (tol %.2e)",
                         std::abs(vfd - truth), std::abs(vmc.value - truth), 3.0 * vmc.se + 1e-2,
                         std::abs(vfd - vmc.value), 3.0 * vmc.se + 1.5e-2)));
}

TEST_CASE("acceptance 03: path-dependent gaussian ladder hits the closed form", "[acceptance]") {
    // squared time-average of a unit heat path from zero: limit 1/3
    const auto t0 = std::chrono::steady_clock::now();
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0), 1));
    const Evaluator ev(p, Backend::Lift, EvalOptions{});
    const ConvergenceReport r =
        approximate_solution(ev, GridSequence::dyadic(1.0), 1, 5, 0.0, cpath(0.0));
    const double sec = seconds_since(t0);

    // the ladder's reported value at the finest level is its extrapolated limit
    const double err = std::abs(r.limit - 1.0 / 3.0);
    const bool ok = err <= 1e-2 && r.extrapolated && r.rate >= 0.25 && sec < 60.0;
    REQUIRE(verdict("03 path-dependent gaussian oracle", ok,
                    strf("|value - 1/3| = %.2e (tol 1e-2), rate %.2f (floor 0.25), %.1fs (cap 60s)",
                         err, r.rate, sec)));
}

TEST_CASE("acceptance 04: refinement limit does not depend on the grid family", "[acceptance]") {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0), 1));
    const Evaluator ev(p, Backend::Lift, EvalOptions{});
    const GridCheck gc = grid_independence(ev, GridSequence::dyadic(1.0), 7,
                                           GridSequence::triadic(1.0), 5, {{0.0, cpath(0.0), "zero"}});
    const double sec = seconds_since(t0);

    const bool ok = gc.pass && gc.max_tol <= 2e-2 && sec < 120.0;
    REQUIRE(verdict("04 grid independence", ok,
                    strf("|limit_a - limit_b| = %.2e <= tol %.2e (cap 2e-2), %.1fs (cap 120s)",
                         gc.max_discrepancy, gc.max_tol, sec)));
}

TEST_CASE("acceptance 05: ordered data keeps solutions ordered", "[acceptance]") {
    // 50 randomized pairs with f0 and terminal shifted upward; the larger
    // problem must dominate at every lattice node and every sampled query
    std::mt19937_64 rng(20260815);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const GridSequence dy = GridSequence::dyadic(1.0);
    const TimeGrid g = dy.grid(3);

    const auto shifted = [](const Problem& base, double df0, double dg) {
        Problem p = base;
        TerminalSpec ts = p.terminal;
        const auto g0 = ts.g0;
        ts.g0 = [g0, dg](double u, const Vd& xT) { return g0(u, xT) + dg; };
        p.terminal = ts;
        const auto models = p.models;
        p.models = [models, df0](double t, double I) {
            auto ms = models(t, I);
            for (auto& m : ms) m.f0 += df0;
            return ms;
        };
        return p;
    };

    long nodes = 0, queries = 0, violations = 0;
    for (int k = 0; k < 50; ++k) {
        const double sig = 0.5 + u01(rng);
        TerminalSpec term;
        switch (k % 3) {
            case 0: term = terminal_square(1.0); break;
            case 1: term = terminal_abs(1.0); break;
            default: term = terminal_integral(AtomicMeasure::lebesgue(1.0), 1); break;
        }
        const Problem base = (k % 4 == 3) ? bsb(0.3 * sig, sig, 1.0, term) : heat(1, sig, 1.0, term);
        const double f_lo = 0.3 * u01(rng), f_hi = f_lo + 0.3 * u01(rng);
        const double g_lo = 0.3 * u01(rng), g_hi = g_lo + 0.3 * u01(rng);
        const Problem hi = shifted(base, f_hi, g_hi);
        const Problem lo = shifted(base, f_lo, g_lo);

        LiftSolver sh(hi, g, LiftOptions{}), sl(lo, g, LiftOptions{});
        for (int b = 0; b <= g.slabs(); ++b) {
            const ValueField fh = sh.boundary_field(b), fl = sl.boundary_field(b);
            REQUIRE(fh.v.size() == fl.v.size());
            for (std::size_t i = 0; i < fh.v.size(); ++i, ++nodes)
                if (fh.v[i] - fl.v[i] < -1e-9) ++violations;
        }
        const Evaluator eh(hi, Backend::Lift, EvalOptions{}), el(lo, Backend::Lift, EvalOptions{});
        for (int q = 0; q < 3; ++q, ++queries) {
            const double t = 0.95 * u01(rng);
            const Path x = cpath(2.0 * u01(rng) - 1.0);
            if (eh.value(g, t, x).value - el.value(g, t, x).value < -1e-9) ++violations;
        }
    }
    REQUIRE(verdict("05 comparison monotonicity", violations == 0,
                    strf("%ld violations beyond 1e-9 over %ld nodes + %ld queries, 50 pairs",
                         violations, nodes, queries)));
}

TEST_CASE("acceptance 06: moduli ladders stay flat", "[acceptance]") {
    // space ladder on a Lipschitz integral terminal; time ladder anchored at
    // the horizon kink of the abs terminal, where the sqrt scaling is exact
    const Problem ps = heat(1, 1.0, 1.0, terminal_integral(AtomicMeasure::lebesgue(1.0), 1));
    const Evaluator evs(ps, Backend::Lift, EvalOptions{});
    const ModulusTable space = modulus_check(evs, GridSequence::dyadic(1.0).grid(4), 0.5,
                                             cpath(0.7), ModulusOptions{}).space;

    const Problem pt = heat(1, 1.0, 1.0, terminal_abs(1.0));
    const Evaluator evt(pt, Backend::Lift, EvalOptions{});
    ModulusOptions mo;
    mo.anchor_horizon = true;  // pairs (T - dt, T), increment vs sqrt(dt)
    const ModulusTable time = modulus_check(evt, GridSequence::dyadic(1.0).grid(4), 0.0,
                                            cpath(0.0), mo).time;

    const auto informative = [](const ModulusTable& t) {
        int n = 0;
        for (bool s : t.skipped) n += !s;
        return n;
    };
    const bool ok = space.band() <= 2.0 && time.band() <= 2.0 && informative(space) == 4 &&
                    informative(time) == 4;
    REQUIRE(verdict("06 moduli ladders", ok,
                    strf("space band %.3f, time band %.3f (caps 2), 4+4 informative rungs",
                         space.band(), time.band())));
}

TEST_CASE("acceptance 07: classical solutions are reproduced", "[acceptance]") {
    const GridSequence dy = GridSequence::dyadic(1.0);
    EvalOptions fine;
    fine.lift.x_nodes = 401;
    fine.lift.half_width = 6.0;
    double worst = 0;

    {  // heat with square terminal: w = x^2 + (T - t)
        const Problem p = heat(1, 1.0, 1.0, terminal_square(1.0));
        const Evaluator ev(p, Backend::Lift, fine);
        const auto w = [](double t, const Path& x) {
            const double v = x.at(t)[0];
            return v * v + (1.0 - t);
        };
        worst = std::max(worst, classical_consistency(ev, dy, 1, 3,
                                                      {{0.0, cpath(1.0), "one"}, {0.25, cpath(0.7), "c07"}}, w)
                                    .final_gap);
    }
    {  // heat with running integral: w = int_0^t x + x_t (T - t)
        const Problem p = heat(1, 1.0, 1.0, terminal_integral(AtomicMeasure::lebesgue(1.0), 1));
        const Evaluator ev(p, Backend::Lift, EvalOptions{});
        const Path ramp(PathMode::PL, 1.0, 1, {0.0, 1.0}, {0.0, 1.0});
        const auto w = [](double t, const Path& x) {
            return path_integral(AtomicMeasure::lebesgue(1.0), x, Vd::scalar(1.0), 0.0, t, true, false) +
                   x.at(t)[0] * (1.0 - t);
        };
        worst = std::max(worst, classical_consistency(ev, dy, 3, 6, {{0.5, ramp, "ramp"}}, w).final_gap);
    }
    {  // uncertain volatility with convex terminal: w = x^2 + sig_hi^2 (T - t)
        const Problem p = bsb(0.25, 0.5, 1.0, terminal_square(1.0));
        const Evaluator ev(p, Backend::Lift, fine);
        const auto w = [](double t, const Path& x) {
            const double v = x.at(t)[0];
            return v * v + 0.25 * (1.0 - t);
        };
        worst = std::max(worst, classical_consistency(ev, dy, 1, 2,
                                                      {{0.0, cpath(1.0), "one"}, {0.5, cpath(0.7), "c07"}}, w)
                                    .final_gap);
    }
    REQUIRE(verdict("07 classical consistency", worst <= 1e-2,
                    strf("max finest-level gap %.2e across 3 fixtures (tol 1e-2)", worst)));
}

TEST_CASE("acceptance 08: pathwise tangent matches bump derivatives", "[acceptance]") {
    // common random numbers across the tangent run and both bumped reruns
    const Problem p = semilinear(0.0, 0.0, 0.0, 0.4, 1.0);
    const TimeGrid g = TimeGrid::uniform(1.0, 2);
    const double t = 0.0;
    const Path x = cpath(0.4);

    McOptions mo;
    mo.paths = 25000;  // 4 blocks: 1e5 trajectories
    mo.blocks = 4;
    mo.steps_per_slab = 64;
    mo.seed = 777;

    const McValue td = tangent_value(p, g, t, x, mo);
    const McValue base = mc_value(p, g, t, x, mo);
    const auto bump_gap = [&](double delta) {
        const McValue up = mc_value(p, g, t, apxdetail::bump_from(x, t, delta), mo);
        return std::abs((up.value - base.value) / delta - td.value);
    };
    const double gap1 = bump_gap(1e-3);
    const double gap2 = bump_gap(5e-4);
    const double rel = gap1 / std::max(std::abs(td.value), 1e-6);
    const double ratio = gap2 / std::max(gap1, 1e-300);

    const bool ok = rel <= 5e-2 && ratio >= 0.35 && ratio <= 0.65;
    REQUIRE(verdict("08 tangent vs bump", ok,
                    strf("rel gap %.2e at delta 1e-3 (tol 5e-2), halving ratio %.3f (band [0.35, 0.65])",
                         rel, ratio)));
}

TEST_CASE("acceptance 09: derivative certificates, including a window atom", "[acceptance]") {
    // ladder tables stay bounded and the derivative jump across an atom of
    // the window measure recovers the atom's mass
    AtomicMeasure lam = AtomicMeasure::lebesgue(1.0);
    lam.add_atom(0.5, 0.5);
    const Problem pa = heat(1, 1.0, 1.0, terminal_integral(lam, 1));
    const Evaluator eva(pa, Backend::Lift, EvalOptions{});
    RegularityOptions ro;
    ro.atom_time = 0.5;
    ro.atom_eps = 1e-3;
    const RegularityReport atom = regularity_certificates(eva, GridSequence::dyadic(1.0).grid(6),
                                                          0.2, cpath(0.7), ro);

    const Problem pb = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0), 1));
    const Evaluator evb(pb, Backend::Lift, EvalOptions{});
    const RegularityReport plain = regularity_certificates(evb, GridSequence::dyadic(1.0).grid(3),
                                                           0.5, cpath(0.7), RegularityOptions{});

    const double jump_err = std::abs(atom.atom_jump - 0.5);
    const bool tables_ok = RegularityReport::max_ratio(atom.space) <= 2.0 &&
                           RegularityReport::max_ratio(atom.time) <= 2.0 &&
                           RegularityReport::max_ratio(plain.space) <= 2.0 &&
                           RegularityReport::max_ratio(plain.time) <= 2.0;
    const bool bounds_ok = atom.uniform_bound <= 2.0 && plain.uniform_bound <= 2.0;
    const bool atom_ok = atom.atom_checked && atom.atom_pass && jump_err <= 0.1 * 0.5;
    REQUIRE(verdict("09 derivative certificates", tables_ok && bounds_ok && atom_ok,
                    strf("atom jump %.5f vs mass 0.5 (tol 10%%), uniform %.3f/%.3f, ratio caps 2 held",
                         atom.atom_jump, atom.uniform_bound, plain.uniform_bound)));
}

TEST_CASE("acceptance 10: vanishing coefficient perturbations", "[acceptance]") {
    // sigma_k = sigma (1 + 1/k): gaps to the k = infinity value shrink at
    // first order, so consecutive gap ratios sit near 2 for halving eps
    EvalOptions eo;
    eo.lift.x_nodes = 401;
    eo.lift.half_width = 6.0;
    const auto family = [](double e) { return heat(1, 1.0 + e, 1.0, terminal_square(1.0)); };
    const StabilityReport sr =
        stability_experiment(family, {0.5, 0.25, 0.125, 0.0625}, Backend::Lift,
                             GridSequence::dyadic(1.0).grid(3), 0.0, cpath(0.0), eo);

    bool shrink = true;
    for (std::size_t i = 0; i + 1 < sr.gaps.size(); ++i)
        shrink = shrink && std::abs(sr.gaps[i + 1]) < std::abs(sr.gaps[i]);
    bool ratios_ok = sr.ratios.size() == 3;
    for (double r : sr.ratios) ratios_ok = ratios_ok && r >= 1.4 && r <= 2.6;
    REQUIRE(verdict("10 coefficient stability", shrink && ratios_ok,
                    strf("gap ratios %.3f %.3f %.3f within 30%% of 2, gaps decreasing",
                         sr.ratios.size() > 0 ? sr.ratios[0] : 0.0,
                         sr.ratios.size() > 1 ? sr.ratios[1] : 0.0,
                         sr.ratios.size() > 2 ? sr.ratios[2] : 0.0)));
}

TEST_CASE("acceptance 11: simulated trajectories close the martingale identity", "[acceptance]") {
    // 1e4 trajectories of the semilinear instance: the residual of
    // y_T + int f - int z dW against the start value has mean within noise
    // and negligible covariation with the driving noise
    const Problem p = semilinear(0.25, 0.1, 0.1, 0.1, 1.0);
    McOptions mo;
    mo.paths = 2500;  // 4 blocks: 1e4 trajectories
    mo.blocks = 4;
    mo.steps_per_slab = 4;
    mo.seed = 42;
    const ZDiagnostics z =
        z_diagnostics(p, GridSequence::dyadic(1.0).grid(2), 0.0, cpath(0.4), 0.05, mo);

    const bool mean_ok = std::abs(z.resid_mean) <= 3.0 * z.resid_se;
    const bool qc_ok = std::abs(z.qc) <= 5e-2 * z.scale;
    REQUIRE(verdict("11 martingale residual", mean_ok && qc_ok,
                    strf("mean %.2e vs 3se %.2e, |qc| %.2e vs 5%% of scale %.2e",
                         std::abs(z.resid_mean), 3.0 * z.resid_se, std::abs(z.qc), 5e-2 * z.scale)));
}
