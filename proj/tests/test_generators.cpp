#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ppde/builtins.hpp"
#include "ppde/generator.hpp"

using namespace ppde;

namespace {

FrozenKey key1(const TimeGrid& g, std::size_t slab, std::vector<double> vals) {
    std::vector<Vd> v;
    for (double x : vals) v.push_back(Vd::scalar(x));
    return FrozenKey(g, slab, std::move(v));
}

}  // namespace

TEST_CASE("operator coefficients fold the driver through the diffusion") {
    ControlModel m = ControlModel::make(1);
    m.mu[0] = 1.0;
    m.sigma.set(0, 0, 2.0);
    m.f0 = 0.3;
    m.fy = -0.5;
    m.fz[0] = 0.3;
    const OpCoef o = op_of(m);
    CHECK(o.a.at(0, 0) == Catch::Approx(4.0));
    CHECK(o.b[0] == Catch::Approx(1.0 + 2.0 * 0.3));
    CHECK(o.c == Catch::Approx(-0.5));
    CHECK(o.d == Catch::Approx(0.3));

    SECTION("plane diffusion squares as a matrix") {
        ControlModel q = ControlModel::make(2);
        q.sigma.set(0, 0, 1.0);
        q.sigma.set(1, 1, 2.0);
        q.sigma.set(0, 1, 0.5);
        const Sym a = op_of(q).a;
        CHECK(a.at(0, 0) == Catch::Approx(1.25));
        CHECK(a.at(0, 1) == Catch::Approx(1.5));
        CHECK(a.at(1, 1) == Catch::Approx(4.25));
    }
}

TEST_CASE("frozen summary commits history and charges the entry value") {
    const TimeGrid g({0.0, 0.5, 1.0});
    const Problem p = semilinear(1.0, 0.0, 0.0, 1.0, 1.0);

    SECTION("running integral of the frozen step path") {
        const FrozenKey k = key1(g, 1, {0.0, 1.0});
        const SlabProblem s = freeze(p, k);
        CHECK(s.t0 == 0.5);
        CHECK(s.t1 == 1.0);
        // history contributes 0 * leb[0,0.5) = 0; entry value 1 charges [0.5, s]
        CHECK(s.models(0.5)[0].mu[0] == Catch::Approx(0.0).margin(1e-14));
        CHECK(s.models(0.75)[0].mu[0] == Catch::Approx(0.25));
        CHECK(s.models(1.0)[0].mu[0] == Catch::Approx(0.5));
        CHECK(s.models(1.0)[0].f0 == Catch::Approx(0.5));
    }

    SECTION("nonzero history value shifts the committed part") {
        const FrozenKey k = key1(g, 1, {2.0, 1.0});
        const SlabProblem s = freeze(p, k);
        // history: 2 on [0, 0.5) -> 1.0; then 1 charges [0.5, s]
        CHECK(s.models(1.0)[0].mu[0] == Catch::Approx(1.5));
    }

    SECTION("an atom at the entry node is charged at the entry value") {
        Problem pa = p;
        AtomicMeasure lam = AtomicMeasure::lebesgue(1.0);
        lam.add_atom(0.5, 0.5);
        pa.lambda = lam;
        const FrozenKey k = key1(g, 1, {0.0, 1.0});
        const SlabProblem s = freeze(pa, k);
        CHECK(s.models(0.5)[0].mu[0] == Catch::Approx(0.5));
        CHECK(s.models(1.0)[0].mu[0] == Catch::Approx(1.0));
    }

    SECTION("piecewise-linear mode interpolates the committed history") {
        Problem pl = p;
        pl.mode = PathMode::PL;
        const FrozenKey k = key1(g, 1, {0.0, 1.0});
        const SlabProblem s = freeze(pl, k);
        // history ramp 0 -> 1 over [0, 0.5): integral 0.25
        CHECK(s.models(1.0)[0].mu[0] == Catch::Approx(0.25 + 0.5));
    }

    SECTION("terminal keys cannot be frozen into a slab") {
        CHECK_THROWS(freeze(p, key1(g, 2, {0.0, 1.0, 2.0})));
    }
}

TEST_CASE("path-free problems freeze to constant coefficients") {
    const Problem p = heat1(0.7, 2.0);
    const TimeGrid g({0.0, 1.0, 2.0});
    const SlabProblem s = freeze(p, key1(g, 0, {0.0}));
    CHECK(s.models(0.3)[0].sigma.at(0, 0) == 0.7);
    CHECK(s.models(0.9)[0].sigma.at(0, 0) == 0.7);
    CHECK_FALSE(s.has_driver());
}

TEST_CASE("terminal functionals on keys and paths") {
    const TimeGrid g({0.0, 0.5, 1.0});

    SECTION("hat weights give the trapezoid value") {
        const TerminalSpec t = terminal_integral(AtomicMeasure::lebesgue(1.0));
        std::vector<Vd> vals{Vd::scalar(1.0), Vd::scalar(2.0), Vd::scalar(4.0)};
        CHECK(t.on_key(g, vals, PathMode::PL) == Catch::Approx(2.25));
        // step weights: [0,0.5) at 1, [0.5,1) at 2, no terminal atom
        CHECK(t.on_key(g, vals, PathMode::PC) == Catch::Approx(1.5));
    }

    SECTION("key evaluation matches evaluating g on the key's path") {
        const TerminalSpec t = terminal_integral_square(AtomicMeasure::lebesgue(1.0));
        const FrozenKey k = key1(g, 2, {1.0, 2.0, 4.0});
        const double on_k = t.on_key(g, k.values, PathMode::PC);
        const double on_p = t.on_path(k.to_path(PathMode::PC, 1.0));
        CHECK(on_k == Catch::Approx(on_p).margin(1e-12));
        CHECK(on_k == Catch::Approx(2.25));  // (0.5 + 1.0)^2
    }

    SECTION("terminal atom charges the endpoint node") {
        AtomicMeasure lam = AtomicMeasure::zero(1.0);
        lam.add_atom(1.0, 1.0);
        const TerminalSpec t = terminal_integral(lam);
        std::vector<Vd> vals{Vd::scalar(1.0), Vd::scalar(2.0), Vd::scalar(4.0)};
        CHECK(t.on_key(g, vals, PathMode::PC) == Catch::Approx(4.0));
        CHECK(t.on_key(g, vals, PathMode::PL) == Catch::Approx(4.0));
    }

    SECTION("endpoint terminals ignore the summary") {
        const TerminalSpec t = terminal_square(1.0);
        std::vector<Vd> vals{Vd::scalar(1.0), Vd::scalar(2.0), Vd::scalar(-3.0)};
        CHECK(t.on_key(g, vals, PathMode::PC) == Catch::Approx(9.0));
    }
}

TEST_CASE("path integrals against a measure") {
    const Path x(PathMode::PC, 1.0, 1, {0.0, 0.5}, {0.0, 1.0});
    AtomicMeasure lam = AtomicMeasure::lebesgue(1.0);
    lam.add_atom(0.5, 0.5);
    CHECK(path_integral(lam, x, Vd::scalar(1.0), 0.0, 1.0) == Catch::Approx(1.0));
    // half-open [0, 0.5): the atom and the second step are excluded
    CHECK(path_integral(lam, x, Vd::scalar(1.0), 0.0, 0.5, true, false) == Catch::Approx(0.0).margin(1e-14));

    const Path ramp(PathMode::PL, 1.0, 1, {0.0, 1.0}, {0.0, 1.0});
    CHECK(path_integral(AtomicMeasure::lebesgue(1.0), ramp, Vd::scalar(1.0), 0.0, 1.0) ==
          Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("builtin instances expose their structure") {
    SECTION("uncertain volatility carries two diffusion levels") {
        const Problem p = bsb(0.1, 0.2, 1.0, terminal_square(1.0));
        const auto ms = p.models_at(0.0, 0.0);
        REQUIRE(ms.size() == 2);
        CHECK(op_of(ms[0]).a.at(0, 0) == Catch::Approx(0.01));
        CHECK(op_of(ms[1]).a.at(0, 0) == Catch::Approx(0.04));
        CHECK_FALSE(p.is_linear());
    }

    SECTION("drift control folds into signed gradient coefficients") {
        const Problem p = drift_control(1.0, 1.0, terminal_coordinate(1.0));
        const auto ms = p.models_at(0.0, 0.0);
        REQUIRE(ms.size() == 2);
        CHECK(op_of(ms[0]).b[0] == Catch::Approx(1.0));
        CHECK(op_of(ms[1]).b[0] == Catch::Approx(-1.0));
    }

    SECTION("modulus defaults to identity with a power option") {
        Modulus w;
        CHECK(w(0.25) == 0.25);
        Modulus h{0.5, 2.0};
        CHECK(h(0.25) == Catch::Approx(1.0));
        CHECK(h(0.0) == 0.0);
    }
}

TEST_CASE("assumption validation") {
    SECTION("bounded coefficient maps pass with honest witnesses") {
        const Problem p = pathdep_linear(1.0, AtomicMeasure::lebesgue(1.0));
        const AssumptionReport r = validate_assumptions(p);
        CHECK(r.ok);
        CHECK(r.coef_lip <= 0.5 + 1e-9);
        CHECK(r.coef_lip >= 0.05);  // tanh really moves on the sampled range
        CHECK(r.min_diffusion >= 0.5);
        CHECK(r.control_count == 1);
        CHECK(r.terminal_lip <= 1.0 + 1e-9);
    }

    SECTION("linear growth in the summary is Lipschitz with the stated slope") {
        const Problem p = semilinear(0.7, 0.1, 0.1, 0.4, 1.0);
        const AssumptionReport r = validate_assumptions(p);
        CHECK(r.ok);
        CHECK(r.coef_lip == Catch::Approx(0.7).margin(1e-6));
        CHECK(r.driver_lip_y >= 0.1);
    }

    SECTION("an understated coefficient bound is flagged") {
        Problem p = semilinear(1.0, 0.0, 0.0, 0.0, 1.0);
        p.lip_coef = 0.1;
        const AssumptionReport r = validate_assumptions(p);
        CHECK_FALSE(r.ok);
        REQUIRE_FALSE(r.failures.empty());
        CHECK(r.failures[0].find("summary-Lipschitz") != std::string::npos);
    }

    SECTION("an understated terminal bound is flagged") {
        Problem p = heat1();
        p.terminal = terminal_square(1.0);
        p.terminal.lip = 0.5;
        const AssumptionReport r = validate_assumptions(p);
        CHECK_FALSE(r.ok);
    }

    SECTION("measure horizon mismatches are flagged") {
        Problem p = heat1(1.0, 2.0);
        p.terminal = terminal_coordinate(1.0);  // wrong horizon on purpose
        const AssumptionReport r = validate_assumptions(p);
        CHECK_FALSE(r.ok);
    }
}

TEST_CASE("key mechanics") {
    const TimeGrid g({0.0, 0.5, 1.0});
    const FrozenKey k = key1(g, 0, {3.0});
    CHECK(k.entry_time() == 0.0);
    CHECK(k.entry()[0] == 3.0);
    const FrozenKey k2 = k.extended(Vd::scalar(5.0));
    CHECK(k2.slab == 1);
    CHECK(k2.values[1][0] == 5.0);
    CHECK_THROWS(FrozenKey(g, 1, {Vd::scalar(0.0)}));
    CHECK_THROWS(FrozenKey(g, 3, {Vd::scalar(0.0), Vd::scalar(0.0), Vd::scalar(0.0), Vd::scalar(0.0)}));

    SECTION("the key path stops at the entry") {
        const Path hp = k2.to_path(PathMode::PC, 1.0);
        CHECK(hp.at1(0.25) == 3.0);
        CHECK(hp.at1(0.75) == 5.0);
        CHECK(hp.at1(1.0) == 5.0);
    }
}
