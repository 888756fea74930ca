#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "ppde/builtins.hpp"
#include "ppde/fd/exact.hpp"
#include "ppde/fd/lift.hpp"
#include "ppde/fd/slab.hpp"

using namespace ppde;

namespace {

Path const_path(double x0, double horizon = 1.0) {
    return Path(PathMode::PC, horizon, 1, {0.0}, {x0});
}

Path pc_path(std::vector<double> ts, std::vector<double> vs, double horizon = 1.0) {
    return Path(PathMode::PC, horizon, 1, std::move(ts), std::move(vs));
}

FrozenKey key1(const TimeGrid& g, std::size_t slab, std::vector<double> vals) {
    std::vector<Vd> v;
    for (double x : vals) v.push_back(Vd::scalar(x));
    return FrozenKey(g, slab, std::move(v));
}

SlabProblem one_model_slab(double t0, double t1, const ControlModel& m) {
    SlabProblem sp;
    sp.t0 = t0;
    sp.t1 = t1;
    sp.dim = m.mu.n;
    std::vector<ControlModel> ms{m};
    sp.models = [ms](double) { return ms; };
    return sp;
}

}  // namespace

TEST_CASE("mesh and value field basics") {
    const Mesh1D m(-2.0, 2.0, 5);
    CHECK(m.dx() == Catch::Approx(1.0));
    CHECK(m.x(0) == Catch::Approx(-2.0));
    CHECK(m.x(4) == Catch::Approx(2.0));
    const std::vector<double> row{0.0, 1.0, 4.0, 9.0, 16.0};
    CHECK(m.interp(row, 0.5) == Catch::Approx(6.5));
    CHECK(m.interp(row, -5.0) == Catch::Approx(0.0));  // constant extension
    CHECK(m.interp(row, 5.0) == Catch::Approx(16.0));
    CHECK_THROWS_AS(Mesh1D(1.0, 0.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(Mesh1D(0.0, 1.0, 2), std::invalid_argument);

    ValueField f;
    f.dim = 2;
    f.time = 0.25;
    f.mx = Mesh1D(0.0, 1.0, 3);
    f.my = Mesh1D(0.0, 1.0, 3);
    f.v.resize(9);
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) f.v[static_cast<std::size_t>(j) * 3 + i] = f.mx.x(i) + 10.0 * f.my.x(j);
    CHECK(f.at(2, 1) == Catch::Approx(1.0 + 5.0));
    CHECK(f.interp(0.25, 0.75) == Catch::Approx(0.25 + 7.5));

    std::ostringstream out;
    write_value_field(out, f);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "ppde-field 1");
    std::getline(in, line);
    CHECK(line == "dim 2");
    std::getline(in, line);
    CHECK(line.rfind("time ", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("xmesh ", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("ymesh ", 0) == 0);
    std::getline(in, line);
    CHECK(line == "values");
    int count = 0;
    double first = -1;
    while (std::getline(in, line) && !line.empty()) {
        if (count == 0) first = std::stod(line);
        ++count;
    }
    CHECK(count == 9);
    CHECK(first == Catch::Approx(f.v[0]));
}

TEST_CASE("heat slab reproduces gaussian moments") {
    // unit diffusion, terminal x^2: v(t,x) = x^2 + (T - t)
    ControlModel m = ControlModel::make(1);
    m.sigma.set(0, 0, 1.0);
    const SlabProblem sp = one_model_slab(0.0, 1.0, m);
    const Mesh1D mesh(-6.0, 6.0, 193);
    std::vector<double> g(static_cast<std::size_t>(mesh.nodes));
    for (int k = 0; k < mesh.nodes; ++k) g[static_cast<std::size_t>(k)] = mesh.x(k) * mesh.x(k);

    const auto v = fd_solve_slab_1d(sp, mesh, g, 1.0, 0.0);
    CHECK(mesh.interp(v, 0.0) == Catch::Approx(1.0).margin(1e-6));
    for (double x : {-2.0, -0.5, 0.7, 1.9})
        CHECK(mesh.interp(v, x) == Catch::Approx(x * x + 1.0).margin(5e-3));

    Fd1Options imp;
    imp.implicit = true;
    imp.implicit_steps = 64;
    const auto vi = fd_solve_slab_1d(sp, mesh, g, 1.0, 0.0, imp);
    CHECK(mesh.interp(vi, 0.0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("uncertain volatility picks the extreme diffusion") {
    // sup over sigma in {0.1, 0.2}: convex data ride the high vol, concave the low
    const Problem p = bsb(0.1, 0.2, 1.0, terminal_square(1.0));
    const FrozenKey k0 = key1(TimeGrid::uniform(1.0, 1), 0, {1.0});
    const SlabProblem sp = freeze(p, k0);
    const Mesh1D mesh(-4.0, 6.0, 161);
    std::vector<double> gc(static_cast<std::size_t>(mesh.nodes)), gv(gc.size());
    for (int k = 0; k < mesh.nodes; ++k) {
        gv[static_cast<std::size_t>(k)] = mesh.x(k) * mesh.x(k);
        gc[static_cast<std::size_t>(k)] = -mesh.x(k) * mesh.x(k);
    }
    const auto vhi = fd_solve_slab_1d(sp, mesh, gv, 1.0, 0.0);
    CHECK(mesh.interp(vhi, 1.0) == Catch::Approx(1.04).margin(1e-6));
    const auto vlo = fd_solve_slab_1d(sp, mesh, gc, 1.0, 0.0);
    CHECK(mesh.interp(vlo, 1.0) == Catch::Approx(-1.01).margin(1e-6));

    Fd1Options imp;
    imp.implicit = true;
    imp.implicit_steps = 128;
    const auto whi = fd_solve_slab_1d(sp, mesh, gv, 1.0, 0.0, imp);
    CHECK(mesh.interp(whi, 1.0) == Catch::Approx(1.04).margin(1e-6));
    const auto wlo = fd_solve_slab_1d(sp, mesh, gc, 1.0, 0.0, imp);
    CHECK(mesh.interp(wlo, 1.0) == Catch::Approx(-1.01).margin(1e-6));
}

TEST_CASE("adversarial drift transports linear data at the bound") {
    const Problem p = drift_control(1.0, 1.0, terminal_coordinate(1.0));
    const SlabProblem sp = freeze(p, key1(TimeGrid::uniform(1.0, 1), 0, {0.0}));
    const Mesh1D mesh(-6.0, 6.0, 193);
    std::vector<double> g(static_cast<std::size_t>(mesh.nodes));
    for (int k = 0; k < mesh.nodes; ++k) g[static_cast<std::size_t>(k)] = mesh.x(k);
    const auto v = fd_solve_slab_1d(sp, mesh, g, 1.0, 0.0);
    CHECK(mesh.interp(v, 0.0) == Catch::Approx(1.0).margin(1e-9));
    CHECK(mesh.interp(v, -1.5) == Catch::Approx(-0.5).margin(1e-9));
}

TEST_CASE("affine zero order terms integrate the expected odes") {
    // a = b = 0, fy = -0.5: v(0) = e^{-1/2} g + d-part
    ControlModel m = ControlModel::make(1);
    m.fy = -0.5;
    const SlabProblem decay = one_model_slab(0.0, 1.0, m);
    const Mesh1D mesh(-1.0, 1.0, 9);
    const std::vector<double> ones(static_cast<std::size_t>(mesh.nodes), 1.0);

    Fd1Options fine;
    fine.min_steps = 2000;
    const auto v = fd_solve_slab_1d(decay, mesh, ones, 1.0, 0.0, fine);
    CHECK(v[4] == Catch::Approx(std::exp(-0.5)).margin(2e-4));

    ControlModel ms = m;
    ms.f0 = 0.3;
    const SlabProblem source = one_model_slab(0.0, 1.0, ms);
    std::vector<double> twos(static_cast<std::size_t>(mesh.nodes), 2.0);
    const auto w = fd_solve_slab_1d(source, mesh, twos, 1.0, 0.0, fine);
    const double truth = 2.0 * std::exp(-0.5) + 0.3 * (1.0 - std::exp(-0.5)) / 0.5;
    CHECK(w[4] == Catch::Approx(truth).margin(2e-4));

    Fd1Options imp;
    imp.implicit = true;
    imp.implicit_steps = 2000;
    const auto wi = fd_solve_slab_1d(source, mesh, twos, 1.0, 0.0, imp);
    CHECK(wi[4] == Catch::Approx(truth).margin(2e-4));
}

TEST_CASE("kinked terminal smooths to the gaussian mean") {
    ControlModel m = ControlModel::make(1);
    m.sigma.set(0, 0, 1.0);
    const SlabProblem sp = one_model_slab(0.0, 1.0, m);
    const Mesh1D mesh(-6.0, 6.0, 193);
    std::vector<double> g(static_cast<std::size_t>(mesh.nodes));
    for (int k = 0; k < mesh.nodes; ++k) g[static_cast<std::size_t>(k)] = std::abs(mesh.x(k));
    const double truth = std::sqrt(2.0 / std::acos(-1.0));  // E|N(0,1)|

    const auto v = fd_solve_slab_1d(sp, mesh, g, 1.0, 0.0);
    CHECK(mesh.interp(v, 0.0) == Catch::Approx(truth).margin(2e-3));

    Fd1Options imp;
    imp.implicit = true;
    imp.implicit_steps = 256;
    const auto vi = fd_solve_slab_1d(sp, mesh, g, 1.0, 0.0, imp);
    CHECK(std::abs(mesh.interp(vi, 0.0) - mesh.interp(v, 0.0)) < 5e-3);
}

TEST_CASE("comparison principle holds nodewise") {
    const Problem p = bsb(0.1, 0.2, 1.0, terminal_square(1.0));
    const SlabProblem sp = freeze(p, key1(TimeGrid::uniform(1.0, 1), 0, {1.0}));
    const Mesh1D mesh(-3.0, 5.0, 65);
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> lo(static_cast<std::size_t>(mesh.nodes)), hi(lo.size());
        for (std::size_t k = 0; k < lo.size(); ++k) {
            lo[k] = u(rng);
            hi[k] = lo[k] + std::abs(u(rng));
        }
        CHECK(fd_comparison_gap(sp, mesh, lo, hi, 1.0, 0.0) <= 1e-12);
    }
    std::vector<double> a(static_cast<std::size_t>(mesh.nodes), 1.0), b(a.size(), 0.0);
    CHECK_THROWS_AS(fd_comparison_gap(sp, mesh, a, b, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("slab solver rejects what it cannot honor") {
    ControlModel m = ControlModel::make(1);
    m.sigma.set(0, 0, 1.0);
    SlabProblem sp = one_model_slab(0.0, 1.0, m);
    const Mesh1D mesh(-2.0, 2.0, 17);
    std::vector<double> g(static_cast<std::size_t>(mesh.nodes), 0.0);

    SlabProblem with_driver = sp;
    with_driver.driver = [](double, double y, const Vd&) { return -y; };
    CHECK_THROWS_AS(fd_solve_slab_1d(with_driver, mesh, g, 1.0, 0.0), std::invalid_argument);

    std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS(fd_solve_slab_1d(sp, mesh, wrong, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("plane heat matches product closed forms") {
    const double T = 0.5;
    ControlModel m = ControlModel::make(2);
    m.sigma.set(0, 0, 1.0);
    m.sigma.set(1, 1, 1.0);
    const SlabProblem sp = one_model_slab(0.0, T, m);
    const Mesh1D mesh(-4.0, 4.0, 129);
    ValueField g;
    g.dim = 2;
    g.time = T;
    g.mx = mesh;
    g.my = mesh;
    g.v.resize(static_cast<std::size_t>(mesh.nodes) * mesh.nodes);
    for (int j = 0; j < mesh.nodes; ++j)
        for (int i = 0; i < mesh.nodes; ++i)
            g.v[static_cast<std::size_t>(j) * mesh.nodes + i] = std::sin(mesh.x(i)) + std::cos(mesh.x(j));

    const ValueField v = fd_solve_slab_2d(sp, mesh, mesh, g, T, 0.0);
    const double decay = std::exp(-T / 2.0);
    for (auto [x, y] : {std::pair{0.3, 0.2}, std::pair{-0.8, 0.5}, std::pair{0.0, 0.0}})
        CHECK(v.interp(x, y) == Catch::Approx(decay * (std::sin(x) + std::cos(y))).margin(5e-3));

    SECTION("correlated diffusion feeds the cross stencil") {
        ControlModel c = ControlModel::make(2);
        c.sigma.set(0, 0, 1.0);
        c.sigma.set(1, 1, 1.0);
        c.sigma.set(0, 1, 0.4);  // a = sigma^2 has a12 = 0.8 < a11 = 1.16
        const SlabProblem spc = one_model_slab(0.0, T, c);
        ValueField gs = g;
        for (int j = 0; j < mesh.nodes; ++j)
            for (int i = 0; i < mesh.nodes; ++i)
                gs.v[static_cast<std::size_t>(j) * mesh.nodes + i] = std::sin(mesh.x(i) + mesh.x(j));
        const ValueField w = fd_solve_slab_2d(spc, mesh, mesh, gs, T, 0.0);
        // Var((sigma W)_1 + (sigma W)_2) = 3.92 per unit time
        const double d2 = std::exp(-3.92 * T / 2.0);
        CHECK(w.interp(0.3, 0.2) == Catch::Approx(d2 * std::sin(0.5)).margin(5e-3));
        CHECK(w.interp(-0.4, 0.1) == Catch::Approx(d2 * std::sin(-0.3)).margin(5e-3));
    }

    SECTION("oversized cross term is refused") {
        ControlModel bad = ControlModel::make(2);
        bad.sigma.set(0, 0, 1.0);
        bad.sigma.set(1, 1, 3.0);
        bad.sigma.set(0, 1, 1.0);  // a = [[2,4],[4,10]]: a12 > a11
        const SlabProblem spb = one_model_slab(0.0, T, bad);
        CHECK_THROWS_AS(fd_solve_slab_2d(spb, mesh, mesh, g, T, 0.0), std::invalid_argument);
    }

    SECTION("unequal spacing is refused") {
        const Mesh1D other(-4.0, 4.0, 65);
        CHECK_THROWS_AS(fd_solve_slab_2d(sp, mesh, other, g, T, 0.0), std::invalid_argument);
    }
}

TEST_CASE("lift walks the refinement ladder for the squared mean") {
    // g = (int_0^1 x dlambda)^2 against a centered start: the level-n value is
    // (N-1)(2N-1)/(6 N^2) for N slabs, increasing to 1/3
    const GridSequence seq = GridSequence::dyadic(1.0);
    LiftOptions opt;
    opt.x_nodes = 129;
    opt.half_width = 4.0;
    const Path z = const_path(0.0);
    for (int level = 1; level <= 4; ++level) {
        const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0)));
        const LiftSolver lift(p, seq.grid(level), opt);
        const double N = static_cast<double>(seq.grid(level).slabs());
        const double truth = (N - 1.0) * (2.0 * N - 1.0) / (6.0 * N * N);
        CHECK(lift.quantum() == Catch::Approx(1.0 / N));
        CHECK(lift.value(0.0, z) == Catch::Approx(truth).margin(1e-6));
    }
}

TEST_CASE("lift honors a terminal time atom") {
    // lambda = Leb + 0.3 delta_T, g = u^2: E u^2 = 0.365 from a zero start
    AtomicMeasure lam = AtomicMeasure::lebesgue(1.0);
    lam.add_atom(1.0, 0.3);
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(lam));
    const TimeGrid g2 = TimeGrid::uniform(1.0, 2);
    LiftOptions opt;
    opt.x_nodes = 129;
    opt.half_width = 4.0;
    const LiftSolver lift(p, g2, opt);

    CHECK(lift.value(0.0, const_path(0.0)) == Catch::Approx(0.365).margin(1e-6));
    // v(0, x0) = (1.3 x0)^2 + 0.365 on mesh nodes
    CHECK(lift.value(0.0, const_path(0.5)) == Catch::Approx(1.69 * 0.25 + 0.365).margin(1e-6));

    SECTION("terminal read matches the projected functional") {
        const Path x = pc_path({0.0, 0.5, 1.0}, {0.25, 0.5, -0.75});
        const double direct = p.terminal.on_key(g2, {Vd::scalar(0.25), Vd::scalar(0.5), Vd::scalar(-0.75)}, PathMode::PC);
        CHECK(direct == Catch::Approx((0.5 * 0.25 + 0.5 * 0.5 - 0.3 * 0.75) * (0.5 * 0.25 + 0.5 * 0.5 - 0.3 * 0.75)));
        CHECK(lift.value(1.0, x) == Catch::Approx(direct).margin(1e-10));
    }

    SECTION("interior queries solve the slab tail") {
        // v(t, x) inside slab 1: (c + 0.3 y)^2 + 0.09 (T - t), c from the nodes
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-1.2, 1.2);
        for (int trial = 0; trial < 6; ++trial) {
            const double a = u(rng), b = u(rng), y = u(rng);
            const Path x = pc_path({0.0, 0.5, 0.75}, {a, b, y});
            const double cu = 0.5 * a + 0.5 * b + 0.3 * y;
            CHECK(lift.value(0.75, x) == Catch::Approx(cu * cu + 0.09 * 0.25).margin(1e-2));
        }
    }

    SECTION("boundary values glue across the slab seam") {
        const Path x = const_path(0.25);
        const double at = lift.value(0.5, x);
        CHECK(at == Catch::Approx((0.5 * 0.25 + 0.8 * 0.25) * (0.5 * 0.25 + 0.8 * 0.25) + 0.09 * 0.5).margin(1e-10));
        CHECK(lift.value(0.5 - 1e-7, x) == Catch::Approx(at).margin(1e-4));

        // a path that jumps at the seam keeps its left-limit key below it
        const Path j = pc_path({0.0, 0.5}, {0.25, 0.5});
        CHECK(lift.value(0.5 - 1e-7, j) == Catch::Approx(at).margin(1e-4));
        const double cj = 0.5 * 0.25 + 0.8 * 0.5;
        CHECK(lift.value(0.5, j) == Catch::Approx(cj * cj + 0.09 * 0.5).margin(1e-10));
    }
}

TEST_CASE("lift agrees with the direct slab recursion") {
    const TimeGrid g2 = TimeGrid::uniform(1.0, 2);
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0)));
    LiftOptions lopt;
    lopt.x_nodes = 129;
    lopt.half_width = 4.0;
    const LiftSolver lift(p, g2, lopt);

    ExactOptions eopt;
    eopt.key_nodes = 65;
    eopt.mesh_nodes = 129;
    eopt.half_width = 4.0;

    CHECK(lift.value(0.0, const_path(0.0)) == Catch::Approx(0.125).margin(1e-6));
    CHECK(exact_value(p, key1(g2, 0, {0.0}), 0.0, 0.0, eopt) == Catch::Approx(0.125).margin(5e-3));

    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 8; ++trial) {
        const double a = u(rng), b = u(rng);
        const FrozenKey k = key1(g2, 1, {a, b});
        const double via_lift = lift.value_at(k);
        const double via_rec = exact_value(p, k, 0.5, b, eopt);
        // the terminal weights put no mass on x_T, so slab-1 values are settled
        const double truth = (0.5 * a + 0.5 * b) * (0.5 * a + 0.5 * b);
        CHECK(via_lift == Catch::Approx(truth).margin(5e-3));
        CHECK(via_rec == Catch::Approx(truth).margin(5e-3));
    }
}

TEST_CASE("summary frozen coefficients charge the slab entry") {
    // kappa = 1 feedback drift: v(0, x0) = sin(1.0625 x0) e^{-1/16} on two slabs
    const Problem p = semilinear(1.0, 0.0, 0.0, 0.0, 1.0);
    const TimeGrid g2 = TimeGrid::uniform(1.0, 2);
    LiftOptions opt;
    opt.x_nodes = 129;
    opt.half_width = 4.0;
    const LiftSolver lift(p, g2, opt);
    REQUIRE(lift.summary_active());

    const double v0 = lift.value(0.0, const_path(0.5));
    CHECK(v0 == Catch::Approx(std::sin(1.0625 * 0.5) * std::exp(-0.0625)).margin(1e-2));

    ExactOptions eopt;
    eopt.key_nodes = 65;
    eopt.mesh_nodes = 129;
    eopt.half_width = 4.0;
    CHECK(exact_value(p, key1(g2, 0, {0.5}), 0.0, 0.5, eopt) == Catch::Approx(v0).margin(1e-2));

    SECTION("slab boundary values follow the committed charge") {
        // v_1(c, xi) = sin(c + xi/2) exactly at lattice pairs
        CHECK(lift.value_at(key1(g2, 1, {0.25, 0.5})) == Catch::Approx(std::sin(0.5 * 0.25 + 0.5 * 0.5)).margin(1e-9));
        CHECK(lift.value_at(key1(g2, 1, {0.33, -0.7})) ==
              Catch::Approx(std::sin(0.5 * 0.33 + 0.5 * -0.7)).margin(1e-3));
    }

    SECTION("interior queries keep the entry-frozen drift") {
        // path enters slab 0 at 0.5 and sits at -0.5 when queried: the drift
        // stays frozen by the entry, so v = sin(0.2734375 + y/2) e^{-1/32}
        const Path x = pc_path({0.0, 0.25}, {0.5, -0.5});
        const double truth = std::sin(0.2734375 + 0.5 * -0.5) * std::exp(-0.03125);
        CHECK(lift.value(0.25, x) == Catch::Approx(truth).margin(1e-2));
    }
}

TEST_CASE("lift covers the plane without summary state") {
    const double T = 0.5;
    const Problem p = heat(2, 1.0, T, terminal_smooth_plane(T));
    const TimeGrid g1 = TimeGrid::uniform(T, 1);
    LiftOptions opt;
    opt.x_nodes = 65;
    opt.half_width = 4.0;
    const LiftSolver lift(p, g1, opt);

    const Path xy(PathMode::PC, T, 2, {0.0}, {0.3, 0.2});
    const double truth0 = std::exp(-T / 2.0) * (std::sin(0.3) + std::cos(0.2));
    CHECK(lift.value(0.0, xy) == Catch::Approx(truth0).margin(7e-3));

    const double truth_mid = std::exp(-(T - 0.25) / 2.0) * (std::sin(0.3) + std::cos(0.2));
    CHECK(lift.value(0.25, xy) == Catch::Approx(truth_mid).margin(7e-3));

    SECTION("plane summaries are refused") {
        const Problem bad = heat(2, 1.0, T, terminal_integral(AtomicMeasure::lebesgue(T), 2));
        CHECK_THROWS_AS(LiftSolver(bad, g1, opt), std::invalid_argument);
    }
}

TEST_CASE("lift guards its domain") {
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0)));
    LiftOptions opt;
    opt.x_nodes = 129;
    opt.half_width = 4.0;

    CHECK_THROWS_AS(LiftSolver(p, TimeGrid::uniform(2.0, 2), opt), std::invalid_argument);

    LiftOptions tiny = opt;
    tiny.max_layer_nodes = 1000;
    CHECK_THROWS_AS(LiftSolver(p, TimeGrid::uniform(1.0, 2), tiny), std::invalid_argument);

    const LiftSolver lift(p, TimeGrid::uniform(1.0, 2), opt);
    CHECK_THROWS_AS(lift.value(1.5, const_path(0.0)), std::invalid_argument);
    const Path plane(PathMode::PC, 1.0, 2, {0.0}, {0.0, 0.0});
    CHECK_THROWS_AS(lift.value(0.0, plane), std::invalid_argument);
    CHECK_THROWS_AS(lift.value_at(key1(TimeGrid::uniform(1.0, 3), 1, {0.0, 0.0})), std::invalid_argument);

    SECTION("misaligned charges fall back to an interpolated lattice") {
        // an irrational split still evaluates linear functionals exactly
        const TimeGrid g(std::vector<double>{0.0, 0.3183098861837907, 1.0});
        const Problem lin = heat(1, 1.0, 1.0, terminal_integral(AtomicMeasure::lebesgue(1.0)));
        LiftOptions small;
        small.x_nodes = 17;
        small.half_width = 4.0;
        const LiftSolver fallback(lin, g, small);
        CHECK(fallback.quantum() > 0.0);
        CHECK(fallback.value(0.0, const_path(0.5)) == Catch::Approx(0.5).margin(1e-9));
    }
}

TEST_CASE("lift boundary fields dump on the mesh") {
    const Problem p = heat(1, 1.0, 1.0, terminal_integral_square(AtomicMeasure::lebesgue(1.0)));
    LiftOptions opt;
    opt.x_nodes = 65;
    opt.half_width = 4.0;
    const LiftSolver lift(p, TimeGrid::uniform(1.0, 2), opt);

    const ValueField f = lift.boundary_field(0);
    REQUIRE(f.dim == 1);
    REQUIRE(static_cast<int>(f.v.size()) == 65);
    CHECK(f.time == Catch::Approx(0.0));
    // v(0, x) = x^2 + 1/8 along the committed-zero section
    CHECK(f.interp(0.0) == Catch::Approx(0.125).margin(1e-6));
    CHECK(f.interp(1.0) == Catch::Approx(1.0 + 0.125).margin(1e-6));

    std::ostringstream out;
    write_value_field(out, f);
    CHECK(out.str().rfind("ppde-field 1\ndim 1\n", 0) == 0);

    CHECK_THROWS_AS(lift.boundary_field(7), std::invalid_argument);
}
