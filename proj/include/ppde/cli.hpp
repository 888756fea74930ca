#pragma once

// Experiment runner behind the command-line tool: builds problem instances,
// grids, and query fixtures from a Config, drives the library, and writes
// one CSV set plus a manifest per run. Commands return 0 when every flagged
// check passed and 1 when a numerical check failed; malformed configuration
// throws ConfigError (the tool maps exceptions to exit 2).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ppde/approximation.hpp"
#include "ppde/builtins.hpp"
#include "ppde/config.hpp"
#include "ppde/dupire.hpp"
#include "ppde/evaluator.hpp"
#include "ppde/fd/lift.hpp"
#include "ppde/mc/bsde.hpp"
#include "ppde/metrics.hpp"
#include "ppde/path_io.hpp"
#include "ppde/report_io.hpp"

namespace ppde::cli {

// ---- config -> library objects ------------------------------------------------

inline double num_token(const Config& c, const std::string& sec, const std::string& key,
                        const std::string& raw) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(raw, &used);
    } catch (const std::exception&) {
        throw c.field(sec, key, "'" + raw + "' is not a number");
    }
    if (used != raw.size()) throw c.field(sec, key, "'" + raw + "' is not a number");
    return v;
}

inline AtomicMeasure measure_from(const Config& c, double horizon) {
    const std::string m = c.str_or("terminal", "measure", "lebesgue");
    AtomicMeasure lam = AtomicMeasure::zero(horizon);
    if (m == "lebesgue")
        lam = AtomicMeasure::lebesgue(horizon, c.num_or("terminal", "scale", 1.0));
    else if (m != "zero")
        throw c.field("terminal", "measure", "unknown measure '" + m + "' (lebesgue, zero)");
    if (c.has("terminal", "atoms")) {
        for (const std::string& tok : c.str_list("terminal", "atoms")) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw c.field("terminal", "atoms", "expected time:weight, got '" + tok + "'");
            const double at = num_token(c, "terminal", "atoms", tok.substr(0, colon));
            const double w = num_token(c, "terminal", "atoms", tok.substr(colon + 1));
            try {
                lam.add_atom(at, w);
            } catch (const std::exception& e) {
                throw c.field("terminal", "atoms", e.what());
            }
        }
    }
    return lam;
}

inline TerminalSpec terminal_from(const Config& c, double horizon, int dim) {
    const std::string kind = c.str("terminal", "kind");
    const int axis = static_cast<int>(c.integer_or("terminal", "axis", 0));
    if (kind == "coordinate") return terminal_coordinate(horizon, dim, axis);
    if (kind == "abs") return terminal_abs(horizon, dim, axis);
    if (kind == "square") return terminal_square(horizon, dim, axis);
    if (kind == "integral") return terminal_integral(measure_from(c, horizon), dim);
    if (kind == "integral_square") return terminal_integral_square(measure_from(c, horizon), dim);
    if (kind == "sin_integral") return terminal_sin_integral(measure_from(c, horizon), dim);
    if (kind == "smooth_plane") return terminal_smooth_plane(horizon);
    throw c.field("terminal", "kind",
                  "unknown terminal '" + kind +
                      "' (coordinate, abs, square, integral, integral_square, sin_integral, smooth_plane)");
}

inline Problem instance_from(const Config& c) {
    const std::string name = c.str("instance", "name");
    const double T = c.num_or("instance", "horizon", 1.0);
    if (!(T > 0)) throw c.field("instance", "horizon", "must be > 0");
    const int dim = static_cast<int>(c.integer_or("instance", "dim", 1));
    if (dim < 1) throw c.field("instance", "dim", "must be >= 1");
    try {
        if (name == "heat")
            return heat(dim, c.num_or("instance", "sigma", 1.0), T, terminal_from(c, T, dim));
        if (name == "heat1") return heat1(c.num_or("instance", "sigma", 1.0), T);
        if (name == "bsb")
            return bsb(c.num("instance", "sig_lo"), c.num("instance", "sig_hi"), T,
                       terminal_from(c, T, dim));
        if (name == "drift_control")
            return drift_control(c.num("instance", "bound"), T, terminal_from(c, T, dim));
        if (name == "semilinear")
            return semilinear(c.num_or("instance", "kappa", 0.0), c.num_or("instance", "c1", 0.0),
                              c.num_or("instance", "c2", 0.0), c.num_or("instance", "c3", 0.0), T);
        if (name == "pathdep_linear") return pathdep_linear(T, measure_from(c, T));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw c.field("instance", "name", std::string("cannot build '") + name + "': " + e.what());
    }
    throw c.field("instance", "name",
                  "unknown instance '" + name +
                      "' (heat, heat1, bsb, drift_control, semilinear, pathdep_linear)");
}

inline GridSequence sequence_from(const Config& c, double horizon, const std::string& sec = "grid",
                                  const std::string& key = "sequence") {
    const std::string s = c.str_or(sec, key, "dyadic");
    if (s == "dyadic") return GridSequence::dyadic(horizon);
    if (s == "triadic") return GridSequence::triadic(horizon);
    if (s.rfind("ratio:", 0) == 0) {
        const double r = num_token(c, sec, key, s.substr(6));
        if (r < 2 || r != std::floor(r)) throw c.field(sec, key, "refinement ratio must be an integer >= 2");
        return GridSequence(horizon, static_cast<int>(r), s);
    }
    throw c.field(sec, key, "unknown sequence '" + s + "' (dyadic, triadic, ratio:<k>)");
}

inline std::vector<int> levels_from(const Config& c) {
    const std::vector<int> ls = c.int_list("grid", "levels");
    for (std::size_t k = 0; k < ls.size(); ++k) {
        if (ls[k] < 1) throw c.field("grid", "levels", "levels start at 1");
        if (k && ls[k] != ls[k - 1] + 1)
            throw c.field("grid", "levels", "levels must ascend consecutively");
    }
    return ls;
}

inline Backend backend_from(const Config& c) {
    const std::string b = c.str_or("run", "backend", "lift");
    if (b == "lift") return Backend::Lift;
    if (b == "exact") return Backend::Exact;
    if (b == "mc") return Backend::MC;
    throw c.field("run", "backend", "unknown backend '" + b + "' (lift, exact, mc)");
}

inline std::uint64_t seed_from(const Config& c) {
    const long s = c.integer("run", "seed");
    if (s < 0) throw c.field("run", "seed", "must be >= 0");
    return static_cast<std::uint64_t>(s);
}

inline EvalOptions eval_options_from(const Config& c, std::uint64_t seed) {
    EvalOptions eo;
    eo.lift.x_nodes = static_cast<int>(c.integer_or("mesh", "x_nodes", eo.lift.x_nodes));
    if (eo.lift.x_nodes < 3) throw c.field("mesh", "x_nodes", "need at least 3 state nodes");
    eo.lift.half_width = c.num_or("mesh", "half_width", 0.0);
    if (eo.lift.half_width < 0) throw c.field("mesh", "half_width", "must be >= 0 (0 = automatic)");
    if (c.has("mesh", "center")) eo.lift.center = c.num("mesh", "center");
    eo.lift.max_layer_nodes =
        static_cast<std::size_t>(c.integer_or("mesh", "max_layer_nodes",
                                              static_cast<long>(eo.lift.max_layer_nodes)));
    eo.exact.key_nodes = static_cast<int>(c.integer_or("mesh", "key_nodes", eo.exact.key_nodes));
    eo.exact.mesh_nodes = static_cast<int>(c.integer_or("mesh", "mesh_nodes", eo.exact.mesh_nodes));
    eo.mc.paths = c.integer_or("mc", "paths", eo.mc.paths);
    if (eo.mc.paths < 1) throw c.field("mc", "paths", "must be >= 1");
    eo.mc.steps_per_slab = static_cast<int>(c.integer_or("mc", "steps_per_slab", eo.mc.steps_per_slab));
    if (eo.mc.steps_per_slab < 1) throw c.field("mc", "steps_per_slab", "must be >= 1");
    eo.mc.blocks = static_cast<int>(c.integer_or("mc", "blocks", eo.mc.blocks));
    eo.mc.seed = seed;
    eo.mc.antithetic = c.flag_or("mc", "antithetic", eo.mc.antithetic);
    eo.mc.force_lsmc = c.flag_or("mc", "force_lsmc", eo.mc.force_lsmc);
    eo.mc.control_budget = c.integer_or("mc", "control_budget", eo.mc.control_budget);
    return eo;
}

struct Query {
    std::string id;
    double t = 0;
    Path x;
};

inline Path fixture_path(const Config& c, const std::string& id, const std::string& dir,
                         const Problem& p) {
    if (id.rfind("const:", 0) == 0)
        return Path::constant1(p.mode, p.horizon, num_token(c, "query", "fixtures", id.substr(6)));
    const std::string file = id.rfind("file:", 0) == 0 ? id.substr(5) : dir + "/" + id + ".path";
    try {
        return read_path_file(file);
    } catch (const std::exception& e) {
        throw c.field("query", "fixtures", "fixture '" + id + "': " + e.what());
    }
}

inline std::vector<Query> queries_from(const Config& c, const Problem& p) {
    const std::string dir = c.str_or("query", "fixture_dir", "fixtures");
    const std::vector<std::string> ids =
        c.has("query", "fixtures") ? c.str_list("query", "fixtures") : std::vector<std::string>{"const:0"};
    std::vector<double> ts = c.has("query", "t") ? c.num_list("query", "t") : std::vector<double>{0.0};
    if (ts.size() == 1 && ids.size() > 1) ts.assign(ids.size(), ts[0]);
    if (ts.size() != ids.size())
        throw c.field("query", "t", "need one query time, or exactly one per fixture");
    std::vector<Query> qs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::string& id = ids[i];
        if (id.find(',') != std::string::npos)
            throw c.field("query", "fixtures", "fixture id '" + id + "' may not contain a comma");
        Path x = fixture_path(c, id, dir, p);
        if (std::abs(x.horizon() - p.horizon) > 1e-12 * std::max(1.0, p.horizon))
            throw c.field("query", "fixtures", "fixture '" + id + "' horizon " + fmt_g17(x.horizon()) +
                                                   " does not match instance horizon " +
                                                   fmt_g17(p.horizon));
        if (x.dim() != p.dim)
            throw c.field("query", "fixtures", "fixture '" + id + "' has dimension " +
                                                   std::to_string(x.dim()) + ", instance needs " +
                                                   std::to_string(p.dim));
        if (!(ts[i] >= 0) || !(ts[i] <= p.horizon))
            throw c.field("query", "t", "query time " + fmt_g17(ts[i]) + " is outside [0, horizon]");
        qs.push_back({id, ts[i], std::move(x)});
    }
    return qs;
}

// Everything a command needs, resolved and validated up front.
struct Setup {
    Problem p;
    Backend be = Backend::Lift;
    EvalOptions eo;
    GridSequence seq = GridSequence::dyadic(1.0);
    std::vector<int> levels;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<Query> queries;
};

inline Setup setup_from(const Config& c) {
    Setup s;
    s.p = instance_from(c);
    s.be = backend_from(c);
    s.seed = seed_from(c);
    s.eo = eval_options_from(c, s.seed);
    s.seq = sequence_from(c, s.p.horizon);
    s.levels = levels_from(c);
    s.threads = static_cast<int>(c.integer_or("run", "threads", 1));
    if (s.threads < 1) throw c.field("run", "threads", "must be >= 1");
    s.queries = queries_from(c, s.p);
    return s;
}

// Run `n` independent jobs, at most `threads` at a time. Jobs write disjoint
// result slots, so the assembled output does not depend on the thread count.
inline void run_jobs(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
    const int use = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n));
    if (use <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errs(static_cast<std::size_t>(use));
    std::vector<std::thread> pool;
    for (int w = 0; w < use; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) job(i);
            } catch (...) {
                errs[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

inline std::vector<GridQuery> grid_queries(const std::vector<Query>& qs) {
    std::vector<GridQuery> out;
    for (const Query& q : qs) out.push_back({q.t, q.x, q.id});
    return out;
}

inline ConvergenceOptions convergence_options_from(const Config& c) {
    ConvergenceOptions o;
    o.cauchy_tol = c.num_or("converge", "cauchy_tol", o.cauchy_tol);
    o.rate_floor = c.num_or("converge", "rate_floor", o.rate_floor);
    o.zero_gap = c.num_or("converge", "zero_gap", o.zero_gap);
    o.min_contraction = c.num_or("converge", "min_contraction", o.min_contraction);
    return o;
}

// ---- commands -------------------------------------------------------------------

inline int run_solve(const Config& cfg, const Setup& s, const std::string& dir,
                     const std::string& dump_name, std::ostream& log) {
    const int level = static_cast<int>(cfg.integer_or("solve", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    std::vector<EvalResult> res(s.queries.size());
    if (s.threads > 1) {
        run_jobs(s.queries.size(), s.threads, [&](std::size_t i) {
            res[i] = Evaluator(s.p, s.be, s.eo).value(g, s.queries[i].t, s.queries[i].x);
        });
    } else {
        const Evaluator ev(s.p, s.be, s.eo);
        for (std::size_t i = 0; i < s.queries.size(); ++i)
            res[i] = ev.value(g, s.queries[i].t, s.queries[i].x);
    }

    std::vector<CsvFile> files;
    CsvFile csv("solve.csv", {"level", "n", "mesh", "t", "path_id", "value", "se"});
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        csv.cell(level).cell(g.slabs()).cell(g.mesh()).cell(s.queries[i].t).cell(s.queries[i].id);
        csv.cell(res[i].value).cell(res[i].se);
        csv.end_row();
        log << "solve " << s.queries[i].id << " t=" << fmt_g17(s.queries[i].t) << " level=" << level
            << ": value=" << fmt_g17(res[i].value) << " se=" << fmt_g17(res[i].se) << "\n";
    }
    files.push_back(std::move(csv));

    std::vector<NamedBlob> extras;
    if (!dump_name.empty()) {
        if (s.be != Backend::Lift)
            throw cfg.field("solve", "dump_field", "field dumps need backend = lift");
        const LiftSolver ls(s.p, g, s.eo.lift);
        std::ostringstream blob;
        for (int b = 0; b <= g.slabs(); ++b)
            write_value_field(blob, ls.boundary_field(static_cast<std::size_t>(b)));
        extras.push_back({dump_name, blob.str()});
    }
    write_run(dir, "solve", cfg, s.seed, files, extras);
    return 0;
}

inline int run_converge(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const ConvergenceOptions copt = convergence_options_from(cfg);
    const int lmin = s.levels.front(), lmax = s.levels.back();
    std::vector<ConvergenceReport> reps(s.queries.size());
    if (s.threads > 1) {
        run_jobs(s.queries.size(), s.threads, [&](std::size_t i) {
            reps[i] = approximate_solution(Evaluator(s.p, s.be, s.eo), s.seq, lmin, lmax, s.queries[i].t,
                                           s.queries[i].x, copt);
        });
    } else {
        const Evaluator ev(s.p, s.be, s.eo);
        for (std::size_t i = 0; i < s.queries.size(); ++i)
            reps[i] = approximate_solution(ev, s.seq, lmin, lmax, s.queries[i].t, s.queries[i].x, copt);
    }

    CsvFile csv("converge.csv", {"n", "mesh", "t", "path_id", "value", "gap_prev", "se_if_mc"});
    CsvFile rate("rate.csv", {"path_id", "rate", "rate_residual", "contraction", "limit", "predicted_gap",
                              "value_finest", "se_finest", "exact_chain", "cauchy_ok", "rate_ok"});
    bool pass = true;
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        const ConvergenceReport& r = reps[i];
        for (std::size_t k = 0; k < r.levels.size(); ++k) {
            csv.cell(s.seq.grid(r.levels[k]).slabs()).cell(r.meshes[k]).cell(s.queries[i].t);
            csv.cell(s.queries[i].id).cell(r.values[k]);
            if (k == 0)
                csv.blank();
            else
                csv.cell(r.gaps[k - 1]);
            if (s.be == Backend::MC)
                csv.cell(r.ses[k]);
            else
                csv.blank();
            csv.end_row();
        }
        rate.cell(s.queries[i].id).cell(r.rate).cell(r.rate_residual).cell(r.contraction).cell(r.limit);
        rate.cell(r.predicted_gap).cell(r.value_finest).cell(r.se_finest).cell(r.exact_chain);
        rate.cell(r.cauchy_ok).cell(r.rate_ok);
        rate.end_row();
        log << "converge " << s.queries[i].id << ": finest=" << fmt_g17(r.value_finest)
            << " limit=" << fmt_g17(r.limit) << " rate=" << fmt_g17(r.rate)
            << (r.exact_chain ? " (exact chain)" : "") << " cauchy_ok=" << r.cauchy_ok
            << " rate_ok=" << r.rate_ok << "\n";
        pass = pass && r.cauchy_ok && r.rate_ok;
    }
    write_run(dir, "converge", cfg, s.seed, {csv, rate});
    return pass ? 0 : 1;
}

inline int run_gridcheck(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const GridSequence seq_b = sequence_from(cfg, s.p.horizon, "gridcheck", "sequence_b");
    const int lb = static_cast<int>(cfg.integer_or("gridcheck", "levels_b", s.levels.back()));
    if (lb < 1) throw cfg.field("gridcheck", "levels_b", "must be >= 1");
    if (seq_b.ratio() == s.seq.ratio())
        throw cfg.field("gridcheck", "sequence_b", "second sequence must differ from [grid] sequence");
    const Evaluator ev(s.p, s.be, s.eo);
    const GridCheck gc = grid_independence(ev, s.seq, s.levels.back(), seq_b, lb, grid_queries(s.queries),
                                           convergence_options_from(cfg));
    CsvFile csv("gridcheck.csv",
                {"path_id", "t", "limit_a", "limit_b", "discrepancy", "tol", "pass"});
    for (const GridCheckRow& r : gc.rows) {
        csv.cell(r.path_name).cell(r.t).cell(r.limit_a).cell(r.limit_b).cell(r.discrepancy).cell(r.tol);
        csv.cell(r.pass);
        csv.end_row();
        log << "gridcheck " << r.path_name << ": |" << fmt_g17(r.limit_a) << " - " << fmt_g17(r.limit_b)
            << "| = " << fmt_g17(r.discrepancy) << " tol=" << fmt_g17(r.tol) << " pass=" << r.pass << "\n";
    }
    write_run(dir, "gridcheck", cfg, s.seed, {csv});
    return gc.pass ? 0 : 1;
}

inline int run_modulus(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const int level = static_cast<int>(cfg.integer_or("modulus", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    ModulusOptions mo;
    mo.deltas = cfg.num_list_or("modulus", "deltas", mo.deltas);
    mo.dts = cfg.num_list_or("modulus", "dts", mo.dts);
    mo.anchor_horizon = cfg.flag_or("modulus", "anchor_horizon", false);
    const std::string cushion = cfg.str_or("modulus", "mesh_cushion", "0");
    mo.mesh_quarter = cushion == "auto" ? std::pow(g.mesh(), 0.25)
                                        : num_token(cfg, "modulus", "mesh_cushion", cushion);
    const double band_cap = cfg.num_or("modulus", "band_cap", 0.0);
    const double ratio_cap = cfg.num_or("modulus", "ratio_cap", 0.0);

    const Evaluator ev(s.p, s.be, s.eo);
    CsvFile csv("modulus.csv", {"path_id", "kind", "size", "num", "den", "ratio", "skipped"});
    bool pass = true;
    for (const Query& q : s.queries) {
        const ModulusReport rep = modulus_check(ev, g, q.t, q.x, mo);
        const auto emit = [&](const char* kind, const ModulusTable& tab) {
            for (std::size_t k = 0; k < tab.sizes.size(); ++k) {
                csv.cell(q.id).cell(kind).cell(tab.sizes[k]).cell(tab.nums[k]).cell(tab.dens[k]);
                csv.cell(tab.ratios[k]).cell(static_cast<bool>(tab.skipped[k]));
                csv.end_row();
            }
            const bool ok = (band_cap <= 0 || tab.band() <= band_cap) &&
                            (ratio_cap <= 0 || tab.bounded(ratio_cap));
            log << "modulus " << q.id << " " << kind << ": band=" << fmt_g17(tab.band())
                << " max_ratio=" << fmt_g17(tab.max_ratio()) << " ok=" << ok << "\n";
            pass = pass && ok;
        };
        emit("space", rep.space);
        emit("time", rep.time);
    }
    write_run(dir, "modulus", cfg, s.seed, {csv});
    return pass ? 0 : 1;
}

inline int run_stability(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const std::string param = cfg.str("stability", "param");
    const double base = cfg.num("instance", param);
    const std::string mode = cfg.str_or("stability", "mode", "scale");
    if (mode != "scale" && mode != "shift")
        throw cfg.field("stability", "mode", "unknown mode '" + mode + "' (scale, shift)");
    const std::vector<double> eps = cfg.num_list("stability", "eps");
    const int level = static_cast<int>(cfg.integer_or("stability", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    const double expect = cfg.num_or("stability", "expect_ratio", 0.0);
    const double band = cfg.num_or("stability", "ratio_band", 0.3);

    const auto family = [&](double e) {
        const double v = mode == "scale" ? base * (1.0 + e) : base + e;
        return instance_from(cfg.with("instance", param, fmt_g17(v)));
    };

    CsvFile csv("stability.csv", {"path_id", "eps", "value", "gap", "ratio"});
    bool pass = true;
    for (const Query& q : s.queries) {
        const StabilityReport rep = stability_experiment(family, eps, s.be, g, q.t, q.x, s.eo);
        csv.cell(q.id).cell(0.0).cell(rep.reference).cell(0.0).blank();
        csv.end_row();
        for (std::size_t k = 0; k < rep.eps.size(); ++k) {
            csv.cell(q.id).cell(rep.eps[k]).cell(rep.values[k]).cell(rep.gaps[k]);
            if (k < rep.ratios.size())
                csv.cell(rep.ratios[k]);
            else
                csv.blank();
            csv.end_row();
        }
        bool ok = true;
        if (expect > 0)
            for (double r : rep.ratios) ok = ok && std::abs(r / expect - 1.0) <= band;
        log << "stability " << q.id << " (" << param << ", " << mode << "): reference="
            << fmt_g17(rep.reference);
        if (!rep.ratios.empty()) log << " first_ratio=" << fmt_g17(rep.ratios.front());
        log << (expect > 0 ? (ok ? " ok=1" : " ok=0") : "") << "\n";
        pass = pass && ok;
    }
    write_run(dir, "stability", cfg, s.seed, {csv});
    return pass ? 0 : 1;
}

inline int run_classical(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const std::string ref = cfg.str("classical", "reference");
    const double T = s.p.horizon;
    std::function<double(double, const Path&)> w;
    if (ref == "heat_square") {
        const double sig = cfg.num_or("instance", "sigma", 1.0);
        w = [sig, T](double t, const Path& x) {
            const double v = x.at1(t);
            return v * v + sig * sig * (T - t);
        };
    } else if (ref == "bsb_square") {
        const double sig = cfg.num("instance", "sig_hi");
        w = [sig, T](double t, const Path& x) {
            const double v = x.at1(t);
            return v * v + sig * sig * (T - t);
        };
    } else if (ref == "integral_tail") {
        // committed window integral plus the frozen tail: exact whenever the
        // state is driftless and the terminal is the plain window integral
        const TerminalSpec& term = s.p.terminal;
        const AtomicMeasure lam = term.lam;
        const Vd dirv = term.dir;
        w = [lam, dirv, T](double t, const Path& x) {
            return path_integral(lam, x, dirv, 0.0, t, true, false) +
                   dot(dirv, x.at(t)) * (lam.mass_co(t, T) + lam.atom_at(T));
        };
    } else {
        throw cfg.field("classical", "reference",
                        "unknown reference '" + ref + "' (heat_square, bsb_square, integral_tail)");
    }
    const double gap_tol = cfg.num_or("classical", "gap_tol", 1e-2);
    const Evaluator ev(s.p, s.be, s.eo);
    const ClassicalReport rep = classical_consistency(ev, s.seq, s.levels.front(), s.levels.back(),
                                                      grid_queries(s.queries), w);
    CsvFile csv("classical.csv", {"level", "max_gap", "max_se"});
    for (const ClassicalRow& r : rep.rows) {
        csv.cell(r.level).cell(r.max_gap).cell(r.max_se);
        csv.end_row();
    }
    const bool pass = rep.final_gap <= gap_tol;
    log << "classical " << ref << ": final_gap=" << fmt_g17(rep.final_gap) << " tol=" << fmt_g17(gap_tol)
        << " pass=" << pass << "\n";
    write_run(dir, "classical", cfg, s.seed, {csv});
    return pass ? 0 : 1;
}

inline int run_mc(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const int level = static_cast<int>(cfg.integer_or("mc", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    std::vector<McValue> res(s.queries.size());
    run_jobs(s.queries.size(), s.threads, [&](std::size_t i) {
        res[i] = mc_value(s.p, g, s.queries[i].t, s.queries[i].x, s.eo.mc);
    });

    std::vector<CsvFile> files;
    CsvFile csv("mc.csv", {"t", "path_id", "value", "se", "paths"});
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        csv.cell(s.queries[i].t).cell(s.queries[i].id).cell(res[i].value).cell(res[i].se);
        csv.cell(res[i].paths);
        csv.end_row();
        log << "mc " << s.queries[i].id << ": value=" << fmt_g17(res[i].value)
            << " se=" << fmt_g17(res[i].se) << "\n";
    }
    files.push_back(std::move(csv));

    bool pass = true;
    if (cfg.flag_or("mc", "diagnostics", false)) {
        const double delta = cfg.num_or("mc", "diag_delta", 0.05);
        const double resid_band = cfg.num_or("mc", "resid_band", 3.0);
        const double qc_cap = cfg.num_or("mc", "qc_cap", 0.05);
        CsvFile zd("zdiag.csv", {"path_id", "z_increment", "se_increment", "z_bump", "se_bump",
                                 "resid_mean", "resid_se", "qc", "scale", "pass"});
        for (const Query& q : s.queries) {
            const ZDiagnostics z = z_diagnostics(s.p, g, q.t, q.x, delta, s.eo.mc);
            const bool ok = std::abs(z.resid_mean) <= resid_band * z.resid_se &&
                            std::abs(z.qc) <= qc_cap * std::max(z.scale, 1e-300);
            zd.cell(q.id).cell(z.z_increment).cell(z.se_increment).cell(z.z_bump).cell(z.se_bump);
            zd.cell(z.resid_mean).cell(z.resid_se).cell(z.qc).cell(z.scale).cell(ok);
            zd.end_row();
            log << "mc zdiag " << q.id << ": z=" << fmt_g17(z.z_increment) << " resid="
                << fmt_g17(z.resid_mean) << "+-" << fmt_g17(z.resid_se) << " qc=" << fmt_g17(z.qc)
                << " pass=" << ok << "\n";
            pass = pass && ok;
        }
        files.push_back(std::move(zd));
    }
    write_run(dir, "mc", cfg, s.seed, files);
    return pass ? 0 : 1;
}

inline int run_dupire(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const int level = static_cast<int>(cfg.integer_or("dupire", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    DupireOptions du;
    du.ladder = cfg.num_list_or("dupire", "deltas", du.ladder);
    du.accept_rel = cfg.num_or("dupire", "accept_rel", du.accept_rel);
    du.tiny = cfg.num_or("dupire", "tiny", du.tiny);

    const Evaluator ev(s.p, s.be, s.eo);
    CsvFile checks("dupire.csv", {"check_id", "ladder_step", "ratio", "bound", "pass"});
    CsvFile deriv("derivative.csv",
                  {"path_id", "t", "method", "delta", "value", "se", "proxy", "accepted"});
    bool pass = true;

    for (const Query& q : s.queries) {
        // walk the bump ladder by hand so every rung lands in the check table
        DerivativeEstimate est;
        bool accepted = false;
        for (double d : du.ladder) {
            est = vertical_derivative(ev, g, q.t, q.x, d);
            const double mag = std::abs(est.value[0]);
            const double proxy = est.proxy[0];
            accepted = mag <= du.tiny || proxy <= du.accept_rel * mag;
            checks.cell("ladder:" + q.id).cell(d).cell(mag <= du.tiny ? 0.0 : proxy / mag);
            checks.cell(du.accept_rel).cell(accepted);
            checks.end_row();
            if (accepted) break;
        }
        est.accepted = accepted;
        deriv.cell(q.id).cell(q.t).cell("bump").cell(est.delta).cell(est.value[0]).cell(est.se[0]);
        deriv.cell(est.proxy[0]).cell(accepted);
        deriv.end_row();
        log << "dupire " << q.id << ": derivative=" << fmt_g17(est.value[0])
            << " delta=" << fmt_g17(est.delta) << " accepted=" << accepted << "\n";
        pass = pass && accepted;

        if (cfg.flag_or("dupire", "tangent", false)) {
            const DerivativeEstimate td = tangent_derivative(s.p, g, q.t, q.x, s.eo.mc);
            deriv.cell(q.id).cell(q.t).cell("tangent").cell(0.0).cell(td.value[0]).cell(td.se[0]);
            deriv.cell(td.proxy[0]).cell(true);
            deriv.end_row();
            log << "dupire " << q.id << ": tangent=" << fmt_g17(td.value[0])
                << " se=" << fmt_g17(td.se[0]) << "\n";
        }

        if (cfg.flag_or("dupire", "certificates", true)) {
            RegularityOptions ro;
            ro.alpha = cfg.num_or("dupire", "alpha", ro.alpha);
            ro.delta = cfg.num_or("dupire", "cert_delta", ro.delta);
            ro.space_deltas = cfg.num_list_or("dupire", "space_deltas", ro.space_deltas);
            if (cfg.has("dupire", "history_backs"))
                ro.history_backs = cfg.num_list("dupire", "history_backs");
            ro.history_delta = cfg.num_or("dupire", "history_delta", ro.history_delta);
            ro.dts = cfg.num_list_or("dupire", "dts", ro.dts);
            ro.atom_time = cfg.num_or("dupire", "atom_time", ro.atom_time);
            ro.atom_eps = cfg.num_or("dupire", "atom_eps", ro.atom_eps);
            const double space_cap = cfg.num_or("dupire", "space_cap", 0.0);
            const double time_cap = cfg.num_or("dupire", "time_cap", 0.0);
            const double uniform_cap = cfg.num_or("dupire", "uniform_cap", 0.0);
            const RegularityReport rep = regularity_certificates(ev, g, q.t, q.x, ro);
            const auto emit = [&](const char* kind, const std::vector<CertificateRow>& rows,
                                  double cap) {
                for (const CertificateRow& r : rows) {
                    const bool ok = r.skipped || cap <= 0 || r.ratio <= cap;
                    checks.cell(std::string(kind) + ":" + q.id).cell(r.size).cell(r.ratio).cell(cap);
                    checks.cell(ok);
                    checks.end_row();
                    pass = pass && ok;
                }
            };
            emit("space", rep.space, space_cap);
            emit("time", rep.time, time_cap);
            {
                const bool ok = uniform_cap <= 0 || rep.uniform_bound <= uniform_cap;
                checks.cell("uniform:" + q.id).cell(0.0).cell(rep.uniform_bound).cell(uniform_cap);
                checks.cell(ok);
                checks.end_row();
                pass = pass && ok;
            }
            if (rep.atom_checked) {
                checks.cell("atom:" + q.id).cell(ro.atom_eps).cell(rep.atom_jump).cell(rep.atom_mass);
                checks.cell(rep.atom_pass);
                checks.end_row();
                log << "dupire " << q.id << ": atom jump=" << fmt_g17(rep.atom_jump)
                    << " mass=" << fmt_g17(rep.atom_mass) << " pass=" << rep.atom_pass << "\n";
                pass = pass && rep.atom_pass;
            }
            log << "dupire " << q.id << ": uniform_bound=" << fmt_g17(rep.uniform_bound) << "\n";
        }
    }
    write_run(dir, "dupire", cfg, s.seed, {checks, deriv});
    return pass ? 0 : 1;
}

inline int run_validate(const Config& cfg, const Setup& s, const std::string& dir, std::ostream& log) {
    const int level = static_cast<int>(cfg.integer_or("validate", "level", s.levels.back()));
    const TimeGrid g = s.seq.grid(level);
    CsvFile csv("validate.csv", {"probe", "metric", "value", "bound", "pass"});
    bool pass = true;

    const bool has_g0 = static_cast<bool>(s.p.terminal.g0);
    const bool has_window = has_g0 && !s.p.terminal.lam.is_zero();

    if (!has_g0) {
        csv.cell("structure").cell("beyond-hypothesis").cell(1.0).cell(0.0).cell(true);
        csv.end_row();
        log << "validate structure: beyond-hypothesis (terminal carries no separable data map)\n";
    } else {
        const int nkeys = static_cast<int>(cfg.integer_or("validate", "nkeys", 8));
        const auto pseed = static_cast<std::uint64_t>(cfg.integer_or("validate", "probe_seed", 2024));
        const double cap = cfg.num_or("validate", "residual_cap", 0.05);
        const StructureProbe sp = structure_condition_probe(s.p.terminal, g, s.p.mode, nkeys, pseed);
        if (sp.degenerate) {
            csv.cell("structure").cell("residual_degenerate").cell(sp.residual).cell(cap).cell(true);
            csv.end_row();
            log << "validate structure: degenerate window (endpoint-only data)\n";
        } else {
            const bool ok = sp.residual <= cap;
            csv.cell("structure").cell("residual").cell(sp.residual).cell(cap).cell(ok);
            csv.end_row();
            log << "validate structure: residual=" << fmt_g17(sp.residual) << " cap=" << fmt_g17(cap)
                << " pass=" << ok << "\n";
            pass = pass && ok;
        }
    }

    if (!has_window) {
        csv.cell("smoothing").cell("beyond-hypothesis").cell(1.0).cell(0.0).cell(true);
        csv.end_row();
        log << "validate smoothing: beyond-hypothesis (no window measure to certify against)\n";
    } else {
        const SmoothedTerminal sm =
            smooth_terminal(s.p.terminal, g, s.p.mode, cfg.num_or("validate", "bandwidth", 0.0));
        const TerminalCertificates& ct = sm.cert;
        double node_max = 0, bound_max = 0;
        bool node_ok = true;
        for (std::size_t j = 0; j < ct.node_observed.size(); ++j) {
            node_max = std::max(node_max, ct.node_observed[j]);
            bound_max = std::max(bound_max, ct.node_bound[j]);
            node_ok = node_ok && ct.node_observed[j] <= 1.05 * ct.node_bound[j] + 1e-12;
        }
        const bool sec_ok = ct.second_observed <= 1.05 * ct.second_bound + 1e-9;
        csv.cell("smoothing").cell("node_max_observed").cell(node_max).cell(1.05 * bound_max + 1e-12);
        csv.cell(node_ok);
        csv.end_row();
        csv.cell("smoothing").cell("curvature").cell(ct.second_observed).cell(1.05 * ct.second_bound + 1e-9);
        csv.cell(sec_ok);
        csv.end_row();
        csv.cell("smoothing").cell("exact").cell(ct.exact ? 1.0 : 0.0).cell(1.0).cell(true);
        csv.end_row();
        log << "validate smoothing: node_max=" << fmt_g17(node_max) << " curvature="
            << fmt_g17(ct.second_observed) << (ct.exact ? " (exact)" : "") << " pass="
            << (node_ok && sec_ok) << "\n";
        pass = pass && node_ok && sec_ok;
    }

    for (const Query& q : s.queries) {
        const Path proj = project(g, q.x);
        const double dist = dist_uniform(q.x, proj, q.x.horizon());
        csv.cell("fixture:" + q.id).cell("projection_distance").cell(dist).cell(0.0).cell(true);
        csv.end_row();
        csv.cell("fixture:" + q.id).cell("mesh_quarter").cell(std::pow(g.mesh(), 0.25)).cell(0.0);
        csv.cell(true);
        csv.end_row();
        if (q.x.mode() != s.p.mode) {
            csv.cell("fixture:" + q.id).cell("beyond-hypothesis").cell(1.0).cell(0.0).cell(true);
            csv.end_row();
            log << "validate fixture " << q.id << ": beyond-hypothesis (path mode differs from the instance)\n";
        }
        log << "validate fixture " << q.id << ": projection_distance=" << fmt_g17(dist)
            << " mesh_quarter=" << fmt_g17(std::pow(g.mesh(), 0.25)) << "\n";
    }

    write_run(dir, "validate", cfg, s.seed, {csv});
    return pass ? 0 : 1;
}

// ---- dispatch -------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"solve",  "converge",  "gridcheck", "modulus", "stability",
                                                "classical", "mc", "dupire", "validate"};
    return names;
}

// `out_override` (CLI flag or output env variable) beats [run] output.
// `dump_field` only applies to `solve`.
inline int run_command(const std::string& command, const Config& cfg, const std::string& out_override,
                       std::ostream& log, const std::string& dump_field = std::string()) {
    Setup s = setup_from(cfg);
    const std::string dir = !out_override.empty() ? out_override : cfg.str_or("run", "output", "out");
    if (command == "solve") {
        const std::string dump =
            !dump_field.empty() ? dump_field : cfg.str_or("solve", "dump_field", "");
        return run_solve(cfg, s, dir, dump, log);
    }
    if (command == "converge") return run_converge(cfg, s, dir, log);
    if (command == "gridcheck") return run_gridcheck(cfg, s, dir, log);
    if (command == "modulus") return run_modulus(cfg, s, dir, log);
    if (command == "stability") return run_stability(cfg, s, dir, log);
    if (command == "classical") return run_classical(cfg, s, dir, log);
    if (command == "mc") {
        s.be = Backend::MC;  // this command always samples
        return run_mc(cfg, s, dir, log);
    }
    if (command == "dupire") return run_dupire(cfg, s, dir, log);
    if (command == "validate") return run_validate(cfg, s, dir, log);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace ppde::cli
