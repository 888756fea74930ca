#pragma once

// Plain-text path fixtures. Format (whitespace separated, '#' comments):
//
//   ppde-path 1
//   mode pc|pl
//   horizon <T>
//   dim <d>
//   <time> <v_1> ... <v_d>      (one breakpoint per line, increasing times)
//
// plus a registry of named deterministic query fixtures used by experiments.

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/path.hpp"

namespace ppde {

inline Path read_path_stream(std::istream& in) {
    std::string line;
    std::string magic, mode_s;
    double horizon = -1;
    int version = 0, dim = 0;
    std::vector<double> times, vals;
    int stage = 0;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        if (stage == 0) {
            if (!(ls >> magic >> version)) continue;
            if (magic != "ppde-path" || version != 1)
                throw std::invalid_argument("path file: expected header 'ppde-path 1'");
            stage = 1;
        } else if (stage < 4) {
            std::string key;
            if (!(ls >> key)) continue;
            if (key == "mode") {
                if (!(ls >> mode_s) || (mode_s != "pc" && mode_s != "pl"))
                    throw std::invalid_argument("path file: mode must be 'pc' or 'pl'");
            } else if (key == "horizon") {
                if (!(ls >> horizon) || !(horizon > 0))
                    throw std::invalid_argument("path file: horizon must be > 0");
            } else if (key == "dim") {
                if (!(ls >> dim) || dim < 1) throw std::invalid_argument("path file: dim must be >= 1");
            } else {
                throw std::invalid_argument("path file: unknown header key '" + key + "'");
            }
            if (!mode_s.empty() && horizon > 0 && dim > 0) stage = 4;
        } else {
            double t;
            if (!(ls >> t)) continue;
            times.push_back(t);
            for (int i = 0; i < dim; ++i) {
                double v;
                if (!(ls >> v)) throw std::invalid_argument("path file: breakpoint line needs dim values");
                vals.push_back(v);
            }
        }
    }
    if (stage < 4) throw std::invalid_argument("path file: incomplete header (mode, horizon, dim)");
    if (times.empty()) throw std::invalid_argument("path file: no breakpoints");
    return Path(mode_s == "pc" ? PathMode::PC : PathMode::PL, horizon, dim, std::move(times), std::move(vals));
}

inline Path read_path_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::invalid_argument("path file: cannot open '" + filename + "'");
    return read_path_stream(in);
}

inline void write_path_stream(std::ostream& out, const Path& p) {
    out << "ppde-path 1\n";
    out << "mode " << to_string(p.mode()) << "\n";
    out << "horizon " << fmt_g17(p.horizon()) << "\n";
    out << "dim " << p.dim() << "\n";
    for (std::size_t k = 0; k < p.breakpoints(); ++k) {
        out << fmt_g17(p.time(k));
        const Vd v = p.value(k);
        for (int i = 0; i < p.dim(); ++i) out << " " << fmt_g17(v[i]);
        out << "\n";
    }
}

inline void write_path_file(const std::string& filename, const Path& p) {
    std::ofstream out(filename);
    if (!out) throw std::invalid_argument("path file: cannot write '" + filename + "'");
    write_path_stream(out, p);
}

// Deterministic query fixtures. The same shapes ship as files under
// fixtures/ so external tools can exercise the text format.
inline Path fixture_path(const std::string& name, PathMode mode, double horizon) {
    auto pl_samples = [&](int n, auto fn) {
        std::vector<double> ts, vs;
        for (int k = 0; k <= n; ++k) {
            const double s = horizon * k / n;
            ts.push_back(s);
            vs.push_back(fn(s));
        }
        return Path(mode, horizon, 1, std::move(ts), std::move(vs));
    };
    if (name == "zero") return Path::constant1(mode, horizon, 0.0);
    if (name == "one") return Path::constant1(mode, horizon, 1.0);
    if (name == "ramp") return pl_samples(1, [&](double s) { return s / horizon; });
    if (name == "step")
        return Path(mode, horizon, 1, {0.0, 0.5 * horizon}, {0.0, 1.0});
    if (name == "sine")
        return pl_samples(8, [&](double s) { return std::sin(6.283185307179586 * s / horizon); });
    throw std::invalid_argument("fixture_path: unknown fixture '" + name + "'");
}

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names{"zero", "one", "ramp", "step", "sine"};
    return names;
}

}  // namespace ppde
