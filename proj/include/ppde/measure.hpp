#pragma once

// Finite nonnegative measures on [0, T] of the form
//   lambda = sum_k w_k * delta_{tau_k} + rho(s) ds
// with rho sampled piecewise-linearly on a uniform fine grid. This is the
// weight data used for running-integral summaries, terminal sensitivities and
// the jump-distance integral term.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ppde/math.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

class AtomicMeasure {
  public:
    explicit AtomicMeasure(double horizon) : horizon_(horizon) {
        if (!(horizon > 0)) throw std::invalid_argument("AtomicMeasure: horizon must be > 0");
    }

    static AtomicMeasure zero(double horizon) { return AtomicMeasure(horizon); }

    static AtomicMeasure lebesgue(double horizon, double scale = 1.0) {
        AtomicMeasure m(horizon);
        m.set_constant_density(scale);
        return m;
    }

    AtomicMeasure& add_atom(double time, double weight) {
        if (time < -tol() || time > horizon_ + tol())
            throw std::invalid_argument("AtomicMeasure: atom time outside [0, T]");
        if (weight < 0) throw std::invalid_argument("AtomicMeasure: atom weight must be >= 0");
        atoms_.emplace_back(std::min(std::max(time, 0.0), horizon_), weight);
        std::sort(atoms_.begin(), atoms_.end());
        return *this;
    }

    AtomicMeasure& set_constant_density(double value) {
        if (value < 0) throw std::invalid_argument("AtomicMeasure: density must be >= 0");
        density_ = {value, value};
        return *this;
    }

    // Samples of rho at K+1 equally spaced points on [0, T], joined linearly.
    AtomicMeasure& set_density_samples(std::vector<double> samples) {
        if (samples.size() < 2) throw std::invalid_argument("AtomicMeasure: need >= 2 density samples");
        for (double v : samples)
            if (v < 0) throw std::invalid_argument("AtomicMeasure: density must be >= 0");
        density_ = std::move(samples);
        return *this;
    }

    double horizon() const { return horizon_; }
    double tol() const { return 1e-12 * horizon_; }
    const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
    bool has_density() const {
        for (double v : density_)
            if (v > 0) return true;
        return false;
    }
    bool is_zero() const { return atoms_.empty() && !has_density(); }

    double atom_at(double time) const {
        double w = 0;
        for (const auto& [tau, wt] : atoms_)
            if (std::abs(tau - time) <= tol()) w += wt;
        return w;
    }

    double density_at(double s) const {
        if (density_.empty()) return 0.0;
        const double u = std::min(std::max(s / horizon_, 0.0), 1.0) * (density_.size() - 1);
        const std::size_t j = std::min(static_cast<std::size_t>(u), density_.size() - 2);
        const double w = u - static_cast<double>(j);
        return (1.0 - w) * density_[j] + w * density_[j + 1];
    }

    // Measure of an interval from a to b with configurable endpoint closure.
    double mass(double a, double b, bool include_a, bool include_b) const {
        if (b < a) return 0.0;
        double m = density_integral(a, b);
        for (const auto& [tau, wt] : atoms_) {
            const bool at_a = std::abs(tau - a) <= tol();
            const bool at_b = std::abs(tau - b) <= tol();
            if (at_a) {
                if (include_a) m += wt;
            } else if (at_b) {
                if (include_b) m += wt;
            } else if (tau > a && tau < b) {
                m += wt;
            }
        }
        return m;
    }

    double mass_co(double a, double b) const { return mass(a, b, true, false); }
    double mass_cc(double a, double b) const { return mass(a, b, true, true); }
    double total() const { return mass_cc(0.0, horizon_); }

    // density-only mass of [a, b], exact for the piecewise-linear samples
    double density_mass(double a, double b) const {
        return density_integral(std::max(0.0, a), std::min(horizon_, b));
    }

    // integral of f against the measure over [a, b] (closed ends by default).
    // `hints` lists additional subdivision times (path breakpoints, kinks);
    // each smooth piece uses composite Simpson against the sampled density.
    double integrate(const std::function<double(double)>& f, double a, double b,
                     const std::vector<double>& hints = {}, bool include_a = true,
                     bool include_b = true) const {
        if (b < a) return 0.0;
        double m = 0;
        for (const auto& [tau, wt] : atoms_) {
            const bool at_a = std::abs(tau - a) <= tol();
            const bool at_b = std::abs(tau - b) <= tol();
            const bool inside = tau > a && tau < b;
            if ((at_a && include_a) || (at_b && include_b) || (!at_a && !at_b && inside)) m += wt * f(tau);
        }
        if (has_density()) {
            std::vector<double> cuts{a, b};
            for (double h : hints)
                if (h > a + tol() && h < b - tol()) cuts.push_back(h);
            if (density_.size() > 2) {
                const double step = horizon_ / (density_.size() - 1);
                for (std::size_t k = 1; k + 1 < density_.size(); ++k) {
                    const double s = step * static_cast<double>(k);
                    if (s > a + tol() && s < b - tol()) cuts.push_back(s);
                }
            }
            std::sort(cuts.begin(), cuts.end());
            for (std::size_t i = 1; i < cuts.size(); ++i) m += simpson_piece(f, cuts[i - 1], cuts[i]);
        }
        return m;
    }

    // Per-node weights of the projected-path integral: with x_j the grid
    // values, int Pi[x] dlambda = sum_j w_j x_j. PC mode charges [t_j, t_{j+1})
    // to node j and {T} to node n; PL mode uses hat-function weights.
    std::vector<double> node_weights(const TimeGrid& g, bool piecewise_constant) const {
        if (std::abs(g.horizon() - horizon_) > tol())
            throw std::invalid_argument("AtomicMeasure: grid horizon mismatch");
        const int n = g.slabs();
        std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
        if (piecewise_constant) {
            for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = mass_co(g.t(j), g.t(j + 1));
            w[static_cast<std::size_t>(n)] = atom_at(horizon_);
        } else {
            for (int j = 0; j <= n; ++j) {
                const double tj = g.t(j);
                auto hat = [&](double s) {
                    if (j > 0 && s >= g.t(j - 1) - tol() && s <= tj)
                        return (s - g.t(j - 1)) / (tj - g.t(j - 1));
                    if (j < n && s >= tj && s <= g.t(j + 1) + tol())
                        return (g.t(j + 1) - s) / (g.t(j + 1) - tj);
                    return 0.0;
                };
                // hat vanishes at the far ends, so closed-interval atom handling
                // cannot double count across adjacent nodes
                const double lo = j > 0 ? g.t(j - 1) : 0.0;
                const double hi = j < n ? g.t(j + 1) : horizon_;
                w[static_cast<std::size_t>(j)] = integrate(hat, lo, hi, {tj}, true, true);
            }
        }
        return w;
    }

    // Largest level-capped grid must carry every atom (nested sequences make
    // the finest level the binding check).
    void validate_atoms_on(const GridSequence& seq, int max_level) const {
        const TimeGrid g = seq.grid(max_level);
        for (const auto& [tau, wt] : atoms_) {
            (void)wt;
            if (!g.contains_time(tau))
                throw std::invalid_argument("AtomicMeasure: atom at " + std::to_string(tau) +
                                            " is not a grid point of any level <= " + std::to_string(max_level));
        }
    }

  private:
    double density_integral(double a, double b) const {
        if (!has_density() || b <= a) return 0.0;
        // antiderivative of the piecewise-linear density
        auto prim = [&](double s) {
            s = std::min(std::max(s, 0.0), horizon_);
            const double step = horizon_ / (density_.size() - 1);
            const std::size_t j = std::min(static_cast<std::size_t>(s / step), density_.size() - 2);
            double acc = 0;
            for (std::size_t k = 0; k < j; ++k) acc += 0.5 * (density_[k] + density_[k + 1]) * step;
            const double s0 = step * static_cast<double>(j);
            const double w = (s - s0) / step;
            const double v0 = density_[j];
            const double vs = (1.0 - w) * density_[j] + w * density_[j + 1];
            return acc + 0.5 * (v0 + vs) * (s - s0);
        };
        return prim(b) - prim(a);
    }

    double simpson_piece(const std::function<double(double)>& f, double a, double b) const {
        if (b - a <= tol()) return 0.0;
        const int sub = 8;
        double acc = 0;
        const double h = (b - a) / sub;
        for (int k = 0; k < sub; ++k) {
            const double lo = a + h * k, hi = lo + h, mid = 0.5 * (lo + hi);
            acc += (h / 6.0) * (f(lo) * density_at(lo) + 4.0 * f(mid) * density_at(mid) + f(hi) * density_at(hi));
        }
        return acc;
    }

    double horizon_;
    std::vector<std::pair<double, double>> atoms_;
    std::vector<double> density_;  // empty = no density
};

}  // namespace ppde
