#pragma once

// Partitions of [0, T] and nested refinement sequences. A grid with points
// t_0 < ... < t_n carries the left/right rounding maps eta / eta_plus used to
// freeze path data on half-open slabs [t_i, t_{i+1}).

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/math.hpp"

namespace ppde {

class TimeGrid {
  public:
    explicit TimeGrid(std::vector<double> pts) : pts_(std::move(pts)) {
        if (pts_.size() < 2) throw std::invalid_argument("TimeGrid: need at least {0, T}");
        if (pts_.front() != 0.0) throw std::invalid_argument("TimeGrid: first point must be 0");
        for (std::size_t i = 1; i < pts_.size(); ++i)
            if (!(pts_[i] > pts_[i - 1])) throw std::invalid_argument("TimeGrid: points must strictly increase");
    }

    static TimeGrid uniform(double horizon, int slabs) {
        if (slabs < 1) throw std::invalid_argument("TimeGrid::uniform: slabs must be >= 1");
        if (!(horizon > 0)) throw std::invalid_argument("TimeGrid::uniform: horizon must be > 0");
        std::vector<double> p(static_cast<std::size_t>(slabs) + 1);
        for (int i = 0; i <= slabs; ++i) p[static_cast<std::size_t>(i)] = horizon * i / slabs;
        p.back() = horizon;
        return TimeGrid(std::move(p));
    }

    const std::vector<double>& points() const { return pts_; }
    double t(int i) const { return pts_[static_cast<std::size_t>(i)]; }
    int slabs() const { return static_cast<int>(pts_.size()) - 1; }
    double horizon() const { return pts_.back(); }

    // |pi| = largest slab length
    double mesh() const {
        double m = 0;
        for (std::size_t i = 1; i < pts_.size(); ++i) m = std::max(m, pts_[i] - pts_[i - 1]);
        return m;
    }

    // Absolute tolerance for "t is this grid point" comparisons.
    double tol() const { return 1e-12 * horizon(); }

    bool contains_time(double s) const {
        const int i = nearest_index(s);
        return std::abs(pts_[static_cast<std::size_t>(i)] - s) <= tol();
    }

    // Index i with t in [t_i, t_{i+1}); clamps into [0, slabs()-1], so t = T
    // maps to the last slab. Times within tol() of a grid point snap to it.
    int slab_index(double s) const {
        check_range(s);
        const int near = nearest_index(s);
        if (std::abs(pts_[static_cast<std::size_t>(near)] - s) <= tol()) return std::min(near, slabs() - 1);
        int lo = 0, hi = slabs();
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (pts_[static_cast<std::size_t>(mid)] <= s)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    // eta(s) = t_i for s in [t_i, t_{i+1}), and eta(T) = T.
    double eta(double s) const {
        check_range(s);
        if (s >= horizon() - tol()) return horizon();
        return pts_[static_cast<std::size_t>(slab_index(s))];
    }

    // eta_plus(s) = t_{i+1} for s in (t_i, t_{i+1}], and eta_plus(0) = 0.
    // A grid point t_i > 0 closes the slab ending at it, so eta_plus(t_i) = t_i.
    double eta_plus(double s) const {
        check_range(s);
        if (s <= tol()) return 0.0;
        const int near = nearest_index(s);
        if (std::abs(pts_[static_cast<std::size_t>(near)] - s) <= tol())
            return pts_[static_cast<std::size_t>(near)];
        return pts_[static_cast<std::size_t>(slab_index(s) + 1)];
    }

    // Every point of `coarser` appears in this grid (within tol).
    bool refines(const TimeGrid& coarser) const {
        if (std::abs(horizon() - coarser.horizon()) > tol()) return false;
        for (double p : coarser.points())
            if (!contains_time(p)) return false;
        return true;
    }

  private:
    void check_range(double s) const {
        if (s < -tol() || s > horizon() + tol())
            throw std::invalid_argument("TimeGrid: time " + std::to_string(s) + " outside [0, T]");
    }

    // Index of the grid point closest to s (binary search plus neighbor check).
    int nearest_index(double s) const {
        auto it = std::lower_bound(pts_.begin(), pts_.end(), s);
        if (it == pts_.end()) return slabs();
        int i = static_cast<int>(it - pts_.begin());
        if (i > 0 && s - pts_[static_cast<std::size_t>(i - 1)] < pts_[static_cast<std::size_t>(i)] - s) --i;
        return i;
    }

    std::vector<double> pts_;
};

// Nested family of grids indexed by level >= 1. The defaults refine each slab
// into `ratio` equal parts per level, so level L has ratio^(L-1) slabs and
// level L+1's points contain level L's.
class GridSequence {
  public:
    GridSequence(double horizon, int ratio, std::string name)
        : horizon_(horizon), ratio_(ratio), name_(std::move(name)) {
        if (!(horizon > 0)) throw std::invalid_argument("GridSequence: horizon must be > 0");
        if (ratio < 2) throw std::invalid_argument("GridSequence: refinement ratio must be >= 2");
        // nesting and mesh decay are structural for uniform power grids; spot
        // check the first few levels anyway so custom edits get caught
        for (int l = 1; l <= 3; ++l) {
            if (!grid(l + 1).refines(grid(l)))
                throw std::logic_error("GridSequence: level " + std::to_string(l + 1) +
                                       " does not refine level " + std::to_string(l));
        }
    }

    static GridSequence dyadic(double horizon) { return GridSequence(horizon, 2, "dyadic"); }
    static GridSequence triadic(double horizon) { return GridSequence(horizon, 3, "triadic"); }

    TimeGrid grid(int level) const {
        if (level < 1) throw std::invalid_argument("GridSequence: level must be >= 1");
        int slabs = 1;
        for (int l = 1; l < level; ++l) {
            if (slabs > (1 << 24) / ratio_) throw std::invalid_argument("GridSequence: level too deep");
            slabs *= ratio_;
        }
        return TimeGrid::uniform(horizon_, slabs);
    }

    double horizon() const { return horizon_; }
    int ratio() const { return ratio_; }
    const std::string& name() const { return name_; }

  private:
    double horizon_;
    int ratio_;
    std::string name_;
};

}  // namespace ppde
