#pragma once

// One query surface over the three solution backends: the layered lattice
// solver (Lift), the brute-force key recursion (Exact), and the sampling
// estimator (MC). Every query returns a value plus a standard error -- zero
// for the deterministic backends -- so ladder diagnostics can treat backends
// interchangeably. Lift solves a whole grid at once, so solvers are cached
// per grid and reused across queries on the same level.

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ppde/fd/exact.hpp"
#include "ppde/fd/lift.hpp"
#include "ppde/generator.hpp"
#include "ppde/mc/bsde.hpp"
#include "ppde/path.hpp"
#include "ppde/time_grid.hpp"

namespace ppde {

enum class Backend { Lift, Exact, MC };

inline const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Lift: return "lift";
        case Backend::Exact: return "exact";
        case Backend::MC: return "mc";
    }
    return "?";
}

struct EvalResult {
    double value = 0;
    double se = 0;
};

struct EvalOptions {
    LiftOptions lift;
    ExactOptions exact;
    McOptions mc;
};

class Evaluator {
public:
    Evaluator(Problem p, Backend b, EvalOptions opt = {})
        : p_(std::move(p)), backend_(b), opt_(std::move(opt)) {}

    Backend backend() const { return backend_; }
    const Problem& problem() const { return p_; }
    const EvalOptions& options() const { return opt_; }

    EvalResult value(const TimeGrid& grid, double t, const Path& x) const {
        switch (backend_) {
            case Backend::Lift:
                return {lift(grid).value(t, x), 0.0};
            case Backend::Exact: {
                const FrozenKey key = project_key(grid, t, x);
                return {exact_value(p_, key, std::max(t, 0.0), x.at1(std::max(std::min(t, grid.horizon()), 0.0)), opt_.exact), 0.0};
            }
            case Backend::MC: {
                const McValue v = mc_value(p_, grid, t, x, opt_.mc);
                return {v.value, v.se};
            }
        }
        throw std::logic_error("evaluator: unknown backend");
    }

    // the cached grid solver, for boundary-field dumps and derivative work
    const LiftSolver& lift(const TimeGrid& grid) const {
        if (backend_ != Backend::Lift) throw std::logic_error("evaluator: grid solver is only kept for the lift backend");
        auto it = cache_.find(grid.slabs());
        if (it != cache_.end() && same_points(it->second->grid(), grid)) return *it->second;
        auto solver = std::make_shared<LiftSolver>(p_, grid, opt_.lift);
        cache_[grid.slabs()] = solver;
        return *cache_[grid.slabs()];
    }

    void clear_cache() const { cache_.clear(); }

private:
    // node values of the observed path along the grid prefix through time t
    FrozenKey project_key(const TimeGrid& grid, double t, const Path& x) const {
        if (std::abs(grid.horizon() - p_.horizon) > grid.tol())
            throw std::invalid_argument("evaluator: grid horizon does not match the problem");
        const std::size_t i = t >= grid.horizon() - grid.tol()
                                  ? static_cast<std::size_t>(grid.slabs())
                                  : static_cast<std::size_t>(grid.slab_index(std::max(t, 0.0)));
        std::vector<Vd> vals;
        vals.reserve(i + 1);
        for (std::size_t j = 0; j <= i; ++j) vals.push_back(x.at(grid.t(j)));
        return FrozenKey(grid, i, std::move(vals));
    }

    static bool same_points(const TimeGrid& a, const TimeGrid& b) {
        if (a.slabs() != b.slabs()) return false;
        for (std::size_t j = 0; j < a.points().size(); ++j)
            if (std::abs(a.points()[j] - b.points()[j]) > a.tol()) return false;
        return true;
    }

    Problem p_;
    Backend backend_;
    EvalOptions opt_;
    mutable std::map<int, std::shared_ptr<LiftSolver>> cache_;
};

}  // namespace ppde
