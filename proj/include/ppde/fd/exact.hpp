#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ppde/fd/slab.hpp"
#include "ppde/generator.hpp"

namespace ppde {

// brute-force reference evaluator: recurses through every remaining slab,
// sampling the gluing value on a coarse key mesh and interpolating it onto
// the solver mesh. Cost grows as key_nodes^(remaining slabs); guarded.
struct ExactOptions {
    int key_nodes = 17;
    int mesh_nodes = 129;
    double half_width = 6.0;
    double center = 0.0;
    int max_slabs = 4;
    Fd1Options fd;
};

namespace detail {

inline double exact_value_rec(const Problem& p, const FrozenKey& key, double t, double xt,
                              const ExactOptions& opt) {
    const int n = key.grid.slabs();
    if (key.slab == static_cast<std::size_t>(n)) return p.terminal.on_key(key.grid, key.values, p.mode);

    const double t_next = key.grid.t(key.slab + 1);
    const Mesh1D keymesh(opt.center - opt.half_width, opt.center + opt.half_width, opt.key_nodes);
    std::vector<double> kx(opt.key_nodes), kv(opt.key_nodes);
    for (int j = 0; j < opt.key_nodes; ++j) {
        kx[j] = keymesh.x(j);
        kv[j] = exact_value_rec(p, key.extended(Vd::scalar(kx[j])), t_next, kx[j], opt);
    }

    const Mesh1D mesh(opt.center - opt.half_width, opt.center + opt.half_width, opt.mesh_nodes);
    std::vector<double> term(opt.mesh_nodes);
    for (int k = 0; k < opt.mesh_nodes; ++k) term[k] = interp_linear(kx, kv, mesh.x(k));

    const SlabProblem sp = freeze(p, key);
    const auto row = fd_solve_slab_1d(sp, mesh, std::move(term), t_next, t, opt.fd);
    return mesh.interp(row, xt);
}

}  // namespace detail

inline double exact_value(const Problem& p, const FrozenKey& key, double t, double xt,
                          const ExactOptions& opt = {}) {
    if (p.dim != 1) throw std::invalid_argument("exact: reference recursion handles line problems only");
    if (p.has_general_driver()) throw std::invalid_argument("exact: general drivers need the sampling backend");
    if (key.grid.slabs() > opt.max_slabs)
        throw std::invalid_argument("exact: recursion cost is exponential in slabs; raise max_slabs knowingly");
    if (t < key.entry_time() - key.grid.tol()) throw std::invalid_argument("exact: query before the key entry");
    return detail::exact_value_rec(p, key, t, xt, opt);
}

}  // namespace ppde
