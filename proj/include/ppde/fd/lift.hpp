#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppde/fd/slab.hpp"
#include "ppde/generator.hpp"
#include "ppde/metrics.hpp"

namespace ppde {

struct LiftOptions {
    int x_nodes = 129;
    double half_width = 0;  // 0: scaled from the coefficient magnitudes
    double center = std::numeric_limits<double>::quiet_NaN();
    Fd1Options fd;
    std::size_t max_layer_nodes = 4'000'000;
};

namespace detail {

inline double fgcd(double a, double b, double tol) {
    while (b > tol) {
        double r = std::fmod(a, b);
        if (r < tol || b - r < tol) r = 0;
        a = b;
        b = r;
    }
    return a;
}

}  // namespace detail

// backward-induction evaluator over slab boundaries. The state at boundary i
// is (committed summary, node value): the summary charge of completed slabs
// lives on a lattice aligned with the value mesh so transports are exact.
class LiftSolver {
public:
    LiftSolver(Problem p, TimeGrid grid, LiftOptions opt = {})
        : p_(std::move(p)), grid_(std::move(grid)), opt_(opt) {
        if (std::abs(grid_.horizon() - p_.horizon) > grid_.tol())
            throw std::invalid_argument("lift: grid horizon does not match the problem");
        if (p_.has_general_driver())
            throw std::invalid_argument("lift: general drivers need the sampling backend");
        if (p_.dim != 1 && p_.dim != 2)
            throw std::invalid_argument("lift: supports line and plane problems");
        setup_summary();
        setup_mesh();
        if (p_.dim == 1)
            solve_line();
        else
            solve_plane();
    }

    const TimeGrid& grid() const { return grid_; }
    const Mesh1D& mesh() const { return mesh_; }

    // value at (t, x): the path is projected onto the grid, its committed
    // summary and entry value select the frozen problem, and the query time
    // either reads a stored boundary or re-solves the tail of the slab
    double value(double t, const Path& x) const {
        if (t < -grid_.tol() || t > grid_.horizon() + grid_.tol())
            throw std::invalid_argument("lift: query time outside the horizon");
        if (x.dim() != p_.dim) throw std::invalid_argument("lift: path dim does not match the problem");
        t = std::min(std::max(t, 0.0), grid_.horizon());

        if (p_.dim == 2) return value_plane(t, x);

        const std::size_t i = boundary_of(t);
        FrozenKey key = key_of(x, i);
        const double c = committed_of(key);
        const double xi = key.entry()[0];
        if (std::abs(t - grid_.t(i)) <= grid_.tol()) return read_layer(layers_[i], c, xi);
        // t is strictly inside slab i: re-solve [t, t_{i+1}] under the slab's freeze
        const SlabProblem sp = freeze(p_, key);
        std::vector<double> row(mesh_.nodes);
        for (int l = 0; l < mesh_.nodes; ++l)
            row[l] = read_layer(layers_[i + 1], c + xi * A_[i] + mesh_.x(l) * B_[i], mesh_.x(l), l);
        const auto phi = fd_solve_slab_1d(sp, mesh_, std::move(row), grid_.t(i + 1), t, opt_.fd);
        return mesh_.interp(phi, x.at1(t));
    }

    // boundary value of the scheme at a key's entry (t = t_i, x = entry)
    double value_at(const FrozenKey& key) const {
        if (p_.dim != 1) throw std::invalid_argument("lift: key reads are line-only");
        if (!key.grid.refines(grid_) || key.grid.slabs() != grid_.slabs())
            throw std::invalid_argument("lift: key grid differs from the solver grid");
        return read_layer(layers_[key.slab], committed_of(key), key.entry()[0]);
    }

    // mesh row of a stored boundary at a fixed committed summary (diagnostics)
    ValueField boundary_field(std::size_t i, double committed = 0.0) const {
        if (i >= layers_.size()) throw std::invalid_argument("lift: boundary index out of range");
        ValueField f;
        f.dim = p_.dim;
        f.time = grid_.t(i);
        f.mx = mesh_;
        if (p_.dim == 1) {
            f.v.resize(mesh_.nodes);
            for (int k = 0; k < mesh_.nodes; ++k) f.v[k] = read_layer(layers_[i], committed, mesh_.x(k), k);
        } else {
            f.my = mesh_;
            f.v = layers_[i].v;
        }
        return f;
    }

    bool summary_active() const { return summary_active_; }
    double quantum() const { return q_; }

private:
    struct Layer {
        int ns = 1;
        double s0 = 0;          // s_k = s0 + k * q * dx
        std::vector<double> v;  // ns rows of nx (line) or nx*ny (plane)
    };

    // --- construction ---

    void setup_summary() {
        const bool coef = p_.coeffs_use_summary;
        const bool term = !p_.terminal.lam.is_zero();
        summary_active_ = coef || term;
        const int n = grid_.slabs();
        A_.assign(n, 0.0);
        B_.assign(n, 0.0);
        wT_ = 0.0;
        if (!summary_active_) return;
        if (p_.dim != 1) throw std::invalid_argument("lift: summary state is supported on the line");
        if (coef && std::abs(p_.summary_dir[0] - 1.0) > 1e-12)
            throw std::invalid_argument("lift: line summaries use the unit direction");
        if (term && std::abs(p_.terminal.dir[0] - 1.0) > 1e-12)
            throw std::invalid_argument("lift: line summaries use the unit direction");
        if (coef && term && !measures_match(p_.lambda, p_.terminal.lam))
            throw std::invalid_argument("lift: coefficient and terminal summaries must share one measure");
        lam_ = coef ? p_.lambda : p_.terminal.lam;
        const ChargeSplit cs = charge_split(lam_, grid_, p_.mode);
        A_ = cs.A;
        B_ = cs.B;
        wT_ = cs.wT;
    }

    static bool measures_match(const AtomicMeasure& a, const AtomicMeasure& b) {
        if (a.atoms().size() != b.atoms().size()) return false;
        for (std::size_t k = 0; k < a.atoms().size(); ++k)
            if (std::abs(a.atoms()[k].first - b.atoms()[k].first) > 1e-12 ||
                std::abs(a.atoms()[k].second - b.atoms()[k].second) > 1e-12)
                return false;
        for (int j = 0; j <= 64; ++j) {
            const double s = a.horizon() * j / 64.0;
            if (std::abs(a.density_at(s) - b.density_at(s)) > 1e-12) return false;
        }
        return true;
    }

    void setup_mesh() {
        double center = opt_.center;
        if (std::isnan(center)) center = p_.x0[0];
        double half = opt_.half_width;
        if (half <= 0) {
            double amax = 0, bmax = 0;
            for (int j = 0; j <= 4; ++j)
                for (const auto& m : p_.models_at(p_.horizon * j / 4.0, 0.0)) {
                    const OpCoef o = op_of(m);
                    for (int i = 0; i < p_.dim; ++i) amax = std::max(amax, o.a.at(i, i));
                    bmax = std::max(bmax, o.b.norm());
                }
            half = 4.0 * (std::sqrt(amax * p_.horizon) + bmax * p_.horizon + 0.25);
        }
        mesh_ = Mesh1D(center - half, center + half, opt_.x_nodes);

        // the summary lattice shares the mesh cell: ds = q * dx
        q_ = 0.0;
        aligned_ = true;
        if (summary_active_) {
            double cmax = 0;
            for (int i = 0; i < grid_.slabs(); ++i) cmax = std::max({cmax, A_[i], B_[i]});
            if (cmax > 0) {
                const double tol = 1e-9 * cmax;
                double g = 0;
                for (int i = 0; i < grid_.slabs(); ++i) {
                    if (A_[i] > tol) g = g == 0 ? A_[i] : detail::fgcd(std::max(g, A_[i]), std::min(g, A_[i]), tol);
                    if (B_[i] > tol) g = g == 0 ? B_[i] : detail::fgcd(std::max(g, B_[i]), std::min(g, B_[i]), tol);
                }
                if (g < cmax * 1e-6) {
                    aligned_ = false;
                    g = cmax / 64.0;
                }
                for (int i = 0; i < grid_.slabs(); ++i) {
                    if (std::abs(A_[i] - std::round(A_[i] / g) * g) > tol) aligned_ = false;
                    if (std::abs(B_[i] - std::round(B_[i] / g) * g) > tol) aligned_ = false;
                }
                q_ = g;
            }
        }
        alpha_.assign(grid_.slabs(), 0);
        beta_.assign(grid_.slabs(), 0);
        munits_.assign(grid_.slabs() + 1, 0);
        if (q_ > 0 && aligned_) {
            for (int i = 0; i < grid_.slabs(); ++i) {
                alpha_[i] = static_cast<std::int64_t>(std::llround(A_[i] / q_));
                beta_[i] = static_cast<std::int64_t>(std::llround(B_[i] / q_));
                munits_[i + 1] = munits_[i] + alpha_[i] + beta_[i];
            }
        }
    }

    // committed-summary bounds at boundary i: the charge mass of completed
    // slabs against the mesh range
    double mass_before(std::size_t i) const {
        double m = 0;
        for (std::size_t j = 0; j < i; ++j) m += A_[j] + B_[j];
        return m;
    }

    Layer make_layer(std::size_t i, std::size_t cells) const {
        Layer L;
        if (summary_active_ && q_ > 0) {
            if (aligned_) {
                L.ns = static_cast<int>(munits_[i]) * (mesh_.nodes - 1) + 1;
            } else {
                L.ns = static_cast<int>(std::ceil(mass_before(i) / q_)) * (mesh_.nodes - 1) + 1;
            }
            L.s0 = mass_before(i) * mesh_.lo;
        }
        const std::size_t total = static_cast<std::size_t>(L.ns) * cells;
        if (total > opt_.max_layer_nodes)
            throw std::invalid_argument("lift: state lattice exceeds max_layer_nodes; lower the level or mesh");
        L.v.assign(total, 0.0);
        return L;
    }

    double layer_ds() const { return q_ * mesh_.dx(); }

    double read_layer(const Layer& L, double s, double xq) const {
        if (L.ns == 1) return mesh_.interp(row_view(L, 0), xq);
        const double r = (s - L.s0) / layer_ds();
        const double rc = std::min(std::max(r, 0.0), static_cast<double>(L.ns - 1));
        int k = std::min(static_cast<int>(rc), L.ns - 2);
        double w = rc - k;
        if (w < 1e-9) w = 0;
        if (w > 1 - 1e-9) {
            w = 0;
            ++k;
        }
        const double lo = mesh_.interp(row_view(L, k), xq);
        if (w == 0) return lo;
        const double hi = mesh_.interp(row_view(L, k + 1), xq);
        return (1 - w) * lo + w * hi;
    }

    // fast path when the x-query is a mesh node
    double read_layer(const Layer& L, double s, double xq, int node) const {
        if (L.ns == 1) return L.v[node];
        const double r = (s - L.s0) / layer_ds();
        const double rc = std::min(std::max(r, 0.0), static_cast<double>(L.ns - 1));
        int k = std::min(static_cast<int>(rc), L.ns - 2);
        double w = rc - k;
        if (w < 1e-9) w = 0;
        if (w > 1 - 1e-9) {
            w = 0;
            ++k;
        }
        const double lo = L.v[static_cast<std::size_t>(k) * mesh_.nodes + node];
        if (w == 0) return lo;
        const double hi = L.v[static_cast<std::size_t>(k + 1) * mesh_.nodes + node];
        (void)xq;
        return (1 - w) * lo + w * hi;
    }

    std::vector<double> row_view(const Layer& L, int is) const {
        const std::size_t nx = static_cast<std::size_t>(mesh_.nodes);
        return std::vector<double>(L.v.begin() + is * nx, L.v.begin() + (is + 1) * nx);
    }

    double s_of(const Layer& L, int is) const { return L.s0 + is * layer_ds(); }

    void solve_line() {
        const int n = grid_.slabs();
        const int nx = mesh_.nodes;
        layers_.assign(n + 1, Layer{});

        // terminal boundary
        {
            Layer L = make_layer(n, nx);
            for (int is = 0; is < L.ns; ++is) {
                const double s = s_of(L, is);
                for (int k = 0; k < nx; ++k) {
                    const double xi = mesh_.x(k);
                    L.v[static_cast<std::size_t>(is) * nx + k] = p_.terminal.g0(s + xi * wT_, Vd::scalar(xi));
                }
            }
            layers_[n] = std::move(L);
        }

        for (int i = n - 1; i >= 0; --i) {
            Layer L = make_layer(i, nx);
            const double t0 = grid_.t(i), t1 = grid_.t(i + 1);

            if (!p_.coeffs_use_summary && aligned_) {
                // one solve per distinct transported base
                const SlabProblem sp = freeze_free(t0, t1);
                const std::int64_t nb = (munits_[i] + alpha_[i]) * (nx - 1) + 1;
                std::vector<std::vector<double>> solved(static_cast<std::size_t>(nb));
                for (std::int64_t ib = 0; ib < nb; ++ib) {
                    std::vector<double> row(nx);
                    for (int l = 0; l < nx; ++l) {
                        const std::int64_t target = ib + static_cast<std::int64_t>(l) * beta_[i];
                        row[l] = layers_[i + 1].v[static_cast<std::size_t>(target) * nx + l];
                    }
                    solved[static_cast<std::size_t>(ib)] = fd_solve_slab_1d(sp, mesh_, std::move(row), t1, t0, opt_.fd);
                }
                for (int is = 0; is < L.ns; ++is)
                    for (int k = 0; k < nx; ++k) {
                        const std::int64_t ib = is + static_cast<std::int64_t>(k) * alpha_[i];
                        L.v[static_cast<std::size_t>(is) * nx + k] = solved[static_cast<std::size_t>(ib)][k];
                    }
            } else {
                // coefficients read the state: one solve per lattice pair
                for (int is = 0; is < L.ns; ++is) {
                    const double c = s_of(L, is);
                    for (int k = 0; k < nx; ++k) {
                        const double xi = mesh_.x(k);
                        const SlabProblem sp = p_.coeffs_use_summary ? freeze_pair(t0, t1, c, xi) : freeze_free(t0, t1);
                        std::vector<double> row(nx);
                        for (int l = 0; l < nx; ++l)
                            row[l] = read_layer(layers_[i + 1], c + xi * A_[i] + mesh_.x(l) * B_[i], mesh_.x(l), l);
                        const auto phi = fd_solve_slab_1d(sp, mesh_, std::move(row), t1, t0, opt_.fd);
                        L.v[static_cast<std::size_t>(is) * nx + k] = phi[k];
                    }
                }
            }
            layers_[i] = std::move(L);
        }
    }

    // --- plane problems: no summary state, dense x-y layers ---

    void solve_plane() {
        const int n = grid_.slabs();
        const int nx = mesh_.nodes;
        layers_.assign(n + 1, Layer{});
        {
            Layer L = make_layer(n, static_cast<std::size_t>(nx) * nx);
            for (int j = 0; j < nx; ++j)
                for (int k = 0; k < nx; ++k) {
                    Vd xy(2);
                    xy[0] = mesh_.x(k);
                    xy[1] = mesh_.x(j);
                    L.v[static_cast<std::size_t>(j) * nx + k] = p_.terminal.g0(0.0, xy);
                }
            layers_[n] = std::move(L);
        }
        for (int i = n - 1; i >= 0; --i) {
            Layer L = make_layer(i, static_cast<std::size_t>(nx) * nx);
            ValueField f;
            f.dim = 2;
            f.time = grid_.t(i + 1);
            f.mx = mesh_;
            f.my = mesh_;
            f.v = layers_[i + 1].v;
            const SlabProblem sp = freeze_free(grid_.t(i), grid_.t(i + 1));
            ValueField out = fd_solve_slab_2d(sp, mesh_, mesh_, std::move(f), grid_.t(i + 1), grid_.t(i), opt_.fd);
            L.v = std::move(out.v);
            layers_[i] = std::move(L);
        }
    }

    double value_plane(double t, const Path& x) const {
        const std::size_t i = boundary_of(t);
        const Vd xt = x.at(t);
        if (std::abs(t - grid_.t(i)) <= grid_.tol()) {
            ValueField f;
            f.dim = 2;
            f.mx = mesh_;
            f.my = mesh_;
            f.v = layers_[i].v;
            return f.interp(xt[0], xt[1]);
        }
        ValueField f;
        f.dim = 2;
        f.time = grid_.t(i + 1);
        f.mx = mesh_;
        f.my = mesh_;
        f.v = layers_[i + 1].v;
        const SlabProblem sp = freeze_free(t, grid_.t(i + 1));
        ValueField out = fd_solve_slab_2d(sp, mesh_, mesh_, std::move(f), grid_.t(i + 1), t, opt_.fd);
        return out.interp(xt[0], xt[1]);
    }

    // --- shared helpers ---

    SlabProblem freeze_free(double t0, double t1) const {
        SlabProblem s;
        s.t0 = t0;
        s.t1 = t1;
        s.dim = p_.dim;
        const auto& pm = p_.models;
        s.models = [pm](double u) { return pm(u, 0.0); };
        return s;
    }

    SlabProblem freeze_pair(double t0, double t1, double c, double xi) const {
        SlabProblem s;
        s.t0 = t0;
        s.t1 = t1;
        s.dim = p_.dim;
        const auto& pm = p_.models;
        const AtomicMeasure lam = lam_;
        s.models = [pm, lam, t0, c, xi](double u) { return pm(u, c + xi * lam.mass_cc(t0, u)); };
        return s;
    }

    std::size_t boundary_of(double t) const {
        if (std::abs(t - grid_.horizon()) <= grid_.tol()) return grid_.slabs();
        const std::size_t i = static_cast<std::size_t>(grid_.slab_index(t));
        return i;
    }

    FrozenKey key_of(const Path& x, std::size_t i) const {
        std::vector<Vd> vals;
        for (std::size_t j = 0; j <= i; ++j) vals.push_back(x.at(grid_.t(j)));
        return FrozenKey(grid_, i, std::move(vals));
    }

    double committed_of(const FrozenKey& key) const {
        if (!summary_active_) return 0.0;
        return key.summary_before(lam_, Vd::scalar(1.0), p_.mode);
    }

    Problem p_;
    TimeGrid grid_;
    LiftOptions opt_;
    Mesh1D mesh_;
    AtomicMeasure lam_ = AtomicMeasure::zero(1.0);
    std::vector<double> A_, B_;
    std::vector<std::int64_t> alpha_, beta_, munits_;
    double wT_ = 0;
    double q_ = 0;
    bool aligned_ = true;
    bool summary_active_ = false;
    std::vector<Layer> layers_;
};

}  // namespace ppde
