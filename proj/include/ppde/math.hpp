#pragma once

// Small numeric helpers shared across the library: fixed-capacity vectors for
// state dimensions up to 3, a seedable normal RNG stream, interpolation and
// line-fit utilities, and a stable config hash.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppde {

inline constexpr int kMaxDim = 3;

struct Vd {
    int n = 1;
    std::array<double, kMaxDim> c{};

    Vd() = default;
    explicit Vd(int dim) : n(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Vd: dim must be in [1,3]");
    }
    static Vd scalar(double x) {
        Vd v(1);
        v.c[0] = x;
        return v;
    }
    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }
    double norm() const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += c[i] * c[i];
        return std::sqrt(s);
    }
};

inline Vd operator-(const Vd& a, const Vd& b) {
    Vd r(a.n);
    for (int i = 0; i < a.n; ++i) r.c[i] = a.c[i] - b.c[i];
    return r;
}

inline Vd operator+(const Vd& a, const Vd& b) {
    Vd r(a.n);
    for (int i = 0; i < a.n; ++i) r.c[i] = a.c[i] + b.c[i];
    return r;
}

inline Vd operator*(double s, const Vd& a) {
    Vd r(a.n);
    for (int i = 0; i < a.n; ++i) r.c[i] = s * a.c[i];
    return r;
}

inline double dot(const Vd& a, const Vd& b) {
    double s = 0;
    for (int i = 0; i < a.n; ++i) s += a.c[i] * b.c[i];
    return s;
}

// Symmetric d x d matrix, d <= 3, dense row-major storage.
struct Sym {
    int n = 1;
    std::array<double, kMaxDim * kMaxDim> c{};

    Sym() = default;
    explicit Sym(int dim) : n(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Sym: dim must be in [1,3]");
    }
    static Sym scalar(double x) {
        Sym m(1);
        m.c[0] = x;
        return m;
    }
    static Sym identity(int dim) {
        Sym m(dim);
        for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
        return m;
    }
    double& at(int i, int j) { return c[i * kMaxDim + j]; }
    double at(int i, int j) const { return c[i * kMaxDim + j]; }
    void set(int i, int j, double v) {
        c[i * kMaxDim + j] = v;
        c[j * kMaxDim + i] = v;
    }
    double trace() const {
        double s = 0;
        for (int i = 0; i < n; ++i) s += at(i, i);
        return s;
    }
    Vd mv(const Vd& v) const {
        Vd r(n);
        for (int i = 0; i < n; ++i) {
            double s = 0;
            for (int j = 0; j < n; ++j) s += at(i, j) * v[j];
            r[i] = s;
        }
        return r;
    }
    // A A^T = A^2 for symmetric A; the diffusion-to-second-order-coefficient map
    Sym square() const {
        Sym r(n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double s = 0;
                for (int k = 0; k < n; ++k) s += at(i, k) * at(k, j);
                r.set(i, j, s);
            }
        return r;
    }
};

inline Sym operator-(const Sym& a, const Sym& b) {
    Sym r(a.n);
    for (int i = 0; i < a.n; ++i)
        for (int j = 0; j < a.n; ++j) r.at(i, j) = a.at(i, j) - b.at(i, j);
    return r;
}

// Frobenius inner product <A, B> = sum_ij A_ij B_ij.
inline double frob(const Sym& a, const Sym& b) {
    double s = 0;
    for (int i = 0; i < a.n; ++i)
        for (int j = 0; j < a.n; ++j) s += a.at(i, j) * b.at(i, j);
    return s;
}

// Deterministic stream of uniforms/normals. Box-Muller rather than
// std::normal_distribution so sequences are identical across standard
// libraries; (seed, block) pairs give reproducible independent streams.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t block = 0) : gen_(mix(seed, block)) {}

    double uniform() {
        // top 53 bits -> (0,1)
        const std::uint64_t u = gen_() >> 11;
        return (static_cast<double>(u) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t raw() { return gen_(); }

  private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t block) {
        // splitmix64 finalizer over the pair
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (block + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0;
};

// Piecewise-linear interpolation on a sorted abscissa vector; constant
// extrapolation outside the range.
inline double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (xs.empty()) throw std::invalid_argument("interp_linear: empty table");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double x0 = xs[j - 1], x1 = xs[j];
    const double w = (x - x0) / (x1 - x0);
    return (1.0 - w) * ys[j - 1] + w * ys[j];
}

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double residual = 0;  // RMS residual
};

// Least-squares line through (x_i, y_i).
inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_line: need at least two points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-300) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (f.intercept + f.slope * xs[i]);
        rss += e * e;
    }
    f.residual = std::sqrt(rss / n);
    return f;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// Shortest decimal form that round-trips a double; used by all CSV writers so
// identical runs produce identical bytes.
inline std::string fmt_g17(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return std::string(buf);
}

inline bool approx_eq(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace ppde
