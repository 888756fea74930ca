#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace ppde {

// degree-2 polynomial features over ncoord coordinates: 1, c_i, c_i c_j
inline int poly2_cols(int ncoord) { return 1 + ncoord + ncoord * (ncoord + 1) / 2; }

inline void poly2_row(double* row, const double* c, int ncoord) {
    int k = 0;
    row[k++] = 1.0;
    for (int i = 0; i < ncoord; ++i) row[k++] = c[i];
    for (int i = 0; i < ncoord; ++i)
        for (int j = i; j < ncoord; ++j) row[k++] = c[i] * c[j];
}

// least-squares projection onto the degree-2 basis; the rank-revealing QR
// keeps collinear coordinates (shared or constant summaries) harmless
class Regression {
  public:
    Regression(const double* coords, long paths, int ncoord)
        : phi_(paths, poly2_cols(ncoord)) {
        if (paths < poly2_cols(ncoord))
            throw std::invalid_argument("regression: fewer paths than basis columns");
        std::vector<double> row(static_cast<std::size_t>(poly2_cols(ncoord)));
        for (long p = 0; p < paths; ++p) {
            poly2_row(row.data(), coords + static_cast<std::size_t>(p) * ncoord, ncoord);
            for (int c = 0; c < phi_.cols(); ++c) phi_(p, c) = row[static_cast<std::size_t>(c)];
        }
        qr_.compute(phi_);
    }

    // fitted conditional expectation of y at every path's coordinates
    Eigen::VectorXd predict(const Eigen::VectorXd& y) const { return phi_ * qr_.solve(y); }

  private:
    Eigen::MatrixXd phi_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

}  // namespace ppde
