#include "tabdc/matrix.hpp"

#include <cmath>

#include "tabdc/errors.hpp"

namespace tabdc {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const double* a, std::size_t n) {
    return std::sqrt(dot(a, a, n));
}

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_spd: shape mismatch");

    for (int attempt = 0; attempt < 6; ++attempt) {
        Matrix l = a;
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
            double d = l(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
            if (d <= 0.0 || !std::isfinite(d)) {
                ok = false;
                break;
            }
            l(j, j) = std::sqrt(d);
            for (std::size_t i = j + 1; i < n; ++i) {
                double s = l(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
                l(i, j) = s / l(j, j);
            }
        }
        if (!ok) {
            // jitter and retry
            double eps = std::pow(10.0, attempt) * 1e-10;
            for (std::size_t i = 0; i < n; ++i) a(i, i) += eps;
            continue;
        }
        // forward then backward substitution
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
            y[i] = s / l(i, i);
        }
        std::vector<double> x(n);
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
            x[ii] = s / l(ii, ii);
        }
        return x;
    }
    throw NumericalError("solve_spd: matrix is not positive definite");
}

}  // namespace tabdc
