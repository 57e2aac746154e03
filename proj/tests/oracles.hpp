#pragma once

// Independent reference implementations used to pin expected test values.
// Everything here is deliberately written as plain loops over dense storage,
// with no code shared with the library paths under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include "mixscribe/filtering.hpp"
#include "mixscribe/matrix.hpp"

namespace oracle {

using mixscribe::Matrix;

inline Matrix matmul(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

// X^T A by triple loop
inline Matrix gram(const Matrix& x, const Matrix& a)
{
    Matrix out(x.cols(), a.cols());
    for (std::size_t t = 0; t < x.cols(); ++t)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            double s = 0.0;
            for (std::size_t m = 0; m < x.rows(); ++m) s += x(m, t) * a(m, c);
            out(t, c) = s;
        }
    return out;
}

inline double is_divergence(const Matrix& y, const Matrix& v, double eps)
{
    double total = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c)
        for (std::size_t r = 0; r < y.rows(); ++r) {
            const double x = std::max(y(r, c), eps);
            const double d = std::max(v(r, c), eps);
            total += x / d - std::log(x / d) - 1.0;
        }
    return total;
}

// One dense multiplicative activation update:
// H <- H .* (X^T ((XH)^-2 .* Y)) / (X^T (XH)^-1), denominators floored at eps
inline Matrix is_update_h(const Matrix& y, const Matrix& x, const Matrix& h, double eps)
{
    const Matrix v = matmul(x, h);
    Matrix out(h.rows(), h.cols());
    for (std::size_t t = 0; t < h.rows(); ++t)
        for (std::size_t c = 0; c < h.cols(); ++c) {
            double num = 0.0, den = 0.0;
            for (std::size_t m = 0; m < x.rows(); ++m) {
                const double fl = std::max(v(m, c), eps);
                num += x(m, t) * y(m, c) / (fl * fl);
                den += x(m, t) / fl;
            }
            out(t, c) = h(t, c) * num / std::max(den, eps);
        }
    return out;
}

// One dense multiplicative update of the last `r_width` columns of X
inline Matrix is_update_xbar(const Matrix& y, const Matrix& x, const Matrix& h,
                             std::size_t r_width, double eps)
{
    const Matrix v = matmul(x, h);
    Matrix out = x;
    const std::size_t off = x.cols() - r_width;
    for (std::size_t j = 0; j < r_width; ++j)
        for (std::size_t m = 0; m < x.rows(); ++m) {
            double num = 0.0, den = 0.0;
            for (std::size_t c = 0; c < h.cols(); ++c) {
                const double fl = std::max(v(m, c), eps);
                num += y(m, c) / (fl * fl) * h(off + j, c);
                den += h(off + j, c) / fl;
            }
            out(m, off + j) = x(m, off + j) * num / std::max(den, eps);
        }
    return out;
}

// Power spectrum of one frame by direct DFT evaluation
inline std::vector<double> dft_power(const std::vector<double>& frame,
                                     const std::vector<double>& window)
{
    const std::size_t n = frame.size();
    std::vector<double> power(n / 2 + 1);
    for (std::size_t m = 0; m <= n / 2; ++m) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double ang = -2.0 * 3.141592653589793238462643 * static_cast<double>(k)
                               * static_cast<double>(m) / static_cast<double>(n);
            acc += frame[k] * window[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        power[m] = std::norm(acc);
    }
    return power;
}

// Grayscale opening by the translate-fitting characterization: for every
// anchor position, take the min of the image over the clipped kernel
// translate and push it back to every cell the translate covers.
inline Matrix opening_by_translates(const Matrix& in, const mixscribe::LineKernel& kernel)
{
    const long rows = static_cast<long>(in.rows());
    const long cols = static_cast<long>(in.cols());
    Matrix out(in.rows(), in.cols());
    for (long ar = 0; ar < rows; ++ar)
        for (long ac = 0; ac < cols; ++ac) {
            double m = std::numeric_limits<double>::infinity();
            std::vector<std::pair<long, long>> covered;
            for (const auto& [dr, dc] : kernel.cells) {
                const long r = ar + dr, c = ac + dc;
                if (r < 0 || r >= rows || c < 0 || c >= cols) continue;
                covered.push_back({r, c});
                m = std::min(m, in(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
            }
            for (const auto& [r, c] : covered) {
                double& o = out(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
                o = std::max(o, m);
            }
        }
    return out;
}

// 2-D Gaussian blur by direct summation with in-bounds renormalization
inline Matrix blur_2d(const Matrix& in, double sigma)
{
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (long j = -radius; j <= radius; ++j) {
        k[j + radius] = std::exp(-0.5 * (j / sigma) * (j / sigma));
        sum += k[j + radius];
    }
    for (double& v : k) v /= sum;

    const long rows = static_cast<long>(in.rows());
    const long cols = static_cast<long>(in.cols());
    Matrix out(in.rows(), in.cols());
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) {
            double acc = 0.0, w = 0.0;
            for (long i = -radius; i <= radius; ++i)
                for (long j = -radius; j <= radius; ++j) {
                    const long rr = r + i, cc = c + j;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    const double kk = k[i + radius] * k[j + radius];
                    acc += kk * in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                    w += kk;
                }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc / w;
        }
    return out;
}

inline double max_abs_rel_diff(const Matrix& a, const Matrix& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data()[i], y = b.data()[i];
        const double denom = std::max({std::abs(x), std::abs(y), 1e-300});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

} // namespace oracle
