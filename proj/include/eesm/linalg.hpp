#pragma once

// Small dense complex matrices (MIMO sizes, at most a few antennas per side).
// Row-major storage, value semantics, O(n^3) kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eesm/errors.hpp"

namespace eesm::linalg {

using cplx = std::complex<double>;

class CMatrix {
public:
    /// Empty placeholder (0 x 0). Every other constructor enforces rows, cols >= 1.
    CMatrix() = default;

    CMatrix(std::size_t rows, std::size_t cols, cplx fill = {}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            throw DimensionError("CMatrix: rows and cols must be >= 1");
        }
    }

    CMatrix(std::initializer_list<std::initializer_list<cplx>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        if (rows_ == 0 || cols_ == 0) {
            throw DimensionError("CMatrix: empty initializer");
        }
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) {
                throw DimensionError("CMatrix: ragged initializer");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static CMatrix diagonal(std::span<const double> d) {
        CMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }
    bool square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    CMatrix col(std::size_t c) const {
        CMatrix out(rows_, 1);
        for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
        return out;
    }

    CMatrix row(std::size_t r) const {
        CMatrix out(1, cols_);
        for (std::size_t c = 0; c < cols_; ++c) out(0, c) = (*this)(r, c);
        return out;
    }

    /// Leading `n` columns.
    CMatrix left_cols(std::size_t n) const {
        if (n == 0 || n > cols_) throw DimensionError("left_cols: bad column count");
        CMatrix out(rows_, n);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < n; ++c) out(r, c) = (*this)(r, c);
        return out;
    }

    CMatrix& operator+=(const CMatrix& o) {
        require_same_shape(o, "operator+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    CMatrix& operator-=(const CMatrix& o) {
        require_same_shape(o, "operator-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    CMatrix& operator*=(cplx s) noexcept {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
    friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
    friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
    friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }
    friend CMatrix operator-(CMatrix a) { return a *= -1.0; }

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    void require_same_shape(const CMatrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) {
            throw DimensionError(std::string(op) + ": shape mismatch");
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

inline CMatrix matmul(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    CMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) { return matmul(a, b); }

/// Hermitian transpose, written (.)* in the signal-model algebra.
inline CMatrix conj_transpose(const CMatrix& a) {
    CMatrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = std::conj(a(i, j));
    return out;
}

inline cplx trace(const CMatrix& a) {
    if (!a.square()) throw DimensionError("trace: matrix is not square");
    cplx t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
    return t;
}

inline double frobenius_norm(const CMatrix& a) {
    double s = 0.0;
    for (const auto& v : a.data()) s += std::norm(v);
    return std::sqrt(s);
}

inline double max_abs(const CMatrix& a) {
    double m = 0.0;
    for (const auto& v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

/// Gauss-Jordan elimination with partial pivoting. A pivot smaller than
/// 1e-14 times the largest input magnitude is reported as singular.
inline CMatrix inverse(const CMatrix& a) {
    if (!a.square()) throw DimensionError("inverse: matrix is not square");
    const std::size_t n = a.rows();
    const double scale = max_abs(a);
    if (scale == 0.0) throw SingularMatrixError("inverse: zero matrix");
    const double pivot_floor = 1e-14 * scale;

    CMatrix m = a;
    CMatrix inv = CMatrix::identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        double best = std::abs(m(c, c));
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(m(r, c)) > best) {
                best = std::abs(m(r, c));
                p = r;
            }
        }
        if (best < pivot_floor) {
            throw SingularMatrixError("inverse: pivot " + std::to_string(best) + " below threshold");
        }
        if (p != c) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(p, j), m(c, j));
                std::swap(inv(p, j), inv(c, j));
            }
        }
        const cplx d = 1.0 / m(c, c);
        for (std::size_t j = 0; j < n; ++j) {
            m(c, j) *= d;
            inv(c, j) *= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const cplx f = m(r, c);
            if (f == cplx{}) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(c, j);
                inv(r, j) -= f * inv(c, j);
            }
        }
    }
    return inv;
}

/// Thin SVD: a = U * diag(S) * V*, with k = min(rows, cols) singular values
/// sorted descending, U (rows x k) and V (cols x k) with orthonormal columns.
/// Each column of V is phase-normalised so its largest-magnitude entry is
/// real and non-negative.
struct Svd {
    CMatrix U;
    std::vector<double> S;
    CMatrix V;
};

inline constexpr int kSvdMaxSweeps = 64;
inline constexpr double kSvdTolerance = 1e-12;

namespace detail {

// One-sided Jacobi on the columns of a tall (rows >= cols) matrix.
inline Svd jacobi_svd_tall(const CMatrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    CMatrix work = a;
    CMatrix v = CMatrix::identity(n);

    bool converged = n < 2;
    for (int sweep = 0; sweep < kSvdMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0;
                double beta = 0.0;
                cplx gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += std::norm(work(i, p));
                    beta += std::norm(work(i, q));
                    gamma += std::conj(work(i, p)) * work(i, q);
                }
                const double g = std::abs(gamma);
                if (alpha == 0.0 || beta == 0.0 || g <= kSvdTolerance * std::sqrt(alpha * beta)) continue;
                converged = false;

                const cplx phase = std::conj(gamma / g);
                const double zeta = (beta - alpha) / (2.0 * g);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const cplx ap = work(i, p);
                    const cplx bq = work(i, q) * phase;
                    work(i, p) = c * ap - s * bq;
                    work(i, q) = s * ap + c * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx vp = v(i, p);
                    const cplx vq = v(i, q) * phase;
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) {
        throw ConvergenceError("svd: no convergence after " + std::to_string(kSvdMaxSweeps) + " sweeps");
    }

    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j) sv[j] = frobenius_norm(work.col(j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    Svd out{CMatrix(m, n), std::vector<double>(n), CMatrix(n, n)};
    const double zero_floor = (sv.empty() ? 0.0 : sv[order[0]]) * 1e-300;
    std::vector<bool> filled(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.S[k] = sv[j];
        for (std::size_t i = 0; i < n; ++i) out.V(i, k) = v(i, j);
        if (sv[j] > zero_floor && sv[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.U(i, k) = work(i, j) / sv[j];
            filled[k] = true;
        }
    }

    // Complete U for zero singular values with Gram-Schmidt over the standard basis.
    std::size_t basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (filled[k]) continue;
        while (basis < m) {
            CMatrix cand(m, 1);
            cand(basis++, 0) = 1.0;
            for (std::size_t o = 0; o < n; ++o) {
                if (!filled[o]) continue;
                cplx proj = 0.0;
                for (std::size_t i = 0; i < m; ++i) proj += std::conj(out.U(i, o)) * cand(i, 0);
                for (std::size_t i = 0; i < m; ++i) cand(i, 0) -= proj * out.U(i, o);
            }
            const double nrm = frobenius_norm(cand);
            if (nrm > 1e-8) {
                for (std::size_t i = 0; i < m; ++i) out.U(i, k) = cand(i, 0) / nrm;
                filled[k] = true;
                break;
            }
        }
    }
    return out;
}

inline void normalise_phase(Svd& s) {
    for (std::size_t k = 0; k < s.V.cols(); ++k) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < s.V.rows(); ++i) {
            if (std::abs(s.V(i, k)) > best) {
                best = std::abs(s.V(i, k));
                arg = i;
            }
        }
        if (best <= 0.0) continue;
        const cplx rot = std::conj(s.V(arg, k)) / best;
        for (std::size_t i = 0; i < s.V.rows(); ++i) s.V(i, k) *= rot;
        s.V(arg, k) = best;
        for (std::size_t i = 0; i < s.U.rows(); ++i) s.U(i, k) *= rot;
    }
}

}  // namespace detail

inline Svd svd(const CMatrix& a) {
    Svd out;
    if (a.rows() >= a.cols()) {
        out = detail::jacobi_svd_tall(a);
    } else {
        // a* = U' S V'*  =>  a = V' S U'*
        Svd t = detail::jacobi_svd_tall(conj_transpose(a));
        out = Svd{std::move(t.V), std::move(t.S), std::move(t.U)};
    }
    detail::normalise_phase(out);
    return out;
}

}  // namespace eesm::linalg
