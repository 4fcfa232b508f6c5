#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <type_traits>

#include "lrad/tensor.hpp"

namespace lrad {

/// Thin SVD A = U diag(S) V^T with U: (m,k), S: (k), V: (n,k), k = min(m,n).
template <typename T>
struct SingularSpectrum {
    Tensor<T> U, S, V;
};

namespace detail {

template <typename T>
constexpr T jacobi_tolerance() {
    return std::is_same_v<T, float> ? T(1e-7) : T(1e-12);
}

inline constexpr int kMaxJacobiSweeps = 100;

// Columns of a column-major (rows x cols) buffer.
template <typename T>
struct ColumnBlock {
    std::size_t rows, cols;
    std::vector<T> data;
    T* col(std::size_t j) { return data.data() + j * rows; }
    const T* col(std::size_t j) const { return data.data() + j * rows; }
};

template <typename T>
T column_dot(const T* a, const T* b, std::size_t n) {
    T s{0};
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Replaces column j with a unit vector orthogonal to columns [0, j), taking the
// standard basis vector with the largest residual after Gram-Schmidt.
template <typename T>
void complete_orthonormal(ColumnBlock<T>& q, std::size_t j) {
    std::vector<T> candidate(q.rows), best;
    T best_norm{0};
    for (std::size_t e = 0; e < q.rows; ++e) {
        std::fill(candidate.begin(), candidate.end(), T{0});
        candidate[e] = T{1};
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t i = 0; i < j; ++i) {
                const T* qi = q.col(i);
                const T proj = column_dot(qi, candidate.data(), q.rows);
                for (std::size_t r = 0; r < q.rows; ++r) candidate[r] -= proj * qi[r];
            }
        const T norm = std::sqrt(column_dot(candidate.data(), candidate.data(), q.rows));
        if (norm > best_norm) {
            best_norm = norm;
            best = candidate;
        }
    }
    if (!(best_norm > T(1e-3))) throw NumericalError("svd: could not complete orthonormal basis");
    for (std::size_t r = 0; r < q.rows; ++r) q.col(j)[r] = best[r] / best_norm;
}

// One-sided (Hestenes) Jacobi on a tall matrix given column-major.
template <typename T>
SingularSpectrum<T> jacobi_tall(ColumnBlock<T> u) {
    const std::size_t m = u.rows, n = u.cols;
    ColumnBlock<T> v{n, n, std::vector<T>(n * n, T{0})};
    for (std::size_t i = 0; i < n; ++i) v.col(i)[i] = T{1};

    const T tol = jacobi_tolerance<T>();
    // Columns below roundoff of the whole matrix are numerically zero.
    T negligible{0};
    for (std::size_t j = 0; j < n; ++j) negligible += column_dot(u.col(j), u.col(j), m);
    negligible *= std::numeric_limits<T>::epsilon() * std::numeric_limits<T>::epsilon();
    bool converged = n < 2;
    for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i + 1 < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                T* ui = u.col(i);
                T* uj = u.col(j);
                const T alpha = column_dot(ui, ui, m);
                const T beta = column_dot(uj, uj, m);
                const T gamma = column_dot(ui, uj, m);
                if (alpha <= negligible || beta <= negligible) continue;
                if (gamma == T{0} || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                converged = false;
                const T zeta = (beta - alpha) / (T{2} * gamma);
                const T t = (zeta >= T{0} ? T{1} : T{-1}) / (std::abs(zeta) + std::sqrt(T{1} + zeta * zeta));
                const T c = T{1} / std::sqrt(T{1} + t * t);
                const T s = c * t;
                for (std::size_t r = 0; r < m; ++r) {
                    const T a = ui[r], b = uj[r];
                    ui[r] = c * a - s * b;
                    uj[r] = s * a + c * b;
                }
                T* vi = v.col(i);
                T* vj = v.col(j);
                for (std::size_t r = 0; r < n; ++r) {
                    const T a = vi[r], b = vj[r];
                    vi[r] = c * a - s * b;
                    vj[r] = s * a + c * b;
                }
            }
    }
    if (!converged)
        throw NumericalError("svd: one-sided Jacobi did not converge within " + std::to_string(kMaxJacobiSweeps) +
                             " sweeps");

    std::vector<T> sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(column_dot(u.col(j), u.col(j), m));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sigma[a] > sigma[b]; });

    ColumnBlock<T> us{m, n, std::vector<T>(m * n)};
    ColumnBlock<T> vs{n, n, std::vector<T>(n * n)};
    Tensor<T> s({n});
    const T floor = (sigma.empty() ? T{0} : sigma[order[0]]) * std::numeric_limits<T>::epsilon() * T(m);
    for (std::size_t k = 0; k < n; ++k) {
        const auto j = order[k];
        s[k] = sigma[j];
        std::copy_n(v.col(j), n, vs.col(k));
        if (sigma[j] > floor && sigma[j] > T{0}) {
            for (std::size_t r = 0; r < m; ++r) us.col(k)[r] = u.col(j)[r] / sigma[j];
        } else {
            s[k] = T{0};
            complete_orthonormal(us, k);
        }
    }

    // Sign convention: largest-magnitude entry of each left vector is positive.
    for (std::size_t k = 0; k < n; ++k) {
        T* uk = us.col(k);
        std::size_t best = 0;
        for (std::size_t r = 1; r < m; ++r)
            if (std::abs(uk[r]) > std::abs(uk[best])) best = r;
        if (uk[best] < T{0}) {
            for (std::size_t r = 0; r < m; ++r) uk[r] = -uk[r];
            T* vk = vs.col(k);
            for (std::size_t r = 0; r < n; ++r) vk[r] = -vk[r];
        }
    }

    SingularSpectrum<T> out{Tensor<T>({m, n}), std::move(s), Tensor<T>({n, n})};
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t r = 0; r < m; ++r) out.U[r * n + k] = us.col(k)[r];
        for (std::size_t r = 0; r < n; ++r) out.V[r * n + k] = vs.col(k)[r];
    }
    return out;
}

}  // namespace detail

/// One-sided Jacobi SVD of a rank-2 tensor.
template <typename T>
SingularSpectrum<T> svd(const Tensor<T>& a) {
    require_rank(a.shape(), 2, "svd");
    if (!a.all_finite()) throw NumericalError("svd: input contains non-finite entries");
    const auto m = a.dim(0), n = a.dim(1);
    if (m >= n) {
        detail::ColumnBlock<T> cols{m, n, std::vector<T>(m * n)};
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) cols.col(c)[r] = a[r * n + c];
        return detail::jacobi_tall(std::move(cols));
    }
    // Wide: decompose A^T = V S U^T, then swap roles and re-apply the sign rule on U.
    detail::ColumnBlock<T> cols{n, m, std::vector<T>(m * n)};
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) cols.col(r)[c] = a[r * n + c];
    auto t = detail::jacobi_tall(std::move(cols));
    SingularSpectrum<T> out{std::move(t.V), std::move(t.S), std::move(t.U)};
    const auto k = m;
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < m; ++r)
            if (std::abs(out.U[r * k + j]) > std::abs(out.U[best * k + j])) best = r;
        if (out.U[best * k + j] < T{0}) {
            for (std::size_t r = 0; r < m; ++r) out.U[r * k + j] = -out.U[r * k + j];
            for (std::size_t r = 0; r < n; ++r) out.V[r * k + j] = -out.V[r * k + j];
        }
    }
    return out;
}

/// U diag(S) V^T.
template <typename T>
Tensor<T> reconstruct(const SingularSpectrum<T>& s) {
    const auto m = s.U.dim(0), k = s.S.size(), n = s.V.dim(0);
    Tensor<T> a({m, n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            T acc{0};
            for (std::size_t j = 0; j < k; ++j) acc += s.U[r * k + j] * s.S[j] * s.V[c * k + j];
            a[r * n + c] = acc;
        }
    return a;
}

}  // namespace lrad
