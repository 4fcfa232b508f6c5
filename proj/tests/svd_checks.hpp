#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "lrad/svd.hpp"
#include "test_util.hpp"

namespace lrad::test {

struct SvdQuality {
    double reconstruction = 0;  // ||A - U S V^T||_F / ||A||_F
    double orthonormality = 0;  // max |Q^T Q - I| over U and V
    bool descending = true;
    bool non_negative = true;
};

inline double gram_defect(const Tensor<double>& q) {
    const auto rows = q.dim(0), k = q.dim(1);
    double worst = 0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double acc = 0;
            for (std::size_t r = 0; r < rows; ++r) acc += q[r * k + a] * q[r * k + b];
            worst = std::max(worst, std::abs(acc - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

inline SvdQuality assess(const Tensor<double>& a, const SingularSpectrum<double>& s) {
    SvdQuality q;
    const auto back = reconstruct(s);
    double err = 0, norm = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        err += std::pow(a[i] - back[i], 2);
        norm += a[i] * a[i];
    }
    q.reconstruction = norm > 0 ? std::sqrt(err / norm) : std::sqrt(err);
    q.orthonormality = std::max(gram_defect(s.U), gram_defect(s.V));
    for (std::size_t i = 0; i < s.S.size(); ++i) {
        q.non_negative = q.non_negative && s.S[i] >= 0;
        if (i > 0) q.descending = q.descending && s.S[i] <= s.S[i - 1];
    }
    return q;
}

// Random matrix of the given shape; some are rank-deficient or have
// repeated singular values to exercise the degenerate paths.
inline Tensor<double> svd_test_matrix(std::mt19937_64& rng, std::size_t m, std::size_t n) {
    const auto style = pick(rng, 0, 3);
    auto a = random_tensor({m, n}, rng);
    if (style == 1) {
        // rank-deficient: product of thin factors
        const auto r = pick(rng, 1, std::min(m, n));
        const auto l = random_tensor({m, r}, rng), rt = random_tensor({r, n}, rng);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0;
                for (std::size_t t = 0; t < r; ++t) acc += l[i * r + t] * rt[t * n + j];
                a[i * n + j] = acc;
            }
    } else if (style == 2) {
        // duplicated columns
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 1; j < n; j += 2) a[i * n + j] = a[i * n + j - 1];
    }
    return a;
}

// Q with orthonormal columns by modified Gram-Schmidt on a random matrix.
inline Tensor<double> random_orthonormal(std::mt19937_64& rng, std::size_t rows, std::size_t k) {
    auto q = random_tensor({rows, k}, rng);
    for (std::size_t j = 0; j < k; ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t p = 0; p < j; ++p) {
                double d = 0;
                for (std::size_t r = 0; r < rows; ++r) d += q[r * k + j] * q[r * k + p];
                for (std::size_t r = 0; r < rows; ++r) q[r * k + j] -= d * q[r * k + p];
            }
        double nrm = 0;
        for (std::size_t r = 0; r < rows; ++r) nrm += q[r * k + j] * q[r * k + j];
        nrm = std::sqrt(nrm);
        for (std::size_t r = 0; r < rows; ++r) q[r * k + j] /= nrm;
    }
    return q;
}

}  // namespace lrad::test
