#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lrad/autodiff.hpp"
#include "lrad/svd.hpp"

namespace lrad {

struct LossWeights {
    double irec = 1.0;
    double adv = 5.0;
    double zrec = 1.0;
    double rank = 0.05;
};

/// Generator-side components, the weighted total and the discriminator objective.
struct LossBreakdown {
    double irec = 0, adv_g = 0, adv_d = 0, zrec = 0, rank = 0, total = 0;
};

struct RankBudget {
    std::size_t r = 3;

    void validate(std::size_t latent_dim, std::size_t batch) const {
        const auto limit = std::min(latent_dim, batch);
        if (r < 1 || r >= limit)
            throw ConfigError("rank budget r=" + std::to_string(r) + " must satisfy 1 <= r < min(latent_dim=" +
                              std::to_string(latent_dim) + ", batch=" + std::to_string(batch) + ")");
    }
};

inline constexpr double kProbClamp = 1e-7;

// ---- plain values -------------------------------------------------------

/// Mean absolute difference over all elements.
template <typename T>
T loss_irec(const Tensor<T>& x, const Tensor<T>& xr) {
    require_shape(xr.shape(), x.shape(), "loss_irec");
    T s{0};
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - xr[i]);
    return s / static_cast<T>(x.size());
}

template <typename T>
T clamp_prob(T p) {
    return std::clamp(p, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
}

/// -mean[log D(x) + log(1 - D(x'))] / 2
template <typename T>
T loss_adv_d(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
    require_shape(d_fake.shape(), d_real.shape(), "loss_adv_d");
    T s{0};
    for (std::size_t i = 0; i < d_real.size(); ++i)
        s += std::log(clamp_prob(d_real[i])) + std::log(T{1} - clamp_prob(d_fake[i]));
    return -s / static_cast<T>(2 * d_real.size());
}

/// Non-saturating generator objective -mean[log D(x')].
template <typename T>
T loss_adv_g(const Tensor<T>& d_fake) {
    T s{0};
    for (auto p : d_fake.values()) s += std::log(clamp_prob(p));
    return -s / static_cast<T>(d_fake.size());
}

/// Mean over the batch of per-sample Euclidean distances, z: (B, d).
template <typename T>
T loss_zrec(const Tensor<T>& z, const Tensor<T>& zr) {
    require_shape(zr.shape(), z.shape(), "loss_zrec");
    require_rank(z.shape(), 2, "loss_zrec");
    const auto b = z.dim(0), d = z.dim(1);
    T s{0};
    for (std::size_t i = 0; i < b; ++i) {
        T acc{0};
        for (std::size_t j = 0; j < d; ++j) {
            const T diff = z[i * d + j] - zr[i * d + j];
            acc += diff * diff;
        }
        s += std::sqrt(acc);
    }
    return s / static_cast<T>(b);
}

/// Sum of singular values beyond the budget, with its gradient sum_{i>r} u_i v_i^T.
template <typename T>
struct RankPenalty {
    T value{0};
    Tensor<T> gradient;
};

template <typename T>
RankPenalty<T> rank_penalty(const Tensor<T>& z_matrix, RankBudget budget) {
    require_rank(z_matrix.shape(), 2, "loss_rank");
    const auto m = z_matrix.dim(0), n = z_matrix.dim(1);
    if (n < 2) throw ShapeError("loss_rank: need at least 2 columns, got " + to_string(z_matrix.shape()));
    if (budget.r < 1 || budget.r >= std::min(m, n))
        throw ConfigError("loss_rank: rank budget " + std::to_string(budget.r) + " invalid for matrix " +
                          to_string(z_matrix.shape()));
    const auto spec = svd(z_matrix);
    const auto k = spec.S.size();
    RankPenalty<T> out{T{0}, Tensor<T>(z_matrix.shape())};
    for (std::size_t i = budget.r; i < k; ++i) out.value += spec.S[i];
    for (std::size_t row = 0; row < m; ++row)
        for (std::size_t col = 0; col < n; ++col) {
            T acc{0};
            for (std::size_t i = budget.r; i < k; ++i) acc += spec.U[row * k + i] * spec.V[col * k + i];
            out.gradient[row * n + col] = acc;
        }
    return out;
}

template <typename T>
T loss_rank(const Tensor<T>& z_matrix, RankBudget budget) {
    return rank_penalty(z_matrix, budget).value;
}

// ---- tape ops -----------------------------------------------------------

template <typename T>
Var loss_irec(Tape<T>& tape, Var x, Var xr) {
    const T value = loss_irec(tape.value(x), tape.value(xr));
    return tape.record(Tensor<T>({1}, value), {x, xr}, [x, xr](Tape<T>& t, const Tensor<T>& gy) {
        const auto& a = t.value(x);
        const auto& b = t.value(xr);
        Tensor<T> g(a.shape());
        const T scale = gy[0] / static_cast<T>(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            const T d = a[i] - b[i];
            g[i] = d > T{0} ? scale : (d < T{0} ? -scale : T{0});
        }
        t.accumulate(x, g);
        for (auto& v : g.values()) v = -v;
        t.accumulate(xr, g);
    });
}

namespace detail {

// d/dp log(clamp(p)), zero where the clamp is active.
template <typename T>
T dlog_clamped(T p) {
    return (p < static_cast<T>(kProbClamp) || p > static_cast<T>(1.0 - kProbClamp)) ? T{0} : T{1} / p;
}

}  // namespace detail

template <typename T>
Var loss_adv_d(Tape<T>& tape, Var d_real, Var d_fake) {
    const T value = loss_adv_d(tape.value(d_real), tape.value(d_fake));
    return tape.record(Tensor<T>({1}, value), {d_real, d_fake}, [d_real, d_fake](Tape<T>& t, const Tensor<T>& gy) {
        const auto& r = t.value(d_real);
        const auto& f = t.value(d_fake);
        const T scale = -gy[0] / static_cast<T>(2 * r.size());
        Tensor<T> gr(r.shape()), gf(f.shape());
        for (std::size_t i = 0; i < r.size(); ++i) {
            gr[i] = scale * detail::dlog_clamped(r[i]);
            gf[i] = -scale * detail::dlog_clamped(T{1} - f[i]);
        }
        t.accumulate(d_real, gr);
        t.accumulate(d_fake, gf);
    });
}

template <typename T>
Var loss_adv_g(Tape<T>& tape, Var d_fake) {
    const T value = loss_adv_g(tape.value(d_fake));
    return tape.record(Tensor<T>({1}, value), {d_fake}, [d_fake](Tape<T>& t, const Tensor<T>& gy) {
        const auto& f = t.value(d_fake);
        Tensor<T> g(f.shape());
        const T scale = -gy[0] / static_cast<T>(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) g[i] = scale * detail::dlog_clamped(f[i]);
        t.accumulate(d_fake, g);
    });
}

template <typename T>
Var loss_zrec(Tape<T>& tape, Var z, Var zr) {
    const T value = loss_zrec(tape.value(z), tape.value(zr));
    return tape.record(Tensor<T>({1}, value), {z, zr}, [z, zr](Tape<T>& t, const Tensor<T>& gy) {
        const auto& a = t.value(z);
        const auto& b = t.value(zr);
        const auto rows = a.dim(0), d = a.dim(1);
        Tensor<T> g(a.shape());
        for (std::size_t i = 0; i < rows; ++i) {
            T norm{0};
            for (std::size_t j = 0; j < d; ++j) {
                const T diff = a[i * d + j] - b[i * d + j];
                norm += diff * diff;
            }
            norm = std::sqrt(norm);
            if (norm == T{0}) continue;
            const T scale = gy[0] / (static_cast<T>(rows) * norm);
            for (std::size_t j = 0; j < d; ++j) g[i * d + j] = scale * (a[i * d + j] - b[i * d + j]);
        }
        t.accumulate(z, g);
        for (auto& v : g.values()) v = -v;
        t.accumulate(zr, g);
    });
}

/// z_matrix is the (d, B) latent batch.
template <typename T>
Var loss_rank(Tape<T>& tape, Var z_matrix, RankBudget budget) {
    auto penalty = std::make_shared<RankPenalty<T>>(rank_penalty(tape.value(z_matrix), budget));
    const T value = penalty->value;
    return tape.record(Tensor<T>({1}, value), {z_matrix}, [z_matrix, penalty](Tape<T>& t, const Tensor<T>& gy) {
        Tensor<T> g = penalty->gradient;
        for (auto& v : g.values()) v *= gy[0];
        t.accumulate(z_matrix, g);
    });
}

// ---- composition --------------------------------------------------------

struct LossComponents {
    double irec = 0, adv_g = 0, zrec = 0, rank = 0, adv_d = 0;
};

/// Weighted generator total; the discriminator objective is adv_d alone.
inline LossBreakdown loss_total(const LossComponents& c, const LossWeights& w) {
    const std::pair<const char*, double> named[] = {
        {"irec", c.irec}, {"adv_g", c.adv_g}, {"zrec", c.zrec}, {"rank", c.rank}, {"adv_d", c.adv_d}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw NumericalError(std::string("loss component ") + name + " is not finite");
    LossBreakdown b{c.irec, c.adv_g, c.adv_d, c.zrec, c.rank, 0.0};
    b.total = w.irec * c.irec + w.adv * c.adv_g + w.zrec * c.zrec + w.rank * c.rank;
    return b;
}

}  // namespace lrad
