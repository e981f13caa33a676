#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>

#include "soo/error.hpp"
#include "soo/linalg.hpp"

namespace soo {

namespace detail {

inline void check_dim(const char* what, std::size_t expected, std::size_t actual) {
    if (expected != actual) throw DimensionError(what, expected, actual);
}

}  // namespace detail

/**
 * Strongly convex quadratic f(x) = 1/2 x^T A x + b^T x + c0 with SPD Hessian A.
 *
 * The noisy realization is f(x, xi) = f(x) + <xi, x>, whose gradient is
 * grad f(x) + xi, i.e. additive gradient noise.
 */
class QuadraticProblem {
public:
    QuadraticProblem(SymMatrix hessian, Vector linear, double constant = 0.0)
        : hessian_(std::move(hessian)), linear_(std::move(linear)), constant_(constant) {
        detail::check_dim("QuadraticProblem: linear term", hessian_.dim(), linear_.size());
        const EigenDecomposition e = eig_sym(hessian_);
        mu_ = e.values.front();
        lip_ = e.values.back();
        if (!(mu_ > kSingularThreshold))
            throw InvalidArgument("QuadraticProblem: Hessian must be positive definite (min eigenvalue " +
                                  std::to_string(mu_) + ")");
        minimizer_ = inverse_spd(hessian_) * linear_;
        for (auto& v : minimizer_) v = -v;
    }

    /// 1/2 ||x||^2 in dimension d.
    static QuadraticProblem isotropic(std::size_t d) { return {SymMatrix::identity(d), Vector(d, 0.0), 0.0}; }

    std::size_t dim() const noexcept { return hessian_.dim(); }
    const SymMatrix& hessian() const noexcept { return hessian_; }
    const Vector& linear() const noexcept { return linear_; }
    double constant() const noexcept { return constant_; }
    double mu() const noexcept { return mu_; }
    double lip() const noexcept { return lip_; }
    const Vector& minimizer() const noexcept { return minimizer_; }

    double value(std::span<const double> x) const {
        detail::check_dim("f_value", dim(), x.size());
        return 0.5 * hessian_.bilinear(x, x) + dot(linear_, x) + constant_;
    }

    Vector gradient(std::span<const double> x) const {
        detail::check_dim("gradient", dim(), x.size());
        Vector g = hessian_ * x;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += linear_[i];
        return g;
    }

    double noisy_value(std::span<const double> x, std::span<const double> xi) const {
        detail::check_dim("noisy_value: noise", dim(), xi.size());
        return value(x) + dot(xi, x);
    }

    /// f(x, xi) - f(y, xi), evaluated as 1/2 (x-y)^T A (x+y) + <b + xi, x - y>.
    /// Algebraically identical to the difference of values, without the
    /// cancellation when x and y are close.
    double noisy_difference(std::span<const double> x, std::span<const double> y,
                            std::span<const double> xi) const {
        const std::size_t d = dim();
        detail::check_dim("order oracle: first point", d, x.size());
        detail::check_dim("order oracle: second point", d, y.size());
        detail::check_dim("order oracle: noise", d, xi.size());
        double quad = 0.0;
        double lin = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double di = x[i] - y[i];
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) row += hessian_(i, j) * (x[j] + y[j]);
            quad += di * row;
            lin += (linear_[i] + xi[i]) * di;
        }
        return 0.5 * quad + lin;
    }

private:
    SymMatrix hessian_;
    Vector linear_;
    double constant_;
    double mu_ = 0.0;
    double lip_ = 0.0;
    Vector minimizer_;
};

inline double f_value(const QuadraticProblem& p, std::span<const double> x) { return p.value(x); }

/// grad f(x, xi) = A x + b + xi
inline Vector noisy_gradient(const QuadraticProblem& p, std::span<const double> x, std::span<const double> xi) {
    detail::check_dim("noisy_gradient: noise", p.dim(), xi.size());
    Vector g = p.gradient(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += xi[i];
    return g;
}

/**
 * Generic smooth objective behind the same oracle interface. Only the
 * quadratic family has closed-form theory; this hook lets the optimizer run
 * on other functions.
 */
class SmoothObjective {
public:
    SmoothObjective(std::size_t dim, std::function<double(std::span<const double>)> f)
        : dim_(dim), f_(std::move(f)) {}

    std::size_t dim() const noexcept { return dim_; }

    double noisy_value(std::span<const double> x, std::span<const double> xi) const {
        detail::check_dim("noisy_value: point", dim_, x.size());
        detail::check_dim("noisy_value: noise", dim_, xi.size());
        return f_(x) + dot(xi, x);
    }

private:
    std::size_t dim_;
    std::function<double(std::span<const double>)> f_;
};

template <class F>
concept NoisyObjective = requires(const F& f, std::span<const double> v) {
    { f.dim() } -> std::convertible_to<std::size_t>;
    { f.noisy_value(v, v) } -> std::convertible_to<double>;
};

template <class F>
concept HasNoisyDifference = NoisyObjective<F> && requires(const F& f, std::span<const double> v) {
    { f.noisy_difference(v, v, v) } -> std::convertible_to<double>;
};

/// Answer of the order oracle: the sign of f(x, xi) - f(y, xi).
enum class OracleResponse : int { Negative = -1, Positive = 1 };

inline constexpr int to_int(OracleResponse r) noexcept { return static_cast<int>(r); }

/// sign[f(x, xi) - f(y, xi)], with sign(0) = +1.
template <NoisyObjective F>
OracleResponse order_oracle(const F& f, std::span<const double> x, std::span<const double> y,
                            std::span<const double> xi) {
    double diff = 0.0;
    if constexpr (HasNoisyDifference<F>) {
        diff = f.noisy_difference(x, y, xi);
    } else {
        detail::check_dim("order oracle: second point", x.size(), y.size());
        diff = f.noisy_value(x, xi) - f.noisy_value(y, xi);
    }
    return diff < 0.0 ? OracleResponse::Negative : OracleResponse::Positive;
}

}  // namespace soo
