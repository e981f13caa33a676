#pragma once

// Closed-form asymptotics of the order-oracle method on a quadratic:
// the sign-projection constant c(d), alpha = E||xi||^-1, both limiting
// covariance matrices, the optimal initial step and the local linearization
// (psi'(0), chi(0), G) of the mean field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>

#include "soo/error.hpp"
#include "soo/linalg.hpp"
#include "soo/oracle.hpp"
#include "soo/rand.hpp"

namespace soo {

/// eta does not satisfy eta * lambda_min(A') > 1, where A' is the drift matrix
/// of the last-iterate covariance.
class StepSizeError : public Error {
public:
    StepSizeError(double eta, double threshold)
        : Error("step size too small: eta = " + std::to_string(eta) + " but the last-iterate covariance needs eta > " +
                std::to_string(threshold)),
          eta_(eta),
          threshold_(threshold) {}

    double eta() const noexcept { return eta_; }
    double threshold() const noexcept { return threshold_; }

private:
    double eta_;
    double threshold_;
};

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm, double whole, double tol,
                    int depth, double& worst) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth <= 0) {
        worst = std::max(worst, std::abs(delta) / 15.0);
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, worst) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, worst);
}

/// Adaptive Simpson quadrature with an absolute error target.
template <class F>
double integrate(F f, double a, double b, double tol, int max_depth = 48) {
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double worst = 0.0;
    const double value = simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth, worst);
    if (worst > tol) throw ConvergenceError("quadrature did not reach the requested tolerance", worst);
    return value;
}

}  // namespace detail

/**
 * Sign-projection constant c(d), defined by
 *   E_e[ sign<g, e> e ] = (c / sqrt(d)) g / ||g||   for e uniform on S^{d-1},
 * i.e. c(d) = sqrt(d) E|e_1|.
 *
 * E|e_1| comes from the marginal density of e_1, proportional to
 * (1 - t^2)^{(d-3)/2}; with t = sin(u) both integrals are smooth on [0, pi/2].
 * Absolute accuracy is better than 1e-10.
 */
inline double c_constant(std::size_t d) {
    if (d < 2) throw InvalidArgument("c_constant: dimension must be >= 2");
    const double power = static_cast<double>(d) - 2.0;
    const double half_pi = 0.5 * std::numbers::pi;
    const double tol = 1e-13;
    const double num = detail::integrate([&](double u) { return std::sin(u) * std::pow(std::cos(u), power); }, 0.0,
                                         half_pi, tol);
    const double den = detail::integrate([&](double u) { return std::pow(std::cos(u), power); }, 0.0, half_pi, tol);
    return std::sqrt(static_cast<double>(d)) * num / den;
}

/// alpha = E||xi||^-1 in closed form.
inline double alpha_of(const NoiseModel& noise) {
    if (noise.kind == NoiseKind::BallUniform && noise.dim == 1)
        throw InvalidArgument("alpha_of: E||xi||^-1 is infinite for the uniform ball in dimension 1");
    noise.validate();
    if (noise.kind == NoiseKind::SphereUniform) return 1.0 / noise.radius;
    const double d = static_cast<double>(noise.dim);
    return d / ((d - 1.0) * noise.radius);
}

inline constexpr double kMinC = 1.0 / 20.0;
inline constexpr double kMaxC = 1.0;

/// Problem plus noise, together with the two scalars every formula needs.
struct TheoryContext {
    QuadraticProblem problem;
    NoiseModel noise;
    double c;
    double alpha;

    TheoryContext(QuadraticProblem p, NoiseModel n)
        : problem(std::move(p)), noise(n), c(c_constant(problem.dim())), alpha(alpha_of(noise)) {
        validate();
    }

    /// Explicit constants; the noise model is set to the sphere of radius
    /// 1/alpha, which has exactly this alpha.
    TheoryContext(QuadraticProblem p, double c_value, double alpha_value)
        : problem(std::move(p)),
          noise(NoiseModel::sphere(problem.dim(), 1.0 / alpha_value)),
          c(c_value),
          alpha(alpha_value) {
        validate();
    }

    std::size_t dim() const noexcept { return problem.dim(); }

    void validate() const {
        if (!(c >= kMinC && c <= kMaxC))
            throw InvalidArgument("TheoryContext: c = " + std::to_string(c) + " outside [1/20, 1]");
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw InvalidArgument("TheoryContext: alpha must be positive and finite");
        if (noise.dim != problem.dim()) throw DimensionError("TheoryContext: noise model", problem.dim(), noise.dim);
    }
};

/// Scalar s such that psi'(0) = s I: (c / sqrt(d)) alpha (1 - 1/d).
inline double drift_gain(const TheoryContext& ctx) {
    const double d = static_cast<double>(ctx.dim());
    return ctx.c / std::sqrt(d) * ctx.alpha * (1.0 - 1.0 / d);
}

/// A' = 2 (1 - 1/d) (c / sqrt(d)) alpha H
inline SymMatrix last_iterate_drift(const TheoryContext& ctx) {
    return (2.0 * drift_gain(ctx)) * ctx.problem.hessian();
}

/// Smallest eta for which the last-iterate covariance exists: 1 / lambda_min(A').
inline double last_iterate_threshold(const TheoryContext& ctx) {
    return 1.0 / (2.0 * drift_gain(ctx) * ctx.problem.mu());
}

/// Limit covariance of sqrt(k)(x_k - x*) for eta_k = eta / k:
///   V(eta) = eta^2 / d (eta A' - I)^{-1}.
inline SymMatrix v_last_iterate(const TheoryContext& ctx, double eta) {
    const double threshold = last_iterate_threshold(ctx);
    if (!(eta > threshold)) throw StepSizeError(eta, threshold);
    const std::size_t d = ctx.dim();
    const SymMatrix shifted = eta * last_iterate_drift(ctx) - SymMatrix::identity(d);
    return (eta * eta / static_cast<double>(d)) * inverse_spd(shifted);
}

/// Limit covariance of sqrt(k)(x_avg_k - x*) under averaging:
///   V = d / ((d-1)^2 alpha^2) H^{-2}.
inline SymMatrix v_averaged(const TheoryContext& ctx) {
    const double d = static_cast<double>(ctx.dim());
    const SymMatrix h_inv = inverse_spd(ctx.problem.hessian());
    return (d / ((d - 1.0) * (d - 1.0) * ctx.alpha * ctx.alpha)) * sym_product(h_inv, h_inv);
}

/// eta_0 = d sqrt(d) / ((d-1) c alpha mu), the minimizer of ||V(eta)|| for
/// every unitarily invariant norm. Equals 2 / lambda_min(A').
inline double eta_opt(const TheoryContext& ctx) {
    const double d = static_cast<double>(ctx.dim());
    return d * std::sqrt(d) / ((d - 1.0) * ctx.c * ctx.alpha * ctx.problem.mu());
}

/// Spectral norm of V(eta) in closed form: eta^2 / (d (eta lambda_d - 1)),
/// lambda_d = lambda_min(A').
inline double last_iterate_spectral_norm(const TheoryContext& ctx, double eta) {
    const double threshold = last_iterate_threshold(ctx);
    if (!(eta > threshold)) throw StepSizeError(eta, threshold);
    const double lambda_d = 1.0 / threshold;
    return eta * eta / (static_cast<double>(ctx.dim()) * (eta * lambda_d - 1.0));
}

/// Eigenvalues m_i of V(eta_0) - V_avg, one per Hessian eigenvalue
/// (ascending Hessian order):
///   m_i = d mu (d l_i^2 - 2 c^2 l_i mu + c^2 mu^2)
///         / ((d-1)^2 alpha^2 c^2 mu^2 (2 l_i - mu) l_i^2)
inline Vector covariance_gap(const TheoryContext& ctx) {
    const double d = static_cast<double>(ctx.dim());
    const double mu = ctx.problem.mu();
    const double c2 = ctx.c * ctx.c;
    const double a2 = ctx.alpha * ctx.alpha;
    const Vector lambdas = eig_sym(ctx.problem.hessian()).values;
    Vector m(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const double l = lambdas[i];
        const double num = d * mu * (d * l * l - 2.0 * c2 * l * mu + c2 * mu * mu);
        const double den = (d - 1.0) * (d - 1.0) * a2 * c2 * mu * mu * (2.0 * l - mu) * l * l;
        m[i] = num / den;
    }
    return m;
}

/// psi'(0) = (c / sqrt(d)) alpha (1 - 1/d) I
inline SymMatrix psi_prime_zero(const TheoryContext& ctx) { return SymMatrix::identity(ctx.dim(), drift_gain(ctx)); }

/// chi(0) = (c^2 / d^2) I
inline SymMatrix chi_zero(std::size_t d, double c) {
    if (d < 2) throw InvalidArgument("chi_zero: dimension must be >= 2");
    const double dd = static_cast<double>(d);
    return SymMatrix::identity(d, c * c / (dd * dd));
}

/// G = psi'(0) H. -G is Hurwitz iff every eigenvalue of G exceeds 1e-12.
inline SymMatrix mean_field_jacobian(const SymMatrix& psi_prime, const SymMatrix& hessian) {
    return SymMatrix(psi_prime.matrix() * hessian.matrix());
}

inline bool check_hurwitz(const SymMatrix& psi_prime, const SymMatrix& hessian) {
    return min_eigenvalue(mean_field_jacobian(psi_prime, hessian)) > kSingularThreshold;
}

inline bool check_hurwitz(const TheoryContext& ctx) {
    return check_hurwitz(psi_prime_zero(ctx), ctx.problem.hessian());
}

}  // namespace soo
