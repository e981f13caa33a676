#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "soo/error.hpp"
#include "soo/linalg.hpp"
#include "soo/oracle.hpp"
#include "soo/rand.hpp"

namespace soo {

/// Parameters of a single optimizer run.
struct RunConfig {
    std::size_t dim = 2;
    std::size_t steps = 1;       ///< K, number of oracle steps
    double eta = 1.0;            ///< step schedule eta_k = eta / k^theta
    double theta = 1.0;          ///< in (1/2, 1]
    double gamma = 0.1;          ///< smoothing radius of the query pair
    NoiseModel noise = NoiseModel::sphere(2, 1.0);
    double init_radius = 10.0;   ///< x0 is uniform on the sphere of this radius around x*
    std::uint64_t seed = 0;
    std::uint64_t run_index = 0;
    std::size_t burn_in = 0;     ///< iterates x_0..x_{burn_in-1} are excluded from the average
    bool store_trajectory = false;

    void validate() const {
        if (dim < 2) throw InvalidArgument("RunConfig: dim must be >= 2");
        if (steps < 1) throw InvalidArgument("RunConfig: steps must be >= 1");
        if (!(eta > 0.0)) throw InvalidArgument("RunConfig: eta must be positive");
        if (!(theta > 0.5 && theta <= 1.0)) throw InvalidArgument("RunConfig: theta must lie in (1/2, 1]");
        if (!(gamma > 0.0)) throw InvalidArgument("RunConfig: gamma must be positive");
        if (!(init_radius >= 0.0)) throw InvalidArgument("RunConfig: init_radius must be >= 0");
        if (burn_in >= steps) throw InvalidArgument("RunConfig: burn_in must be smaller than steps");
        noise.validate();
        if (noise.dim != dim) throw DimensionError("RunConfig: noise model", dim, noise.dim);
    }

    double step_size(std::size_t k) const {
        const double kk = static_cast<double>(k);
        return theta == 1.0 ? eta / kk : eta / std::pow(kk, theta);
    }
};

struct RunResult {
    Vector x_last;       ///< x_K
    Vector x_avg;        ///< mean of x_{burn_in} .. x_{K-1}
    std::size_t steps_taken = 0;
    Vector scaled_last;  ///< sqrt(K) (x_K - x*)
    Vector scaled_avg;   ///< sqrt(n) (x_avg - x*), n = number of averaged iterates
    std::vector<Vector> trajectory;  ///< x_0 .. x_K when RunConfig::store_trajectory
};

class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, double iterate_norm)
        : Error("iterate became non-finite at step " + std::to_string(step) + " (|x| = " +
                std::to_string(iterate_norm) + ")"),
          step_(step),
          norm_(iterate_norm) {}

    std::size_t step() const noexcept { return step_; }
    double iterate_norm() const noexcept { return norm_; }

private:
    std::size_t step_;
    double norm_;
};

namespace detail {

inline bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

/// In-place step with caller-provided direction and noise; `plus`/`minus`
/// are scratch buffers of size d.
template <NoisyObjective F>
void advance(const F& f, std::span<double> x, std::size_t k, double step_size, double gamma,
             std::span<const double> e, std::span<const double> xi, std::span<double> plus,
             std::span<double> minus) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        plus[i] = x[i] + gamma * e[i];
        minus[i] = x[i] - gamma * e[i];
    }
    const double s = to_int(order_oracle(f, plus, minus, xi));
    const double h = step_size * s;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= h * e[i];
    if (!all_finite(x)) throw DivergenceError(k, norm(x));
}

}  // namespace detail

/// x - eta_k * phi(x + gamma e, x - gamma e, xi) * e for a given direction e
/// and noise xi.
template <NoisyObjective F>
Vector step_with(const F& f, std::span<const double> x, std::size_t k, const RunConfig& cfg,
                 std::span<const double> e, std::span<const double> xi) {
    if (k < 1) throw InvalidArgument("step: iteration index starts at 1");
    detail::check_dim("step: iterate", f.dim(), x.size());
    detail::check_dim("step: direction", f.dim(), e.size());
    if (!detail::all_finite(x)) throw DivergenceError(k, norm(x));
    Vector next(x.begin(), x.end());
    Vector plus(x.size()), minus(x.size());
    detail::advance(f, std::span<double>(next), k, cfg.step_size(k), cfg.gamma, e, xi, plus, minus);
    return next;
}

/// One step of the order-oracle recursion. Draws the direction first, then
/// the noise, from `stream`.
template <NoisyObjective F>
Vector step(const F& f, std::span<const double> x, std::size_t k, const RunConfig& cfg, RngStream& stream) {
    const Vector e = sample_sphere(stream, f.dim());
    const Vector xi = sample_noise(stream, cfg.noise);
    return step_with(f, x, k, cfg, e, xi);
}

/**
 * Runs K steps from x0 = reference + R0 * u (u uniform on the unit sphere,
 * drawn from stream (seed, run_index)) while keeping the running average
 * x_avg_{m+1} = x_avg_m + (x_m - x_avg_m) / (m + 1).
 *
 * `reference` is the point deviations are measured from (x* for quadratics).
 */
template <NoisyObjective F>
RunResult run(const F& f, const RunConfig& cfg, std::span<const double> reference) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    detail::check_dim("run: objective", d, f.dim());
    detail::check_dim("run: reference point", d, reference.size());

    RngStream stream(cfg.seed, cfg.run_index);
    Vector x(d), e(d), xi(d), plus(d), minus(d);
    sample_sphere_into(stream, e);
    for (std::size_t i = 0; i < d; ++i) x[i] = reference[i] + cfg.init_radius * e[i];

    RunResult out;
    if (cfg.store_trajectory) {
        out.trajectory.reserve(cfg.steps + 1);
        out.trajectory.push_back(x);
    }

    Vector avg(d, 0.0);
    std::size_t averaged = 0;
    for (std::size_t k = 1; k <= cfg.steps; ++k) {
        if (k - 1 >= cfg.burn_in) {
            ++averaged;
            const double w = 1.0 / static_cast<double>(averaged);
            for (std::size_t i = 0; i < d; ++i) avg[i] += (x[i] - avg[i]) * w;
        }
        sample_sphere_into(stream, e);
        sample_noise_into(stream, cfg.noise, xi);
        detail::advance(f, std::span<double>(x), k, cfg.step_size(k), cfg.gamma, e, xi, plus, minus);
        if (cfg.store_trajectory) out.trajectory.push_back(x);
    }

    const double root_k = std::sqrt(static_cast<double>(cfg.steps));
    const double root_n = std::sqrt(static_cast<double>(averaged));
    out.steps_taken = cfg.steps;
    out.scaled_last.resize(d);
    out.scaled_avg.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        out.scaled_last[i] = root_k * (x[i] - reference[i]);
        out.scaled_avg[i] = root_n * (avg[i] - reference[i]);
    }
    out.x_last = std::move(x);
    out.x_avg = std::move(avg);
    return out;
}

inline RunResult run(const QuadraticProblem& p, const RunConfig& cfg) { return run(p, cfg, p.minimizer()); }

}  // namespace soo
