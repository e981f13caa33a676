#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "soo/error.hpp"
#include "soo/linalg.hpp"
#include "soo/optimizer.hpp"
#include "soo/oracle.hpp"
#include "soo/theory.hpp"

namespace soo {

enum class SampleKind { ScaledLast, ScaledAvg };

inline const char* to_string(SampleKind k) noexcept { return k == SampleKind::ScaledLast ? "scaled_last" : "scaled_avg"; }

/// N x d matrix of scaled deviations, one row per run, ordered by run index.
class SampleMatrix {
public:
    SampleMatrix(SampleKind kind, std::size_t n_runs, std::size_t dim, std::vector<double> rows)
        : kind_(kind), n_runs_(n_runs), dim_(dim), rows_(std::move(rows)) {
        if (n_runs_ < 2) throw InvalidArgument("SampleMatrix: need at least 2 rows, got " + std::to_string(n_runs_));
        if (dim_ < 1) throw InvalidArgument("SampleMatrix: dimension must be at least 1");
        if (rows_.size() != n_runs_ * dim_) throw DimensionError("SampleMatrix: storage", n_runs_ * dim_, rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i)
            if (!std::isfinite(rows_[i]))
                throw InvalidArgument("SampleMatrix: non-finite entry in row " + std::to_string(i / dim_));
    }

    SampleKind kind() const noexcept { return kind_; }
    std::size_t n_runs() const noexcept { return n_runs_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> data() const noexcept { return rows_; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(rows_).subspan(i * dim_, dim_);
    }

private:
    SampleKind kind_;
    std::size_t n_runs_;
    std::size_t dim_;
    std::vector<double> rows_;
};

struct RunFailure {
    std::size_t run_index;
    std::string message;
};

/// One or more runs failed; all failures are collected, sorted by run index.
class MonteCarloError : public Error {
public:
    explicit MonteCarloError(std::vector<RunFailure> failures)
        : Error(describe(failures)), failures_(std::move(failures)) {}

    const std::vector<RunFailure>& failures() const noexcept { return failures_; }

private:
    static std::string describe(const std::vector<RunFailure>& f) {
        std::string s = std::to_string(f.size()) + " run(s) failed:";
        for (std::size_t i = 0; i < f.size() && i < 10; ++i)
            s += " [" + std::to_string(f[i].run_index) + "] " + f[i].message + ";";
        if (f.size() > 10) s += " ...";
        return s;
    }

    std::vector<RunFailure> failures_;
};

struct MonteCarloOptions {
    unsigned threads = 0;  ///< 0 = hardware concurrency
    /// Called with the number of finished runs every `progress_every` runs.
    std::function<void(std::size_t)> on_progress;
    std::size_t progress_every = 1000;
};

struct MonteCarloSamples {
    SampleMatrix last;
    SampleMatrix avg;

    const SampleMatrix& get(SampleKind k) const { return k == SampleKind::ScaledLast ? last : avg; }
};

inline unsigned resolve_threads(unsigned requested, std::size_t n_runs) {
    unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(n_runs, 1)));
}

/**
 * Executes runs 0..n_runs-1 of `base` (run_index overridden) across a worker
 * pool. Each run owns its RNG stream and writes only its own row, so the
 * result does not depend on the thread count or scheduling.
 */
inline MonteCarloSamples monte_carlo_all(const QuadraticProblem& p, const RunConfig& base, std::size_t n_runs,
                                         const MonteCarloOptions& opts = {}) {
    if (n_runs < 2) throw InvalidArgument("monte_carlo: n_runs must be >= 2");
    base.validate();
    const std::size_t d = base.dim;
    std::vector<double> last(n_runs * d), avg(n_runs * d);
    std::vector<RunFailure> failures;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};

    auto worker = [&] {
        RunConfig cfg = base;
        cfg.store_trajectory = false;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_runs) return;
            cfg.run_index = i;
            try {
                const RunResult r = run(p, cfg);
                std::copy(r.scaled_last.begin(), r.scaled_last.end(), last.begin() + static_cast<std::ptrdiff_t>(i * d));
                std::copy(r.scaled_avg.begin(), r.scaled_avg.end(), avg.begin() + static_cast<std::ptrdiff_t>(i * d));
            } catch (const std::exception& ex) {
                std::lock_guard lock(mu);
                failures.push_back({i, ex.what()});
            }
            const std::size_t finished = done.fetch_add(1) + 1;
            if (opts.on_progress && opts.progress_every > 0 && finished % opts.progress_every == 0) {
                std::lock_guard lock(mu);
                opts.on_progress(finished);
            }
        }
    };

    const unsigned n_threads = resolve_threads(opts.threads, n_runs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    if (!failures.empty()) {
        std::sort(failures.begin(), failures.end(),
                  [](const RunFailure& a, const RunFailure& b) { return a.run_index < b.run_index; });
        throw MonteCarloError(std::move(failures));
    }
    return {SampleMatrix(SampleKind::ScaledLast, n_runs, d, std::move(last)),
            SampleMatrix(SampleKind::ScaledAvg, n_runs, d, std::move(avg))};
}

inline SampleMatrix monte_carlo(const QuadraticProblem& p, const RunConfig& base, std::size_t n_runs, SampleKind kind,
                                const MonteCarloOptions& opts = {}) {
    MonteCarloSamples s = monte_carlo_all(p, base, n_runs, opts);
    return kind == SampleKind::ScaledLast ? std::move(s.last) : std::move(s.avg);
}

/// (1/N) sum_i row_i row_i^T, the second moment about zero.
inline SymMatrix empirical_covariance(const SampleMatrix& s) {
    const std::size_t d = s.dim();
    Matrix acc(d, d);
    for (std::size_t r = 0; r < s.n_runs(); ++r) {
        const auto x = s.row(r);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) acc(i, j) += x[i] * x[j];
    }
    const double inv_n = 1.0 / static_cast<double>(s.n_runs());
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) acc(j, i) = acc(i, j) *= inv_n;
    return SymMatrix(acc);
}

class DegenerateSampleError : public Error {
public:
    using Error::Error;
};

/**
 * Recovers the product c * alpha from the empirical covariance of a
 * last-iterate experiment run at a known eta.
 *
 * Along each Hessian eigenpair (l_i, u_i) the limit variance is
 *   v_i = eta^2 / (d (2 eta (1 - 1/d) (c alpha / sqrt(d)) l_i - 1)),
 * so with v_i estimated by u_i^T emp u_i,
 *   (c alpha)_i = sqrt(d) (eta^2 / (d v_i) + 1) / (2 eta (1 - 1/d) l_i).
 * The per-direction estimates are averaged.
 *
 * `noise` supplies the nominal alpha used to check, before estimating, that
 * eta is above the threshold where the last-iterate limit exists.
 */
inline double estimate_c_alpha(const SymMatrix& emp, const QuadraticProblem& p, double eta, const NoiseModel& noise) {
    if (emp.dim() != p.dim()) throw DimensionError("estimate_c_alpha: covariance", p.dim(), emp.dim());
    const TheoryContext nominal(p, noise);
    const double threshold = last_iterate_threshold(nominal);
    if (!(eta > threshold)) throw StepSizeError(eta, threshold);

    const double d = static_cast<double>(p.dim());
    const EigenDecomposition e = eig_sym(p.hessian());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) {
        const Vector u = e.vectors.column(i);
        const double v = emp.bilinear(u, u);
        if (!(v > 0.0))
            throw DegenerateSampleError("estimate_c_alpha: non-positive variance " + std::to_string(v) +
                                        " along Hessian eigenvector " + std::to_string(i));
        sum += std::sqrt(d) * (eta * eta / (d * v) + 1.0) / (2.0 * eta * (1.0 - 1.0 / d) * e.values[i]);
    }
    return sum / d;
}

/// Rows w_i = V^{-1/2} row_i.
inline SampleMatrix standardize(const SampleMatrix& s, const SymMatrix& v_theory) {
    if (v_theory.dim() != s.dim()) throw DimensionError("standardize: covariance", s.dim(), v_theory.dim());
    const EigenDecomposition e = eig_sym(v_theory);
    if (!(e.values.front() > kSingularThreshold))
        throw SingularMatrixError("standardize: covariance is singular (min eigenvalue " +
                                  std::to_string(e.values.front()) + ")");
    const SymMatrix w = spectral_apply(e, [](double v) { return 1.0 / std::sqrt(v); });
    std::vector<double> out(s.data().size());
    for (std::size_t r = 0; r < s.n_runs(); ++r) {
        const Vector y = w * s.row(r);
        std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(r * s.dim()));
    }
    return SampleMatrix(s.kind(), s.n_runs(), s.dim(), std::move(out));
}

/// bins x bins counts over [-range, range]^2. counts is row-major with the
/// row indexed by the x0 bin. Samples outside the square go to `overflow`.
struct Histogram2D {
    std::size_t bins = 0;
    double range = 0.0;
    std::vector<std::size_t> counts;
    std::size_t overflow = 0;

    std::size_t at(std::size_t i0, std::size_t i1) const { return counts[i0 * bins + i1]; }

    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
};

inline Histogram2D histogram2d(const SampleMatrix& s, std::size_t bins, double range) {
    if (s.dim() != 2) throw DimensionError("histogram2d", 2, s.dim());
    if (bins < 1) throw InvalidArgument("histogram2d: bins must be >= 1");
    if (!(range > 0.0) || !std::isfinite(range)) throw InvalidArgument("histogram2d: range must be positive");
    Histogram2D h{bins, range, std::vector<std::size_t>(bins * bins, 0), 0};
    auto index = [&](double v, std::size_t& idx) {
        if (!(v >= -range && v <= range)) return false;
        const double t = (v + range) / (2.0 * range) * static_cast<double>(bins);
        idx = std::min(static_cast<std::size_t>(t), bins - 1);
        return true;
    };
    for (std::size_t r = 0; r < s.n_runs(); ++r) {
        const auto x = s.row(r);
        std::size_t i0 = 0, i1 = 0;
        if (index(x[0], i0) && index(x[1], i1))
            ++h.counts[i0 * bins + i1];
        else
            ++h.overflow;
    }
    return h;
}

/// 99.5th percentile of the row norms; falls back to 1 when all rows are 0.
inline double auto_histogram_range(const SampleMatrix& s) {
    std::vector<double> radii(s.n_runs());
    for (std::size_t r = 0; r < s.n_runs(); ++r) radii[r] = norm(s.row(r));
    std::sort(radii.begin(), radii.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.995 * static_cast<double>(radii.size()))) - 1;
    const double q = radii[std::min(idx, radii.size() - 1)];
    return q > 0.0 ? q : 1.0;
}

inline double frobenius_rel_err(const SymMatrix& emp, const SymMatrix& theo) {
    return (emp - theo).frobenius_norm() / theo.frobenius_norm();
}

struct CovarianceReport {
    SymMatrix empirical;
    SymMatrix theoretical;
    double frobenius_rel_err;
    Vector gap_eigenvalues;  ///< eigenvalues of theoretical - empirical, ascending
    SymMatrix standardized;  ///< empirical covariance of V^{-1/2}-whitened rows
    double standardized_rel_err;  ///< ||standardized - I||_F / sqrt(d)
    std::size_t n_runs;
    std::size_t steps;
    int setting;
    SampleKind kind;
};

inline CovarianceReport compare_covariance(const SampleMatrix& s, const SymMatrix& theoretical, int setting,
                                           std::size_t steps) {
    SymMatrix emp = empirical_covariance(s);
    SymMatrix std_cov = empirical_covariance(standardize(s, theoretical));
    const double d = static_cast<double>(s.dim());
    const double std_err = (std_cov - SymMatrix::identity(s.dim())).frobenius_norm() / std::sqrt(d);
    Vector gap = eig_sym(theoretical - emp).values;
    const double rel = frobenius_rel_err(emp, theoretical);
    return CovarianceReport{std::move(emp), theoretical, rel,     std::move(gap), std::move(std_cov), std_err,
                            s.n_runs(),     steps,       setting, s.kind()};
}

}  // namespace soo
