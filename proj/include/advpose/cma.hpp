#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "advpose/error.hpp"
#include "advpose/linalg.hpp"
#include "advpose/pose.hpp"
#include "advpose/rng.hpp"
#include "advpose/selection.hpp"

namespace advpose {

// Eigenvalue floor applied after every covariance update; keeps sampling
// decompositions valid under floating-point drift.
constexpr double kPsdEpsilon = 1e-12;

enum class StepSizeRule { ExponentialDecay, Csa };

// Adversarial search distribution over the latent z-space: z ~ N(mu, sigma^2 Sigma).
template <std::size_t N>
struct SearchDistribution {
    VecN<N> mean{};
    MatN<N> covariance = MatN<N>::identity();
    double step_size = 0.5;
    VecN<N> evolution_path{};    // rank-1 update path
    VecN<N> csa_path{};          // whitened path, advanced only under the CSA rule
    long iteration = 0;

    static constexpr std::size_t dimension = N;

    void validate() const {
        if (!(step_size >= 0.0) || !std::isfinite(step_size))
            throw InvalidInput("step size must be a finite non-negative number");
        if (max_abs_asymmetry(covariance) > 1e-12)
            throw InvalidInput("covariance is not symmetric");
        if (min_eigenvalue(covariance) < kPsdEpsilon * 0.5)
            throw InvalidInput("covariance has eigenvalues below the PSD floor");
    }
};

// Strategy hyperparameters. Rates follow the usual dimension scaling:
// rank-1 rate ~ 2/n^2, rank-mu rate ~ mu_w/n^2, path rate 4/(n+4).
struct StrategyParams {
    std::size_t dimension = 6;             // n
    int population_size = 20;              // K, candidates per iteration
    int isp_pool = 10;                     // m, first-stage truncation size
    int elite_count = 5;                   // k, second-stage size
    std::vector<double> weights;           // k entries, positive, sum 1
    double variance_effective = 0.0;       // mu_w = 1 / sum w_i^2
    double path_rate = 0.0;                // c
    double rank1_rate = 0.0;               // eta_1
    double rankmu_rate = 0.0;              // eta_mu
    double sigma_decay = 0.9;
    double nat_weight = 1.0;               // lambda, scalarized mode only
    int rankmu_count = 5;                  // h, number of rank-mu terms (= k)
    SelectionMode selection = SelectionMode::TwoStage;
    StepSizeRule step_rule = StepSizeRule::ExponentialDecay;

    void validate() const {
        if (dimension < 1) throw InvalidInput("dimension must be >= 1");
        if (!(population_size >= isp_pool && isp_pool >= elite_count && elite_count >= 1))
            throw InvalidInput("strategy sizes must satisfy K >= m >= k >= 1");
        if (static_cast<int>(weights.size()) != elite_count)
            throw InvalidInput("weights length must equal elite_count");
        double sum = 0.0, sumsq = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw InvalidInput("weights must be positive");
            sum += w;
            sumsq += w * w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("weights must sum to 1");
        if (std::abs(variance_effective - 1.0 / sumsq) > 1e-9)
            throw InvalidInput("variance_effective inconsistent with weights");
        if (!(path_rate > 0.0 && path_rate <= 1.0)) throw InvalidInput("path_rate must be in (0, 1]");
        if (rank1_rate < 0.0 || rankmu_rate < 0.0 || rank1_rate + rankmu_rate >= 1.0)
            throw InvalidInput("rates must satisfy eta_1, eta_mu >= 0 and eta_1 + eta_mu < 1");
        if (!(sigma_decay > 0.0 && sigma_decay <= 1.0))
            throw InvalidInput("sigma_decay must be in (0, 1]");
        if (rankmu_count != elite_count) throw InvalidInput("rank-mu count must equal elite_count");
    }

    // CSA constants, standard forms.
    double csa_rate() const {
        double n = static_cast<double>(dimension), mw = variance_effective;
        return (mw + 2.0) / (n + mw + 5.0);
    }
    double csa_damping() const {
        double n = static_cast<double>(dimension), mw = variance_effective;
        return 1.0 + 2.0 * std::max(0.0, std::sqrt((mw - 1.0) / (n + 1.0)) - 1.0) + csa_rate();
    }
    double expected_normal_norm() const {
        double n = static_cast<double>(dimension);
        return std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
    }
};

inline StrategyParams default_strategy(std::size_t dimension) {
    if (dimension < 1) throw InvalidInput("dimension must be >= 1");
    StrategyParams p;
    p.dimension = dimension;
    p.population_size = 20;
    p.isp_pool = 10;
    p.elite_count = 5;
    p.weights.assign(5, 0.2);
    p.variance_effective = 5.0;
    double n = static_cast<double>(dimension);
    p.path_rate = 4.0 / (n + 4.0);
    p.rank1_rate = 2.0 / (n * n);
    p.rankmu_rate = std::min(p.variance_effective / (n * n), 1.0 - p.rank1_rate - 0.01);
    p.sigma_decay = 0.9;
    p.nat_weight = 1.0;
    p.rankmu_count = p.elite_count;
    return p;
}

inline PoseParams standard_init_pose() { return {90.0, 180.0, 90.0, 0.0, 0.0, 1.0}; }

// mu starts at the latent preimage of the initial pose; Sigma = I, sigma = 0.5.
inline SearchDistribution<6> init_distribution(const PoseBounds& bounds,
                                               const PoseParams& init_pose = standard_init_pose()) {
    SearchDistribution<6> dist;
    try {
        dist.mean = latent_for_pose(init_pose, bounds);
    } catch (const InvalidInput&) {
        throw InvalidInput("initialization pose lies outside the open bounds interval");
    }
    dist.covariance = Mat6::identity();
    dist.step_size = 0.5;
    dist.evolution_path = Vec6{};
    dist.csa_path = Vec6{};
    dist.iteration = 0;
    return dist;
}

namespace detail {

// Sigma = B D^2 B^T with D diagonal; returns B and the diagonal of D.
template <std::size_t N>
struct CovarianceFactor {
    MatN<N> basis;
    VecN<N> sqrt_values;
};

template <std::size_t N>
inline CovarianceFactor<N> factor_covariance(const MatN<N>& cov) {
    EigenDecomposition<N> eig = eigen_symmetric(cov);
    CovarianceFactor<N> f;
    f.basis = eig.vectors;
    for (std::size_t i = 0; i < N; ++i) {
        if (eig.values[i] < -1e-9)
            throw InternalError("covariance lost positive semi-definiteness");
        f.sqrt_values[i] = std::sqrt(std::max(eig.values[i], 0.0));
    }
    return f;
}

}  // namespace detail

// z_i = mu + scale * sigma * B * D * delta_i, delta_i ~ N(0, I) from the
// given stream. scale widens or narrows the spread without touching sigma
// (used by the sigma-scaling sweep).
template <std::size_t N>
inline std::vector<VecN<N>> sample_latents(const SearchDistribution<N>& dist, int count,
                                           double scale, Rng& rng) {
    if (count < 1) throw InvalidInput("sample count must be >= 1");
    auto factor = detail::factor_covariance(dist.covariance);
    std::vector<VecN<N>> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        VecN<N> delta;
        for (std::size_t j = 0; j < N; ++j) delta[j] = rng.normal();
        VecN<N> scaled;
        for (std::size_t j = 0; j < N; ++j) scaled[j] = factor.sqrt_values[j] * delta[j];
        VecN<N> dir = matvec(factor.basis, scaled);
        out.push_back(dist.mean + (scale * dist.step_size) * dir);
    }
    return out;
}

template <std::size_t N>
inline std::vector<VecN<N>> sample_population(const SearchDistribution<N>& dist,
                                              const StrategyParams& params, Rng& rng) {
    return sample_latents(dist, params.population_size, 1.0, rng);
}

template <std::size_t N>
inline std::vector<VecN<N>> sample_population(const SearchDistribution<N>& dist,
                                              const StrategyParams& params,
                                              std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_population(dist, params, rng);
}

// mu' = sum_i w_i z_(i:k) over the selected, rank-ordered latents.
template <std::size_t N>
inline VecN<N> update_mean(const std::vector<VecN<N>>& selected, const StrategyParams& params) {
    if (selected.size() != params.weights.size())
        throw InvalidInput("selected population length does not match weights");
    VecN<N> mu{};
    for (std::size_t i = 0; i < selected.size(); ++i) mu = mu + params.weights[i] * selected[i];
    return mu;
}

// p' = (1-c) p + sqrt(c(2-c)) sqrt(mu_w) (mu' - mu) / sigma.
template <std::size_t N>
inline VecN<N> update_evolution_path(const SearchDistribution<N>& dist, const VecN<N>& new_mean,
                                     const StrategyParams& params) {
    double c = params.path_rate;
    VecN<N> path = (1.0 - c) * dist.evolution_path;
    VecN<N> disp = new_mean - dist.mean;
    if (norm(disp) == 0.0) return path;    // includes the degenerate sigma = 0 run
    if (!(dist.step_size > 0.0)) throw InvalidInput("evolution path update requires sigma > 0");
    double gain = std::sqrt(c * (2.0 - c)) * std::sqrt(params.variance_effective) / dist.step_size;
    return path + gain * disp;
}

// CSA path: like the evolution path but whitened by Sigma^(-1/2), so its
// length is comparable against E||N(0,I)||.
template <std::size_t N>
inline VecN<N> update_csa_path(const SearchDistribution<N>& dist, const VecN<N>& new_mean,
                               const StrategyParams& params) {
    double c = params.csa_rate();
    VecN<N> path = (1.0 - c) * dist.csa_path;
    VecN<N> disp = new_mean - dist.mean;
    if (norm(disp) == 0.0) return path;
    if (!(dist.step_size > 0.0)) throw InvalidInput("CSA path update requires sigma > 0");

    auto factor = detail::factor_covariance(dist.covariance);
    VecN<N> in_basis = matvec(transpose(factor.basis), disp);
    for (std::size_t j = 0; j < N; ++j) {
        if (factor.sqrt_values[j] <= 0.0) throw InternalError("singular covariance in CSA whitening");
        in_basis[j] /= factor.sqrt_values[j];
    }
    VecN<N> whitened = matvec(factor.basis, in_basis);

    double gain = std::sqrt(c * (2.0 - c)) * std::sqrt(params.variance_effective) / dist.step_size;
    return path + gain * whitened;
}

// Symmetrize, then lift eigenvalues below the floor. The matrix is only
// reconstructed when a lift is needed, so exact inputs pass through exactly.
template <std::size_t N>
inline MatN<N> psd_repair(const MatN<N>& m) {
    MatN<N> sym = symmetrized(m);
    EigenDecomposition<N> eig = eigen_symmetric(sym);
    if (eig.values[0] >= kPsdEpsilon) return sym;
    MatN<N> out;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < N; ++k)
                acc += eig.vectors[i][k] * std::max(eig.values[k], kPsdEpsilon) * eig.vectors[j][k];
            out[i][j] = acc;
        }
    return symmetrized(out);
}

// Sigma' = (1 - eta_1 - eta_mu) Sigma + eta_1 p p^T + eta_mu sum_i w_i y_i y_i^T,
// y_i = (z_(i:k) - mu_old) / sigma. Expects dist.evolution_path to already
// hold the updated path and dist.step_size the pre-update sigma.
template <std::size_t N>
inline MatN<N> update_covariance(const SearchDistribution<N>& dist,
                                 const std::vector<VecN<N>>& selected, const VecN<N>& old_mean,
                                 const StrategyParams& params) {
    if (static_cast<int>(selected.size()) != params.rankmu_count)
        throw InvalidInput("selected population length does not match rank-mu count");
    double eta1 = params.rank1_rate, etamu = params.rankmu_rate;

    MatN<N> next;
    double keep = 1.0 - eta1 - etamu;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) next[i][j] = keep * dist.covariance[i][j];

    if (eta1 > 0.0) {
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                next[i][j] += eta1 * dist.evolution_path[i] * dist.evolution_path[j];
    }

    if (etamu > 0.0) {
        for (std::size_t s = 0; s < selected.size(); ++s) {
            VecN<N> y{};
            VecN<N> disp = selected[s] - old_mean;
            if (norm(disp) != 0.0) {
                if (!(dist.step_size > 0.0))
                    throw InvalidInput("covariance update requires sigma > 0");
                y = (1.0 / dist.step_size) * disp;
            }
            double w = etamu * params.weights[s];
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j) next[i][j] += w * y[i] * y[j];
        }
    }

    return psd_repair(next);
}

// Default: exponential decay. CSA: sigma * exp((c_s/d_s)(||p_s||/E||N|| - 1)),
// reading the already-updated CSA path.
template <std::size_t N>
inline double update_step_size(const SearchDistribution<N>& dist, const StrategyParams& params) {
    if (params.step_rule == StepSizeRule::ExponentialDecay)
        return params.sigma_decay * dist.step_size;
    double ratio = norm(dist.csa_path) / params.expected_normal_norm();
    return dist.step_size * std::exp((params.csa_rate() / params.csa_damping()) * (ratio - 1.0));
}

// One run-log line per iteration; field set is stable for the harness.
template <std::size_t N>
struct IterationRecord {
    long iteration = 0;
    double best_isp = 0.0;
    double mean_isp = 0.0;
    double best_nat = 0.0;
    double sigma = 0.0;
    VecN<N> mu{};
    VecN<N> sigma_diag{};
    double wall_ms = 0.0;
};

template <std::size_t N>
struct RunResult {
    std::vector<IterationRecord<N>> log;
    VecN<N> best_z{};
    double best_isp = -1e300;
    double best_nat = 0.0;
    long best_iteration = -1;
};

struct EvolveOptions {
    int budget = 15;
    int threads = 1;
};

// Full optimization loop. The evaluator maps (candidate index, latent) to a
// FitnessRecord and may be called from several threads at once; results are
// re-associated by index, so ranking never depends on completion order.
template <std::size_t N, typename Evaluator,
          typename Observer = std::function<void(const SearchDistribution<N>&,
                                                 const IterationRecord<N>&)>>
inline RunResult<N> evolve(SearchDistribution<N>& dist, const StrategyParams& params, Rng& rng,
                           Evaluator&& evaluate, const EvolveOptions& options = {},
                           Observer observer = {}) {
    params.validate();
    if (options.budget < 1) throw InvalidInput("budget must be >= 1");
    if (options.threads < 1) throw InvalidInput("thread count must be >= 1");

    RunResult<N> result;
    result.log.reserve(options.budget);

    for (int step = 0; step < options.budget; ++step) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<VecN<N>> zs = sample_population(dist, params, rng);
        const int count = static_cast<int>(zs.size());

        std::vector<FitnessRecord> records(count);
        std::vector<std::exception_ptr> failures(count);
        auto eval_range = [&](int begin, int end) {
            for (int i = begin; i < end; ++i) {
                try {
                    records[i] = evaluate(i, zs[i]);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        if (options.threads == 1 || count == 1) {
            eval_range(0, count);
        } else {
            int workers = std::min(options.threads, count);
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) {
                int begin = count * w / workers;
                int end = count * (w + 1) / workers;
                pool.emplace_back(eval_range, begin, end);
            }
            for (auto& th : pool) th.join();
        }
        for (int i = 0; i < count; ++i) {
            if (!failures[i]) continue;
            try {
                std::rethrow_exception(failures[i]);
            } catch (const std::exception& e) {
                throw Error("evaluation failed at iteration " + std::to_string(dist.iteration) +
                            ", candidate " + std::to_string(i) + ": " + e.what());
            }
        }

        RankedPopulation ranked =
            select(records, params.isp_pool, params.elite_count, params.selection, params.nat_weight);
        std::vector<VecN<N>> selected;
        selected.reserve(ranked.selected.size());
        for (int idx : ranked.selected) selected.push_back(zs[idx]);

        VecN<N> old_mean = dist.mean;
        VecN<N> new_mean = update_mean(selected, params);
        VecN<N> new_path = update_evolution_path(dist, new_mean, params);
        VecN<N> new_csa = dist.csa_path;
        if (params.step_rule == StepSizeRule::Csa)
            new_csa = update_csa_path(dist, new_mean, params);

        dist.evolution_path = new_path;
        MatN<N> new_cov = update_covariance(dist, selected, old_mean, params);

        dist.mean = new_mean;
        dist.covariance = new_cov;
        dist.csa_path = new_csa;
        dist.step_size = update_step_size(dist, params);
        dist.iteration += 1;

        IterationRecord<N> rec;
        rec.iteration = dist.iteration;
        rec.sigma = dist.step_size;
        rec.mu = dist.mean;
        for (std::size_t j = 0; j < N; ++j) rec.sigma_diag[j] = dist.covariance[j][j];
        rec.best_isp = -1e300;
        rec.best_nat = -1e300;
        double sum_isp = 0.0;
        for (int i = 0; i < count; ++i) {
            sum_isp += records[i].isp;
            rec.best_nat = std::max(rec.best_nat, records[i].nat);
            if (records[i].isp > rec.best_isp) rec.best_isp = records[i].isp;
            if (records[i].isp > result.best_isp) {
                result.best_isp = records[i].isp;
                result.best_nat = records[i].nat;
                result.best_z = zs[i];
                result.best_iteration = dist.iteration;
            }
        }
        rec.mean_isp = sum_isp / count;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        result.log.push_back(rec);
        if (observer) observer(dist, rec);
    }
    return result;
}

}  // namespace advpose
