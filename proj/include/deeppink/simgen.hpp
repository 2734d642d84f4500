#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "deeppink/data.hpp"
#include "deeppink/errors.hpp"
#include "deeppink/filter.hpp"
#include "deeppink/knockoffs.hpp"
#include "deeppink/net.hpp"
#include "deeppink/rng.hpp"

// Seeded synthetic benchmarks: rows drawn i.i.d. from N(0, Sigma) where the
// precision matrix is (rho^|j-k|), a sparse sign-random coefficient vector,
// and either a linear response y = X beta + eps or the single-index response
// y_i = (x_i' beta)^3 / 2 + eps_i. The analytic Sigma feeds the knockoff
// construction directly (known-covariance mode).

namespace deeppink {

enum class ModelKind { linear, single_index };
enum class BaselineKind { deeppink, naive_mlp };

inline const char* to_string(ModelKind m) {
  return m == ModelKind::linear ? "linear" : "single-index";
}

inline const char* to_string(BaselineKind b) {
  return b == BaselineKind::deeppink ? "deeppink" : "naive-mlp";
}

struct SimConfig {
  int n = 1000;
  int p = 50;
  int s_sparsity = 30;
  double amplitude = 1.5;
  double rho = 0.5;
  double sigma_noise = 1.0;
  ModelKind model = ModelKind::linear;
  double q = 0.2;
  ThresholdRule rule = ThresholdRule::knockoff_plus;
  BaselineKind baseline = BaselineKind::deeppink;
  int repetitions = 10;
  std::uint64_t seed = 1;
  TrainConfig train;
  EnsembleAggregation aggregation = EnsembleAggregation::mean_statistic;
  int workers = 0;  // 0: one per available processor

  void validate() const {
    if (n < 2) throw Error("n must be at least 2");
    if (p < 1) throw Error("p must be at least 1");
    if (s_sparsity < 0 || s_sparsity > p) throw Error("s must lie in [0, p]");
    if (!(rho > -1.0 && rho < 1.0)) throw Error("rho must lie in (-1, 1)");
    if (sigma_noise <= 0.0) throw Error("sigma-noise must be positive");
    if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
    if (repetitions < 1) throw Error("repetitions must be at least 1");
    train.validate();
  }
};

struct GroundTruth {
  Eigen::VectorXd beta;
  std::vector<int> support;  // sorted indices of nonzero coefficients
};

// Rows i.i.d. N(0, Omega^-1) with Omega_jk = rho^|j-k|: draw e ~ N(0, I) and
// solve L' x = e for the Cholesky factor Omega = L L'. Also returns the
// analytic covariance for known-Sigma knockoffs.
inline std::pair<DesignMatrix, Eigen::MatrixXd> gen_design(const SimConfig& cfg,
                                                           std::uint64_t rep_seed) {
  const int p = cfg.p;
  Eigen::MatrixXd omega(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < p; ++k) {
      omega(j, k) = std::pow(cfg.rho, std::abs(j - k));
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("Cholesky of the design precision matrix failed");
  }
  const Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(p, p));

  rng::Generator gen(rng::substream(rep_seed, rng::Stream::design));
  Eigen::MatrixXd e(p, cfg.n);  // one column per observation
  for (Eigen::Index i = 0; i < e.cols(); ++i) {
    for (Eigen::Index j = 0; j < e.rows(); ++j) {
      e(j, i) = gen.normal();
    }
  }
  const Eigen::MatrixXd x =
      llt.matrixU().solve(e).transpose();  // n x p, Cov = Omega^-1

  return {make_design(x), (sigma + sigma.transpose()) / 2.0};
}

// Support drawn uniformly without replacement (partial Fisher-Yates), signs
// i.i.d. uniform on {-1, +1}, magnitudes equal to cfg.amplitude.
inline GroundTruth gen_beta(const SimConfig& cfg, std::uint64_t rep_seed) {
  rng::Generator gen(rng::substream(rep_seed, rng::Stream::beta));
  std::vector<int> indices(cfg.p);
  std::iota(indices.begin(), indices.end(), 0);
  for (int k = 0; k < cfg.s_sparsity; ++k) {
    const auto j = k + static_cast<int>(gen.below(cfg.p - k));
    std::swap(indices[k], indices[j]);
  }
  GroundTruth truth;
  truth.beta = Eigen::VectorXd::Zero(cfg.p);
  truth.support.assign(indices.begin(), indices.begin() + cfg.s_sparsity);
  for (int j : truth.support) {
    truth.beta[j] = gen.uniform() < 0.5 ? cfg.amplitude : -cfg.amplitude;
  }
  std::sort(truth.support.begin(), truth.support.end());
  return truth;
}

inline ResponseVector gen_response(const DesignMatrix& x, const GroundTruth& truth,
                                   const SimConfig& cfg, std::uint64_t rep_seed) {
  if (x.p() != truth.beta.size()) {
    throw DimensionMismatch("design and coefficient dimensions disagree");
  }
  rng::Generator gen(rng::substream(rep_seed, rng::Stream::noise));
  Eigen::VectorXd y = x.values * truth.beta;
  if (cfg.model == ModelKind::single_index) {
    y = y.array().cube() / 2.0;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] += cfg.sigma_noise * gen.normal();
  }
  return make_response(std::move(y));
}

struct RepetitionResult {
  int rep = 0;
  std::uint64_t seed = 0;
  double fdp = 0.0;
  double power = 0.0;
  bool power_defined = true;
  int n_selected = 0;
  double threshold = 0.0;
  std::vector<int> selected;
};

struct ExperimentReport {
  SimConfig config;
  double resolved_l1_lambda = 0.0;
  std::vector<RepetitionResult> repetitions;
  double empirical_fdr = 0.0;   // mean FDP across repetitions
  double mean_power = 0.0;
  double median_n_selected = 0.0;
};

inline RepetitionResult run_repetition(const SimConfig& cfg, int rep) {
  const std::uint64_t rep_seed =
      rng::substream(cfg.seed, rng::Stream::repetition, rep);

  auto [design, sigma] = gen_design(cfg, rep_seed);
  const GroundTruth truth = gen_beta(cfg, rep_seed);
  const ResponseVector y_raw = gen_response(design, truth, cfg, rep_seed);

  // Columns are unit-scale by construction; centering is enough here.
  const DesignMatrix x = standardize(design, /*scale=*/false);
  const ResponseVector y = center_response(y_raw);

  const Eigen::VectorXd s = equicorrelated_s(sigma);
  const KnockoffModel model = build_knockoff_model(sigma, s);
  const AugmentedDesign aug =
      sample_knockoffs(x, model, rng::substream(rep_seed, rng::Stream::knockoff));

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = rng::substream(rep_seed, rng::Stream::ensemble);
  const Eigen::VectorXd w =
      cfg.baseline == BaselineKind::deeppink
          ? run_ensemble<PinkNetwork>(aug, y, train_cfg, cfg.aggregation)
          : run_ensemble<NaiveMlp>(aug, y, train_cfg, cfg.aggregation);

  const SelectionReport report = select(w, cfg.q, cfg.rule);
  const EvalMetrics metrics = evaluate(report, truth.support);

  RepetitionResult result;
  result.rep = rep;
  result.seed = rep_seed;
  result.fdp = metrics.fdp;
  result.power = metrics.power;
  result.power_defined = metrics.power_defined;
  result.n_selected = metrics.n_selected;
  result.threshold = report.threshold;
  result.selected = report.selected;
  return result;
}

namespace detail {

[[noreturn]] inline void rethrow_with_rep(const std::exception_ptr& ep, int rep) {
  const std::string prefix = "repetition " + std::to_string(rep) + ": ";
  try {
    std::rethrow_exception(ep);
  } catch (const DivergedTraining&) {
    throw;
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(prefix + e.what(), e.min_eigenvalue);
  } catch (const SingularSigma& e) {
    throw SingularSigma(prefix + e.what());
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace detail

// Repetitions are independent; they run on a small worker pool and the report
// is assembled in repetition order regardless of completion order.
inline ExperimentReport run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const int reps = cfg.repetitions;

  std::vector<RepetitionResult> results(reps);
  std::vector<std::exception_ptr> failures(reps);
  std::atomic<int> next{0};

  int workers = cfg.workers > 0
                    ? cfg.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, reps));

  auto body = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) break;
      try {
        results[r] = run_repetition(cfg, r);
      } catch (...) {
        failures[r] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }

  for (int r = 0; r < reps; ++r) {
    if (failures[r]) detail::rethrow_with_rep(failures[r], r);
  }

  ExperimentReport report;
  report.config = cfg;
  report.resolved_l1_lambda = cfg.train.resolved_lambda(cfg.n, cfg.p);
  report.repetitions = std::move(results);

  std::vector<double> counts;
  counts.reserve(reps);
  for (const auto& rr : report.repetitions) {
    report.empirical_fdr += rr.fdp;
    report.mean_power += rr.power;
    counts.push_back(static_cast<double>(rr.n_selected));
  }
  report.empirical_fdr /= static_cast<double>(reps);
  report.mean_power /= static_cast<double>(reps);
  std::sort(counts.begin(), counts.end());
  report.median_n_selected = (reps % 2 == 1)
                                 ? counts[reps / 2]
                                 : (counts[reps / 2 - 1] + counts[reps / 2]) / 2.0;
  return report;
}

}  // namespace deeppink
