#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "deeppink/data.hpp"
#include "deeppink/errors.hpp"
#include "deeppink/rng.hpp"

// Gaussian model-X knockoffs. For x ~ N(0, Sigma) a knockoff copy is drawn
// from the conditional law
//   x~ | x  ~  N(x - diag{s} Omega x,  2 diag{s} - diag{s} Omega diag{s})
// with Omega = Sigma^-1, which makes the stacked vector (x, x~) jointly
// normal with covariance blocks [Sigma, Sigma - diag{s}; ., Sigma].

namespace deeppink {

constexpr double kPdTolerance = 1e-8;
constexpr double kEquicorrShrink = 0.95;

enum class CovarianceMode { known, empirical, shrinkage };

inline const char* to_string(CovarianceMode m) {
  switch (m) {
    case CovarianceMode::known: return "known";
    case CovarianceMode::empirical: return "empirical";
    case CovarianceMode::shrinkage: return "shrinkage";
  }
  return "?";
}

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;
  CovarianceMode mode = CovarianceMode::empirical;
  double shrinkage_gamma = 0.0;  // weight on the diagonal target
  double jitter = 0.0;           // diagonal repair applied, 0 when none
};

inline double min_eigenvalue(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s,
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue computation did not converge");
  }
  return solver.eigenvalues().minCoeff();
}

// Escalating diagonal jitter: starts at 1e-10 tr/p, grows tenfold up to
// 1e-4 tr/p, then gives up. Returns the jitter that made Cholesky succeed.
inline double ensure_positive_definite(Eigen::MatrixXd& s) {
  const double unit = s.trace() / static_cast<double>(s.rows());
  double jitter = 0.0;
  for (;;) {
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() == Eigen::Success) return jitter;
    const double next = (jitter == 0.0) ? 1e-10 * unit : 10.0 * jitter;
    if (next > 1e-4 * unit) {
      throw NotPositiveDefinite(
          "covariance is not positive definite after jitter escalation",
          min_eigenvalue(s));
    }
    s.diagonal().array() += next - jitter;
    jitter = next;
  }
}

inline Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& x_centered) {
  const double denom = static_cast<double>(x_centered.rows() - 1);
  Eigen::MatrixXd s = (x_centered.transpose() * x_centered) / denom;
  return (s + s.transpose()) / 2.0;
}

// Closed-form weight for shrinking toward diag(S): ratio of the summed
// sampling variance of the off-diagonal entries to their energy, clipped
// to [0, 1].
inline double shrinkage_gamma(const Eigen::MatrixXd& x_centered,
                              const Eigen::MatrixXd& emp) {
  const Eigen::Index n = x_centered.rows();
  const Eigen::Index p = x_centered.cols();
  if (n < 3) return 1.0;
  double var_sum = 0.0;
  double energy = 0.0;
  const double nn = static_cast<double>(n);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const Eigen::ArrayXd w = x_centered.col(i).array() * x_centered.col(j).array();
      const double w_bar = w.mean();
      const double var_w = (w - w_bar).square().sum() * nn /
                           ((nn - 1.0) * (nn - 1.0) * (nn - 1.0));
      var_sum += var_w;
      energy += emp(i, j) * emp(i, j);
    }
  }
  if (energy <= 0.0) return 1.0;
  return std::clamp(var_sum / energy, 0.0, 1.0);
}

// (1 - gamma) * emp + gamma * diag(emp)
inline Eigen::MatrixXd shrink_covariance(const Eigen::MatrixXd& emp, double gamma) {
  Eigen::MatrixXd out = (1.0 - gamma) * emp;
  out.diagonal() = emp.diagonal();
  return out;
}

inline CovarianceEstimate estimate_covariance(const DesignMatrix& x,
                                              CovarianceMode mode,
                                              const Eigen::MatrixXd* known = nullptr) {
  CovarianceEstimate est;
  est.mode = mode;
  switch (mode) {
    case CovarianceMode::known: {
      if (known == nullptr) throw Error("known covariance mode needs a matrix");
      if (known->rows() != x.p() || known->cols() != x.p()) {
        throw DimensionMismatch("known covariance is " + std::to_string(known->rows()) +
                                "x" + std::to_string(known->cols()) + ", expected " +
                                std::to_string(x.p()) + "x" + std::to_string(x.p()));
      }
      est.sigma = (*known + known->transpose()) / 2.0;
      break;
    }
    case CovarianceMode::empirical: {
      est.sigma = empirical_covariance(x.values);
      break;
    }
    case CovarianceMode::shrinkage: {
      const Eigen::MatrixXd emp = empirical_covariance(x.values);
      est.shrinkage_gamma = shrinkage_gamma(x.values, emp);
      est.sigma = shrink_covariance(emp, est.shrinkage_gamma);
      break;
    }
  }
  est.jitter = ensure_positive_definite(est.sigma);
  return est;
}

namespace detail {

inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularSigma("covariance inversion failed: matrix is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
}

inline Eigen::MatrixXd conditional_covariance(const Eigen::MatrixXd& omega,
                                              const Eigen::VectorXd& s) {
  Eigen::MatrixXd v = -(s.asDiagonal() * omega * s.asDiagonal());
  v.diagonal() += 2.0 * s;
  return (Eigen::MatrixXd(v) + v.transpose()) / 2.0;
}

}  // namespace detail

// Equicorrelated knockoff gap: on the correlation scale every coordinate gets
// shrink * min(1, 2 lambda_min), mapped back through the variances. If the
// conditional covariance still fails the PD check the gap is halved until it
// passes.
inline Eigen::VectorXd equicorrelated_s(const Eigen::MatrixXd& sigma,
                                        double shrink = kEquicorrShrink,
                                        double pd_tolerance = kPdTolerance) {
  const Eigen::Index p = sigma.rows();
  const Eigen::VectorXd d = sigma.diagonal().array().sqrt();
  const Eigen::MatrixXd corr =
      d.cwiseInverse().asDiagonal() * sigma * d.cwiseInverse().asDiagonal();
  const double lambda_min = min_eigenvalue((corr + corr.transpose()) / 2.0);
  if (lambda_min <= 0.0) {
    throw NotPositiveDefinite("correlation matrix is not positive definite",
                              lambda_min);
  }
  const double s_corr = shrink * std::min(1.0, 2.0 * lambda_min);
  Eigen::VectorXd s = s_corr * sigma.diagonal();

  const Eigen::MatrixXd omega = detail::invert_spd(sigma);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const Eigen::MatrixXd v = detail::conditional_covariance(omega, s);
    if (min_eigenvalue(v) >= pd_tolerance) return s;
    s /= 2.0;
  }
  throw NumericalFailure("could not find a positive definite knockoff gap");
}

// Precomputed factors for conditional sampling.
struct KnockoffModel {
  Eigen::MatrixXd sigma;      // p x p covariance
  Eigen::MatrixXd omega;      // Sigma^-1
  Eigen::VectorXd s;          // knockoff gap, all positive
  Eigen::MatrixXd mean_map;   // A = I - diag{s} Omega; conditional mean is A x
  Eigen::MatrixXd cond_chol;  // lower Cholesky factor of 2 diag{s} - diag{s} Omega diag{s}

  Eigen::Index p() const { return sigma.rows(); }
};

inline KnockoffModel build_knockoff_model(const Eigen::MatrixXd& sigma,
                                          const Eigen::VectorXd& s,
                                          double pd_tolerance = kPdTolerance) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != s.size()) {
    throw DimensionMismatch("covariance and knockoff gap dimensions disagree");
  }
  if ((s.array() <= 0.0).any()) {
    throw NotPositiveDefinite("knockoff gap must be strictly positive", 0.0);
  }

  KnockoffModel model;
  model.sigma = (sigma + sigma.transpose()) / 2.0;
  model.s = s;
  model.omega = detail::invert_spd(model.sigma);
  const double inv_err =
      (model.omega * model.sigma - Eigen::MatrixXd::Identity(s.size(), s.size()))
          .cwiseAbs()
          .maxCoeff();
  if (inv_err > 1e-6) {
    throw SingularSigma("covariance too ill-conditioned to invert (residual " +
                        std::to_string(inv_err) + ")");
  }

  model.mean_map = Eigen::MatrixXd::Identity(s.size(), s.size()) -
                   s.asDiagonal() * model.omega;

  const Eigen::MatrixXd v = detail::conditional_covariance(model.omega, s);
  const double v_min_eig = min_eigenvalue(v);
  if (v_min_eig < pd_tolerance) {
    throw NotPositiveDefinite(
        "conditional knockoff covariance is not positive definite (min eigenvalue " +
            std::to_string(v_min_eig) + ")",
        v_min_eig);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("Cholesky of the conditional covariance failed",
                              v_min_eig);
  }
  model.cond_chol = llt.matrixL();
  const double chol_err =
      (model.cond_chol * model.cond_chol.transpose() - v).cwiseAbs().maxCoeff();
  if (chol_err > 1e-8) {
    throw NumericalFailure("Cholesky reconstruction error " + std::to_string(chol_err));
  }
  return model;
}

struct AugmentedDesign {
  DesignMatrix original;
  Eigen::MatrixXd knockoff;  // same shape as original.values

  Eigen::Index n() const { return original.n(); }
  Eigen::Index p() const { return original.p(); }
};

// X~ = X A^T + E L^T with E filled row-major from the seeded generator.
// Pure function of (x, model, seed); never sees the response.
inline AugmentedDesign sample_knockoffs(const DesignMatrix& x,
                                        const KnockoffModel& model,
                                        std::uint64_t seed) {
  if (x.p() != model.p()) {
    throw DimensionMismatch("design has " + std::to_string(x.p()) +
                            " columns, model expects " + std::to_string(model.p()));
  }
  rng::Generator gen(seed);
  Eigen::MatrixXd noise(x.n(), x.p());
  for (Eigen::Index i = 0; i < x.n(); ++i) {
    for (Eigen::Index j = 0; j < x.p(); ++j) {
      noise(i, j) = gen.normal();
    }
  }
  AugmentedDesign aug;
  aug.original = x;
  aug.knockoff = x.values * model.mean_map.transpose() +
                 noise * model.cond_chol.transpose();
  return aug;
}

inline std::vector<std::string> knockoff_names(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(n + "_ko");
  return out;
}

struct ExchangeabilityDiagnostic {
  double dev_xx = 0.0;   // |Cov(X) - Sigma|_max
  double dev_kk = 0.0;   // |Cov(X~) - Sigma|_max
  double dev_xk = 0.0;   // |Cov(X, X~) - (Sigma - diag{s})|_max
  double tolerance = 0.0;
  bool pass = false;

  double worst() const { return std::max({dev_xx, dev_kk, dev_xk}); }
};

// Compares the empirical second moments of the augmented design against the
// joint-normal block structure the construction targets. The tolerance scales
// as c sqrt(log p / n); always returns, never throws.
inline ExchangeabilityDiagnostic exchangeability_diagnostic(
    const AugmentedDesign& aug, const KnockoffModel& model,
    double tolerance_scale = 6.0) {
  const auto& x = aug.original.values;
  const auto& k = aug.knockoff;
  const double denom = static_cast<double>(x.rows() - 1);

  ExchangeabilityDiagnostic diag;
  diag.dev_xx = ((x.transpose() * x) / denom - model.sigma).cwiseAbs().maxCoeff();
  diag.dev_kk = ((k.transpose() * k) / denom - model.sigma).cwiseAbs().maxCoeff();
  Eigen::MatrixXd cross_target = model.sigma;
  cross_target.diagonal() -= model.s;
  diag.dev_xk = ((x.transpose() * k) / denom - cross_target).cwiseAbs().maxCoeff();

  const double p_eff = std::max<double>(2.0, static_cast<double>(x.cols()));
  diag.tolerance =
      tolerance_scale * std::sqrt(std::log(p_eff) / static_cast<double>(x.rows()));
  diag.pass = diag.worst() <= diag.tolerance;
  return diag;
}

}  // namespace deeppink
