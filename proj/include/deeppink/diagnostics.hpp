#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>

#include "deeppink/errors.hpp"
#include "deeppink/net.hpp"
#include "deeppink/rng.hpp"

namespace deeppink {

struct GradientCheckResult {
  int instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

// Pre-activations of both hidden layers for a batch; used to screen ReLU
// kinks out of the finite-difference stencil.
inline double min_abs_preactivation(const PinkNetwork& net, const Batch& batch) {
  const Eigen::MatrixXd h = net.z().asDiagonal() * batch.x +
                            net.z_tilde().asDiagonal() * batch.x_tilde;
  const Eigen::MatrixXd g = net.w0().asDiagonal() * h;
  Eigen::MatrixXd s1 = net.w1().transpose() * g;
  s1.colwise() += net.b1();
  Eigen::MatrixXd s2 = net.w2().transpose() * s1.cwiseMax(0.0);
  s2.colwise() += net.b2();
  return std::min(s1.cwiseAbs().minCoeff(), s2.cwiseAbs().minCoeff());
}

}  // namespace detail

// Central finite differences against the analytic gradient on random networks
// and batches. Instances with a pre-activation or penalized weight close to a
// kink are redrawn; a sign change inside the stencil would measure a
// one-sided slope the subgradient convention does not promise to match.
// Relative error uses max(1, |analytic|, |numeric|) in the denominator.
inline GradientCheckResult gradient_check(int instances, int max_p, std::uint64_t seed,
                                          double step = 1e-5, double tolerance = 1e-4) {
  GradientCheckResult result;
  result.tolerance = tolerance;

  std::uint64_t instance_seed = seed;
  int attempts = 0;
  while (result.instances < instances) {
    if (++attempts > 20 * instances) {
      throw NumericalFailure("gradient check could not find kink-free instances");
    }
    instance_seed = rng::splitmix64(instance_seed + 1);
    rng::Generator gen(instance_seed);

    const int p = 2 + static_cast<int>(gen.below(static_cast<std::uint64_t>(max_p - 1)));
    PinkNetwork net = PinkNetwork::init(p, gen.next_u64());
    for (Eigen::Index i = net.off_b1(); i < net.size(); ++i) {
      net.theta[i] = 0.3 * gen.normal();
    }

    const int b = 3;
    Batch batch;
    batch.x.resize(p, b);
    batch.x_tilde.resize(p, b);
    batch.y.resize(b);
    for (int c = 0; c < b; ++c) {
      for (int r = 0; r < p; ++r) {
        batch.x(r, c) = gen.normal();
        batch.x_tilde(r, c) = gen.normal();
      }
      batch.y[c] = gen.normal();
    }

    if (detail::min_abs_preactivation(net, batch) < 1e-3) continue;
    if (net.theta.head(net.weight_count()).cwiseAbs().minCoeff() < 10.0 * step) continue;

    const double lambda = 0.05;
    Eigen::VectorXd grad;
    backward(net, batch.x, batch.x_tilde, batch.y, lambda, grad);

    PinkNetwork probe = net;
    for (Eigen::Index i = 0; i < net.size(); ++i) {
      const double saved = probe.theta[i];
      probe.theta[i] = saved + step;
      const double up = loss(probe, batch, lambda);
      probe.theta[i] = saved - step;
      const double down = loss(probe, batch, lambda);
      probe.theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double rel = std::abs(numeric - grad[i]) /
                         std::max({1.0, std::abs(numeric), std::abs(grad[i])});
      result.max_rel_error = std::max(result.max_rel_error, rel);
    }
    ++result.instances;
  }
  result.pass = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace deeppink
