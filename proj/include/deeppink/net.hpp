#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "deeppink/data.hpp"
#include "deeppink/errors.hpp"
#include "deeppink/knockoffs.hpp"
#include "deeppink/rng.hpp"

// Paired-input network for knockoff feature selection. The first layer holds
// p two-input linear filters, one per (feature, knockoff) pair, with weights
// z_j and z~_j initialized equally so the pair competes on even terms during
// training. Filter outputs pass through an elementwise weight vector w0 into
// a two-hidden-layer ReLU MLP (p units per layer):
//
//   h_j = z_j x_j + z~_j x~_j
//   g   = w0 .* h
//   a1  = relu(w1^T g + b1)
//   a2  = relu(w2^T a1 + b2)
//   y^  = w3^T a2 + b3
//
// w1 and w2 are stored so that the aggregate path weight used for importance
// extraction composes without transposition:
//
//   w_agg = w0 .* (w1 w2 w3),  Z_j = z_j w_agg_j,  Z~_j = z~_j w_agg_j
//
// Training minimizes mean squared error plus an L1 penalty on all weights
// (biases exempt) via Adam on manually derived gradients.

namespace deeppink {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 10;
  int epochs = 200;
  std::optional<double> l1_lambda;  // unset: l1_multiplier * sqrt(2 log p / n)
  double l1_multiplier = 1.0;
  int runs = 5;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double resolved_lambda(Eigen::Index n, Eigen::Index p) const {
    if (l1_lambda) return *l1_lambda;
    return l1_multiplier *
           std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
  }

  void validate() const {
    if (learning_rate <= 0.0) throw Error("learning_rate must be positive");
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (runs < 1) throw Error("runs must be at least 1");
    if (l1_lambda && *l1_lambda < 0.0) throw Error("l1_lambda must be nonnegative");
    if (l1_multiplier < 0.0) throw Error("l1_multiplier must be nonnegative");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
      throw Error("adam betas must lie in [0, 1)");
    }
  }
};

// One minibatch, samples as columns.
struct Batch {
  Eigen::MatrixXd x;        // p x B
  Eigen::MatrixXd x_tilde;  // p x B
  Eigen::VectorXd y;        // B
};

// Flat parameter storage with named views. Layout (matrices column-major):
//   z | z_tilde | w0 | w1 | w2 | w3 | b1 | b2 | b3
// All weights precede all biases, so the L1 penalty acts on a contiguous
// prefix of length weight_count().
class PinkNetwork {
 public:
  explicit PinkNetwork(int p)
      : p_(p), theta(Eigen::VectorXd::Zero(6 * static_cast<Eigen::Index>(p) +
                                           2 * static_cast<Eigen::Index>(p) * p + 1)) {}

  int p() const { return p_; }
  Eigen::Index size() const { return theta.size(); }
  Eigen::Index weight_count() const { return off_b1(); }

  Eigen::Index off_z() const { return 0; }
  Eigen::Index off_z_tilde() const { return p_; }
  Eigen::Index off_w0() const { return 2 * pl(); }
  Eigen::Index off_w1() const { return 3 * pl(); }
  Eigen::Index off_w2() const { return 3 * pl() + pl() * pl(); }
  Eigen::Index off_w3() const { return 3 * pl() + 2 * pl() * pl(); }
  Eigen::Index off_b1() const { return 4 * pl() + 2 * pl() * pl(); }
  Eigen::Index off_b2() const { return 5 * pl() + 2 * pl() * pl(); }
  Eigen::Index off_b3() const { return 6 * pl() + 2 * pl() * pl(); }

  auto z() { return theta.segment(off_z(), p_); }
  auto z() const { return theta.segment(off_z(), p_); }
  auto z_tilde() { return theta.segment(off_z_tilde(), p_); }
  auto z_tilde() const { return theta.segment(off_z_tilde(), p_); }
  auto w0() { return theta.segment(off_w0(), p_); }
  auto w0() const { return theta.segment(off_w0(), p_); }
  Eigen::Map<Eigen::MatrixXd> w1() { return {theta.data() + off_w1(), pl(), pl()}; }
  Eigen::Map<const Eigen::MatrixXd> w1() const {
    return {theta.data() + off_w1(), pl(), pl()};
  }
  Eigen::Map<Eigen::MatrixXd> w2() { return {theta.data() + off_w2(), pl(), pl()}; }
  Eigen::Map<const Eigen::MatrixXd> w2() const {
    return {theta.data() + off_w2(), pl(), pl()};
  }
  auto w3() { return theta.segment(off_w3(), p_); }
  auto w3() const { return theta.segment(off_w3(), p_); }
  auto b1() { return theta.segment(off_b1(), p_); }
  auto b1() const { return theta.segment(off_b1(), p_); }
  auto b2() { return theta.segment(off_b2(), p_); }
  auto b2() const { return theta.segment(off_b2(), p_); }
  double& b3() { return theta[off_b3()]; }
  double b3() const { return theta[off_b3()]; }

  // Filter weights start at 1/sqrt(2) for both members of each pair; hidden
  // weights are zero-mean normal with variance 2 / fan_in; biases zero.
  // Draw order: w0, w1 (column-major), w2, w3.
  static PinkNetwork init(int p, std::uint64_t seed) {
    PinkNetwork net(p);
    rng::Generator gen(seed);
    const double filter_init = std::sqrt(0.5);
    net.z().setConstant(filter_init);
    net.z_tilde().setConstant(filter_init);
    const double sd = std::sqrt(2.0 / static_cast<double>(p));
    for (Eigen::Index i = net.off_w0(); i < net.off_b1(); ++i) {
      net.theta[i] = sd * gen.normal();
    }
    return net;
  }

  Eigen::VectorXd theta;

 private:
  Eigen::Index pl() const { return static_cast<Eigen::Index>(p_); }
  int p_;
};

// Same MLP sized for the stacked (x, x~) input, without the pairwise filter
// layer. Layout: w1 (2p x p) | w2 (p x p) | w3 | b1 | b2 | b3.
class NaiveMlp {
 public:
  explicit NaiveMlp(int p)
      : p_(p), theta(Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(p) * p +
                                           3 * static_cast<Eigen::Index>(p) + 1)) {}

  int p() const { return p_; }
  Eigen::Index size() const { return theta.size(); }
  Eigen::Index weight_count() const { return off_b1(); }

  Eigen::Index off_w1() const { return 0; }
  Eigen::Index off_w2() const { return 2 * pl() * pl(); }
  Eigen::Index off_w3() const { return 3 * pl() * pl(); }
  Eigen::Index off_b1() const { return 3 * pl() * pl() + pl(); }
  Eigen::Index off_b2() const { return 3 * pl() * pl() + 2 * pl(); }
  Eigen::Index off_b3() const { return 3 * pl() * pl() + 3 * pl(); }

  Eigen::Map<Eigen::MatrixXd> w1() { return {theta.data() + off_w1(), 2 * pl(), pl()}; }
  Eigen::Map<const Eigen::MatrixXd> w1() const {
    return {theta.data() + off_w1(), 2 * pl(), pl()};
  }
  Eigen::Map<Eigen::MatrixXd> w2() { return {theta.data() + off_w2(), pl(), pl()}; }
  Eigen::Map<const Eigen::MatrixXd> w2() const {
    return {theta.data() + off_w2(), pl(), pl()};
  }
  auto w3() { return theta.segment(off_w3(), p_); }
  auto w3() const { return theta.segment(off_w3(), p_); }
  auto b1() { return theta.segment(off_b1(), p_); }
  auto b1() const { return theta.segment(off_b1(), p_); }
  auto b2() { return theta.segment(off_b2(), p_); }
  auto b2() const { return theta.segment(off_b2(), p_); }
  double& b3() { return theta[off_b3()]; }
  double b3() const { return theta[off_b3()]; }

  static NaiveMlp init(int p, std::uint64_t seed) {
    NaiveMlp net(p);
    rng::Generator gen(seed);
    const double sd1 = std::sqrt(2.0 / (2.0 * p));
    const double sd = std::sqrt(2.0 / static_cast<double>(p));
    for (Eigen::Index i = net.off_w1(); i < net.off_w2(); ++i) net.theta[i] = sd1 * gen.normal();
    for (Eigen::Index i = net.off_w2(); i < net.off_b1(); ++i) net.theta[i] = sd * gen.normal();
    return net;
  }

  Eigen::VectorXd theta;

 private:
  Eigen::Index pl() const { return static_cast<Eigen::Index>(p_); }
  int p_;
};

inline double forward(const PinkNetwork& net, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& x_tilde) {
  if (x.size() != net.p() || x_tilde.size() != net.p()) {
    throw DimensionMismatch("input length does not match network width");
  }
  const Eigen::VectorXd h = net.z().cwiseProduct(x) + net.z_tilde().cwiseProduct(x_tilde);
  const Eigen::VectorXd g = net.w0().cwiseProduct(h);
  const Eigen::VectorXd a1 =
      ((net.w1().transpose() * g + net.b1()).array().max(0.0)).matrix();
  const Eigen::VectorXd a2 =
      ((net.w2().transpose() * a1 + net.b2()).array().max(0.0)).matrix();
  return net.w3().dot(a2) + net.b3();
}

inline double forward(const NaiveMlp& net, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& x_tilde) {
  if (x.size() != net.p() || x_tilde.size() != net.p()) {
    throw DimensionMismatch("input length does not match network width");
  }
  Eigen::VectorXd u(2 * net.p());
  u << x, x_tilde;
  const Eigen::VectorXd a1 =
      ((net.w1().transpose() * u + net.b1()).array().max(0.0)).matrix();
  const Eigen::VectorXd a2 =
      ((net.w2().transpose() * a1 + net.b2()).array().max(0.0)).matrix();
  return net.w3().dot(a2) + net.b3();
}

template <class Model>
double loss(const Model& net, const Batch& batch, double lambda) {
  if (batch.y.size() == 0) throw Error("loss needs a nonempty batch");
  double mse = 0.0;
  for (Eigen::Index b = 0; b < batch.y.size(); ++b) {
    const double r =
        forward(net, batch.x.col(b), batch.x_tilde.col(b)) - batch.y[b];
    mse += r * r;
  }
  mse /= static_cast<double>(batch.y.size());
  return mse + lambda * net.theta.head(net.weight_count()).template lpNorm<1>();
}

// Exact gradient of `loss` for the pairwise network. ReLU and L1 subgradients
// at 0 are taken as 0. Returns the batch loss; `grad` is laid out like theta.
inline double backward(const PinkNetwork& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::MatrixXd>& x_tilde,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                       Eigen::VectorXd& grad) {
  const Eigen::Index p = net.p();
  const Eigen::Index batch = y.size();
  if (batch == 0) throw Error("backward needs a nonempty batch");

  const Eigen::MatrixXd h = net.z().asDiagonal() * x + net.z_tilde().asDiagonal() * x_tilde;
  const Eigen::MatrixXd g = net.w0().asDiagonal() * h;
  Eigen::MatrixXd s1 = net.w1().transpose() * g;
  s1.colwise() += net.b1();
  const Eigen::MatrixXd a1 = s1.cwiseMax(0.0);
  Eigen::MatrixXd s2 = net.w2().transpose() * a1;
  s2.colwise() += net.b2();
  const Eigen::MatrixXd a2 = s2.cwiseMax(0.0);
  const Eigen::VectorXd resid =
      (a2.transpose() * net.w3()).array() + net.b3() - y.array();

  const double inv_b = 1.0 / static_cast<double>(batch);
  const double mse = resid.squaredNorm() * inv_b;

  grad.resize(net.size());
  const Eigen::VectorXd dyhat = 2.0 * inv_b * resid;

  grad.segment(net.off_w3(), p) = a2 * dyhat;
  grad[net.off_b3()] = dyhat.sum();

  Eigen::MatrixXd ds2 = net.w3() * dyhat.transpose();
  ds2 = (s2.array() > 0.0).select(ds2, 0.0);
  Eigen::Map<Eigen::MatrixXd>(grad.data() + net.off_w2(), p, p).noalias() =
      a1 * ds2.transpose();
  grad.segment(net.off_b2(), p) = ds2.rowwise().sum();

  Eigen::MatrixXd ds1 = net.w2() * ds2;
  ds1 = (s1.array() > 0.0).select(ds1, 0.0);
  Eigen::Map<Eigen::MatrixXd>(grad.data() + net.off_w1(), p, p).noalias() =
      g * ds1.transpose();
  grad.segment(net.off_b1(), p) = ds1.rowwise().sum();

  const Eigen::MatrixXd dg = net.w1() * ds1;
  grad.segment(net.off_w0(), p) = dg.cwiseProduct(h).rowwise().sum();
  const Eigen::MatrixXd dh = net.w0().asDiagonal() * dg;
  grad.segment(net.off_z(), p) = dh.cwiseProduct(x).rowwise().sum();
  grad.segment(net.off_z_tilde(), p) = dh.cwiseProduct(x_tilde).rowwise().sum();

  grad.head(net.weight_count()) +=
      lambda * net.theta.head(net.weight_count()).array().sign().matrix();
  return mse + lambda * net.theta.head(net.weight_count()).lpNorm<1>();
}

inline double backward(const NaiveMlp& net, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::MatrixXd>& x_tilde,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda,
                       Eigen::VectorXd& grad) {
  const Eigen::Index p = net.p();
  const Eigen::Index batch = y.size();
  if (batch == 0) throw Error("backward needs a nonempty batch");

  Eigen::MatrixXd u(2 * p, batch);
  u.topRows(p) = x;
  u.bottomRows(p) = x_tilde;

  Eigen::MatrixXd s1 = net.w1().transpose() * u;
  s1.colwise() += net.b1();
  const Eigen::MatrixXd a1 = s1.cwiseMax(0.0);
  Eigen::MatrixXd s2 = net.w2().transpose() * a1;
  s2.colwise() += net.b2();
  const Eigen::MatrixXd a2 = s2.cwiseMax(0.0);
  const Eigen::VectorXd resid =
      (a2.transpose() * net.w3()).array() + net.b3() - y.array();

  const double inv_b = 1.0 / static_cast<double>(batch);
  const double mse = resid.squaredNorm() * inv_b;

  grad.resize(net.size());
  const Eigen::VectorXd dyhat = 2.0 * inv_b * resid;

  grad.segment(net.off_w3(), p) = a2 * dyhat;
  grad[net.off_b3()] = dyhat.sum();

  Eigen::MatrixXd ds2 = net.w3() * dyhat.transpose();
  ds2 = (s2.array() > 0.0).select(ds2, 0.0);
  Eigen::Map<Eigen::MatrixXd>(grad.data() + net.off_w2(), p, p).noalias() =
      a1 * ds2.transpose();
  grad.segment(net.off_b2(), p) = ds2.rowwise().sum();

  Eigen::MatrixXd ds1 = net.w2() * ds2;
  ds1 = (s1.array() > 0.0).select(ds1, 0.0);
  Eigen::Map<Eigen::MatrixXd>(grad.data() + net.off_w1(), 2 * p, p).noalias() =
      u * ds1.transpose();
  grad.segment(net.off_b1(), p) = ds1.rowwise().sum();

  grad.head(net.weight_count()) +=
      lambda * net.theta.head(net.weight_count()).array().sign().matrix();
  return mse + lambda * net.theta.head(net.weight_count()).lpNorm<1>();
}

template <class Model>
Eigen::VectorXd backward(const Model& net, const Batch& batch, double lambda) {
  Eigen::VectorXd grad;
  backward(net, batch.x, batch.x_tilde, batch.y, lambda, grad);
  return grad;
}

struct AdamState {
  Eigen::VectorXd m, v;
  explicit AdamState(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

// m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
// theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                      AdamState& state, long t, const TrainConfig& cfg) {
  state.m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * grads;
  state.v = cfg.adam_beta2 * state.v.array() +
            (1.0 - cfg.adam_beta2) * grads.array().square();
  const double m_corr = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
  params.array() -= cfg.learning_rate * (state.m.array() / m_corr) /
                    ((state.v.array() / v_corr).sqrt() + cfg.adam_eps);
}

// Epochs of shuffled minibatches with Adam updates. Deterministic given
// cfg.seed: the run seed feeds separate init and shuffle sub-streams. Throws
// DivergedTraining as soon as a batch loss stops being finite.
template <class Model = PinkNetwork>
Model train(const AugmentedDesign& aug, const ResponseVector& y, const TrainConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = aug.n();
  const Eigen::Index p = aug.p();
  if (y.n() != n) {
    throw DimensionMismatch("response has " + std::to_string(y.n()) +
                            " entries, design has " + std::to_string(n) + " rows");
  }
  const double lambda = cfg.resolved_lambda(n, p);

  Model net = Model::init(static_cast<int>(p),
                          rng::substream(cfg.seed, rng::Stream::init));
  rng::Generator shuffle_gen(rng::substream(cfg.seed, rng::Stream::shuffle));

  const Eigen::MatrixXd xs = aug.original.values.transpose();  // p x n
  const Eigen::MatrixXd ks = aug.knockoff.transpose();         // p x n

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n);
  Eigen::MatrixXd bx(p, bs), bk(p, bs);
  Eigen::VectorXd by(bs);
  Eigen::VectorXd grad(net.size());
  AdamState state(net.size());

  long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_gen.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      for (Eigen::Index b = 0; b < m; ++b) {
        const int idx = order[static_cast<std::size_t>(start + b)];
        bx.col(b) = xs.col(idx);
        bk.col(b) = ks.col(idx);
        by[b] = y.values[idx];
      }
      const double batch_loss =
          backward(net, bx.leftCols(m), bk.leftCols(m), by.head(m), lambda, grad);
      if (!std::isfinite(batch_loss)) throw DivergedTraining(epoch, batch_loss);
      adam_step(net.theta, grad, state, ++t, cfg);
    }
  }
  return net;
}

struct ImportancePair {
  Eigen::VectorXd Z;
  Eigen::VectorXd Z_tilde;
  Eigen::VectorXd w_agg;  // aggregate path weight; empty for the naive baseline
};

inline ImportancePair importance(const PinkNetwork& net) {
  ImportancePair imp;
  const Eigen::VectorXd path = net.w1() * (net.w2() * net.w3());
  imp.w_agg = net.w0().cwiseProduct(path);
  imp.Z = net.z().cwiseProduct(imp.w_agg);
  imp.Z_tilde = net.z_tilde().cwiseProduct(imp.w_agg);
  return imp;
}

// Path product through the first-layer rows: row j plays the role of the
// original filter, row j+p the knockoff one.
inline ImportancePair importance(const NaiveMlp& net) {
  ImportancePair imp;
  const Eigen::VectorXd path = net.w1() * (net.w2() * net.w3());
  imp.Z = path.head(net.p());
  imp.Z_tilde = path.tail(net.p());
  return imp;
}

enum class EnsembleAggregation { mean_statistic, mean_importance };

inline const char* to_string(EnsembleAggregation a) {
  return a == EnsembleAggregation::mean_statistic ? "mean-statistic"
                                                  : "mean-importance";
}

inline Eigen::VectorXd aggregate_statistic(const std::vector<ImportancePair>& imps,
                                           EnsembleAggregation agg) {
  if (imps.empty()) throw Error("ensemble needs at least one run");
  const Eigen::Index p = imps.front().Z.size();
  const double r = static_cast<double>(imps.size());
  if (agg == EnsembleAggregation::mean_statistic) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    for (const auto& imp : imps) {
      w += (imp.Z.array().square() - imp.Z_tilde.array().square()).matrix();
    }
    return w / r;
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd zt = Eigen::VectorXd::Zero(p);
  for (const auto& imp : imps) {
    z += imp.Z;
    zt += imp.Z_tilde;
  }
  z /= r;
  zt /= r;
  return (z.array().square() - zt.array().square()).matrix();
}

template <class Model>
struct EnsembleResult {
  Eigen::VectorXd w;
  std::vector<std::uint64_t> run_seeds;
  std::vector<Model> networks;
  std::vector<ImportancePair> importances;
};

template <class Model = PinkNetwork>
EnsembleResult<Model> run_ensemble_seeded(
    const AugmentedDesign& aug, const ResponseVector& y, const TrainConfig& cfg,
    const std::vector<std::uint64_t>& run_seeds,
    EnsembleAggregation agg = EnsembleAggregation::mean_statistic) {
  if (run_seeds.empty()) throw Error("ensemble needs at least one run seed");
  EnsembleResult<Model> result;
  result.run_seeds = run_seeds;
  for (std::uint64_t run_seed : run_seeds) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = run_seed;
    result.networks.push_back(train<Model>(aug, y, run_cfg));
    result.importances.push_back(importance(result.networks.back()));
  }
  result.w = aggregate_statistic(result.importances, agg);
  return result;
}

// Trains cfg.runs networks on per-run sub-streams of cfg.seed and aggregates
// their statistics (elementwise mean of W by default).
template <class Model = PinkNetwork>
Eigen::VectorXd run_ensemble(const AugmentedDesign& aug, const ResponseVector& y,
                             const TrainConfig& cfg,
                             EnsembleAggregation agg = EnsembleAggregation::mean_statistic) {
  cfg.validate();
  std::vector<std::uint64_t> run_seeds;
  run_seeds.reserve(cfg.runs);
  for (int r = 0; r < cfg.runs; ++r) {
    run_seeds.push_back(rng::substream(cfg.seed, rng::Stream::train_run, r));
  }
  return run_ensemble_seeded<Model>(aug, y, cfg, run_seeds, agg).w;
}

}  // namespace deeppink
