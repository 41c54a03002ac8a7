#include "atomopt/esgrad.hpp"

#include <cmath>
#include <vector>

#include "atomopt/parallel.hpp"

namespace atomopt::meta {

namespace {

std::vector<Eigen::VectorXd> draw_perturbations(Eigen::Index dim, double sigma,
                                                int n_pairs, RngStream& rng) {
  std::vector<Eigen::VectorXd> eps(static_cast<std::size_t>(n_pairs));
  for (int k = 0; k < n_pairs; ++k) {
    RngStream s = rng.fork(static_cast<std::uint64_t>(k));
    Eigen::VectorXd e(dim);
    for (Eigen::Index i = 0; i < dim; ++i) e[i] = sigma * s.normal();
    eps[static_cast<std::size_t>(k)] = std::move(e);
  }
  return eps;
}

}  // namespace

Eigen::VectorXd es_gradient_generic(const SubBatchLoss& loss,
                                    const Eigen::VectorXd& theta, double sigma,
                                    int n_pairs, RngStream rng,
                                    EvalCounters* counters, int workers,
                                    const CandidateTracker& track) {
  const auto eps = draw_perturbations(theta.size(), sigma, n_pairs, rng);
  std::vector<double> lp(eps.size()), lm(eps.size());
  parallel_for(eps.size() * 2, workers, [&](std::size_t idx) {
    const std::size_t k = idx / 2;
    if (idx % 2 == 0) {
      lp[k] = loss(theta + eps[k], static_cast<int>(k));
    } else {
      lm[k] = loss(theta - eps[k], static_cast<int>(k));
    }
  });
  if (counters) counters->grad_evals += 2 * n_pairs;
  if (track) {
    for (std::size_t k = 0; k < eps.size(); ++k) {
      track(theta + eps[k], lp[k]);
      track(theta - eps[k], lm[k]);
    }
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  const double denom = 2.0 * sigma * sigma;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    grad += (lp[k] - lm[k]) / denom * eps[k];
  }
  return grad / static_cast<double>(n_pairs);
}

Eigen::VectorXd esmc_gradient_generic(const SubBatchLoss& loss,
                                      const Eigen::VectorXd& theta, double sigma,
                                      int n_pairs, RngStream rng,
                                      EvalCounters* counters, int workers,
                                      const CandidateTracker& track,
                                      double* baseline_mean) {
  const auto eps = draw_perturbations(theta.size(), sigma, n_pairs, rng);
  std::vector<double> lp(eps.size()), lm(eps.size()), l0(eps.size());
  parallel_for(eps.size() * 3, workers, [&](std::size_t idx) {
    const std::size_t k = idx / 3;
    switch (idx % 3) {
      case 0: lp[k] = loss(theta + eps[k], static_cast<int>(k)); break;
      case 1: lm[k] = loss(theta - eps[k], static_cast<int>(k)); break;
      default: l0[k] = loss(theta, static_cast<int>(k)); break;
    }
  });
  if (counters) {
    counters->grad_evals += 2 * n_pairs;
    counters->baseline_evals += n_pairs;
  }
  if (track) {
    for (std::size_t k = 0; k < eps.size(); ++k) {
      track(theta + eps[k], lp[k]);
      track(theta - eps[k], lm[k]);
    }
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  const double denom = 2.0 * sigma * sigma;
  double base_sum = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double cp = std::min(l0[k], lp[k]);
    const double cm = std::min(l0[k], lm[k]);
    grad += (cp - cm) / denom * eps[k];
    base_sum += l0[k];
  }
  if (baseline_mean) *baseline_mean = base_sum / static_cast<double>(n_pairs);
  return grad / static_cast<double>(n_pairs);
}

OuterAdam::OuterAdam(Eigen::Index dim, double lr0, double decay, int decay_every)
    : m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)),
      lr0_(lr0),
      decay_(decay),
      decay_every_(decay_every) {}

double OuterAdam::lr_at(long t) const {
  return lr0_ * std::pow(decay_, static_cast<double>(t / decay_every_));
}

void OuterAdam::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  const double lr = lr_at(t_);
  t_ += 1;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_.array() = beta2_ * v_.array() + (1.0 - beta2_) * grad.array().square();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  theta.array() -=
      lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

void OuterAdam::restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v,
                        long t) {
  m_ = m;
  v_ = v;
  t_ = t;
}

}  // namespace atomopt::meta
