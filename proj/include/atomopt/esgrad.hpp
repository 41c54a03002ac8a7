#pragma once

#include <Eigen/Dense>
#include <functional>

#include "atomopt/rng.hpp"

namespace atomopt::meta {

/// Loss-evaluation bookkeeping for the accounting invariants.
struct EvalCounters {
  long grad_evals = 0;      // loss calls made for gradient estimation
  long baseline_evals = 0;  // unperturbed-loss calls (clipped estimator, GA)
  long aux_evals = 0;       // logging-only calls
  long unrolls = 0;         // inner trajectories actually executed
  long diverged = 0;        // unrolls that hit non-finite energies
};

/// loss(theta, k) scores `theta` on sub-batch k. Must be pure and
/// thread-safe: calls may run concurrently.
using SubBatchLoss = std::function<double(const Eigen::VectorXd&, int)>;

/// Observer for every (candidate, measured loss) pair; invoked sequentially
/// in a fixed order after the evaluations complete.
using CandidateTracker = std::function<void(const Eigen::VectorXd&, double)>;

/// Antithetic evolution-strategies gradient estimate:
///   mean_k [L(theta + eps_k) - L(theta - eps_k)] / (2 sigma^2) * eps_k,
/// eps_k ~ Normal(0, I sigma^2). Pair k is scored on sub-batch k, so +eps
/// and -eps share initializations.
Eigen::VectorXd es_gradient_generic(const SubBatchLoss& loss,
                                    const Eigen::VectorXd& theta, double sigma,
                                    int n_pairs, RngStream rng,
                                    EvalCounters* counters = nullptr,
                                    int workers = 1,
                                    const CandidateTracker& track = {});

/// Meta-loss-clipped variant: every perturbed loss is replaced by
/// min[L(theta), L(theta +- eps)], with L(theta) evaluated once per
/// sub-batch. Pairs where both perturbations score worse than the baseline
/// contribute exactly zero. `baseline_mean` (optional) receives the mean
/// unperturbed loss across sub-batches.
Eigen::VectorXd esmc_gradient_generic(const SubBatchLoss& loss,
                                      const Eigen::VectorXd& theta, double sigma,
                                      int n_pairs, RngStream rng,
                                      EvalCounters* counters = nullptr,
                                      int workers = 1,
                                      const CandidateTracker& track = {},
                                      double* baseline_mean = nullptr);

/// Outer-loop Adam with the exponentially decayed schedule
/// lr(t) = lr0 * decay^floor(t / decay_every).
class OuterAdam {
 public:
  OuterAdam(Eigen::Index dim, double lr0, double decay, int decay_every);

  double lr_at(long t) const;
  double lr() const { return lr_at(t_); }
  long updates_done() const { return t_; }

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

  // Checkpoint access.
  const Eigen::VectorXd& m() const { return m_; }
  const Eigen::VectorXd& v() const { return v_; }
  void restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v, long t);

 private:
  Eigen::VectorXd m_, v_;
  long t_ = 0;
  double lr0_;
  double decay_;
  int decay_every_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
};

}  // namespace atomopt::meta
