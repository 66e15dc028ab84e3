#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "authpeer/models.hpp"

namespace authpeer::inference {

// Mean-field Gaussian over the unconstrained latent vector.
struct VariationalParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_sd;
};

struct PosteriorSamples {
  Eigen::MatrixXd draws;  // S x dim
  uint64_t seed = 0;
};

struct FitReport {
  double final_elbo = 0.0;
  int steps = 0;
  double lr = 0.0;
  Eigen::VectorXd r_hat;  // per parameter; empty until the gate runs
  double max_r_hat = 0.0;
  bool converged = false;
  std::vector<double> elbo_trace;  // per-step single-estimate trace
};

struct SviOptions {
  int steps = 5000;
  double lr = 0.01;
  int mc_samples = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Returned parameters are the average of the final-fraction iterates, which
  // removes the fixed-learning-rate oscillation around the optimum.
  double tail_average_fraction = 0.2;
  double init_log_sd = std::log(0.5);
};

// Reparameterized stochastic ELBO ascent with Adam at fixed learning rate.
// Deterministic given (seed, options, data).
VariationalParams fit_svi(const models::ParamIndex& pidx,
                          const std::vector<models::Observation>& observations,
                          const SviOptions& options, uint64_t seed, FitReport* report = nullptr);

VariationalParams fit_svi_cells(const models::ParamIndex& pidx,
                                const std::vector<models::CellStats>& cells,
                                const SviOptions& options, uint64_t seed,
                                FitReport* report = nullptr);

PosteriorSamples sample_posterior(const VariationalParams& vp, int n_samples, uint64_t seed);

// Poisson-log-normal posterior moments for a single cell by trapezoid
// quadrature over log-rate in [-20, 20], refined until stable to 1e-6.
struct QuadratureResult {
  double mean_log = 0.0;
  double sd_log = 0.0;
  double mean_rate = 0.0;
  double sd_rate = 0.0;
};
QuadratureResult quadrature_oracle_1d(const std::vector<int>& counts, double prior_mean,
                                      double prior_sd);

// Random-walk Metropolis with step size adapted during burn-in to a 0.2-0.4
// acceptance rate; burn-in discarded. Desk-scale oracle (dim <= 500).
PosteriorSamples mh_sample(const models::ParamIndex& pidx,
                           const std::vector<models::Observation>& observations, int iterations,
                           uint64_t seed);

// Split-Rhat over equal-length chains; 1.0 by convention when the pooled
// sample has zero variance.
double r_hat(const std::vector<std::vector<double>>& chains);

// Per-parameter split-Rhat across already-fitted variational distributions,
// each contributing one chain of n_samples draws.
FitReport rhat_gate(const std::vector<VariationalParams>& fits, int n_samples, uint64_t seed);

// Runs K independently seeded SVI fits, draws n_samples from each variational
// distribution, and computes per-parameter split-Rhat across the fits.
FitReport convergence_gate(const models::ParamIndex& pidx,
                           const std::vector<models::Observation>& observations,
                           const SviOptions& options, int n_fits, int n_samples, uint64_t seed,
                           std::vector<VariationalParams>* fits = nullptr);

FitReport convergence_gate_cells(const models::ParamIndex& pidx,
                                 const std::vector<models::CellStats>& cells,
                                 const SviOptions& options, int n_fits, int n_samples,
                                 uint64_t seed, std::vector<VariationalParams>* fits = nullptr);

constexpr double kRhatGate = 1.01;

}  // namespace authpeer::inference
