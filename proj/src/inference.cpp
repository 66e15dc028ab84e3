#include "authpeer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "authpeer/distributions.hpp"
#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/rng.hpp"

namespace authpeer::inference {

namespace {

constexpr double kLog2PiE = 2.8378770664093454836 + 1.0;  // log(2*pi*e)
constexpr double kEtaClamp = 50.0;  // overflow guard inside the optimizer

// Joint value and gradient in one pass over sufficient-statistic cells.
double value_and_grad(const models::ParamIndex& pidx, const std::vector<models::CellStats>& cells,
                      const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
  grad->setZero(pidx.dim());
  double total = 0.0;
  for (const auto& cell : cells) {
    double eta = theta[cell.lambda_idx];
    if (cell.psi_idx >= 0) eta += theta[cell.psi_idx];
    eta = std::min(eta, kEtaClamp);
    double rate = std::exp(eta);
    total += cell.sum_y * eta - cell.n * rate - cell.sum_log_yfact;
    double g = cell.sum_y - cell.n * rate;
    (*grad)[cell.lambda_idx] += g;
    if (cell.psi_idx >= 0) (*grad)[cell.psi_idx] += g;
  }
  const double inv_var = 1.0 / (models::kPriorSd * models::kPriorSd);
  const double log_norm = -std::log(models::kPriorSd) - 0.5 * (kLog2PiE - 1.0);
  for (int i = 0; i < pidx.lambda_count(); ++i) {
    total += -0.5 * theta[i] * theta[i] * inv_var + log_norm;
    (*grad)[i] -= theta[i] * inv_var;
  }
  if (pidx.has_psi()) {
    for (int g = 0; g < pidx.spec().k; ++g)
      for (int m = 1; m <= 2; ++m) {
        int pi = pidx.psi_index(m, g);
        double mean = pidx.has_mu() ? theta[pidx.mu_index(m)] : 0.0;
        double centered = theta[pi] - mean;
        total += -0.5 * centered * centered * inv_var + log_norm;
        (*grad)[pi] -= centered * inv_var;
        if (pidx.has_mu()) (*grad)[pidx.mu_index(m)] += centered * inv_var;
      }
  }
  if (pidx.has_mu())
    for (int m = 1; m <= 2; ++m) {
      int mi = pidx.mu_index(m);
      total += -0.5 * theta[mi] * theta[mi] * inv_var + log_norm;
      (*grad)[mi] -= theta[mi] * inv_var;
    }
  return total;
}

}  // namespace

VariationalParams fit_svi_cells(const models::ParamIndex& pidx,
                                const std::vector<models::CellStats>& cells,
                                const SviOptions& options, uint64_t seed, FitReport* report) {
  const int dim = pidx.dim();
  VariationalParams vp{Eigen::VectorXd::Zero(dim),
                       Eigen::VectorXd::Constant(dim, options.init_log_sd)};
  if (report != nullptr) {
    *report = FitReport{};
    report->steps = options.steps;
    report->lr = options.lr;
  }
  if (options.steps <= 0) return vp;

  std::vector<RngStream> streams;
  streams.reserve(dim);
  for (int i = 0; i < dim; ++i) streams.emplace_back(seed, static_cast<uint64_t>(i));

  Eigen::VectorXd m_mu = Eigen::VectorXd::Zero(dim), v_mu = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m_ls = Eigen::VectorXd::Zero(dim), v_ls = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd grad(dim), g_mu(dim), g_ls(dim), theta(dim), eps(dim), sd(dim);
  Eigen::VectorXd avg_mu = Eigen::VectorXd::Zero(dim), avg_ls = Eigen::VectorXd::Zero(dim);
  const int tail_start =
      options.steps - std::max(1, static_cast<int>(options.steps * options.tail_average_fraction));
  long tail_count = 0;

  const double inv_l = 1.0 / options.mc_samples;
  std::vector<double> trace;
  trace.reserve(options.steps);
  for (int step = 1; step <= options.steps; ++step) {
    sd = vp.log_sd.array().exp();
    g_mu.setZero();
    g_ls.setZero();
    double elbo_acc = 0.0;
    for (int l = 0; l < options.mc_samples; ++l) {
      for (int i = 0; i < dim; ++i) eps[i] = streams[i].normal();
      theta = vp.mean + sd.cwiseProduct(eps);
      double logp = value_and_grad(pidx, cells, theta, &grad);
      elbo_acc += logp;
      g_mu += grad;
      g_ls += grad.cwiseProduct(eps).cwiseProduct(sd);
    }
    g_mu *= inv_l;
    g_ls = g_ls * inv_l + Eigen::VectorXd::Ones(dim);  // entropy gradient
    double elbo = elbo_acc * inv_l + vp.log_sd.sum() + 0.5 * dim * kLog2PiE;
    if (!std::isfinite(elbo))
      throw ComputeError("fit_svi: non-finite ELBO at step " + std::to_string(step));
    trace.push_back(elbo);

    const double bc1 = 1.0 - std::pow(options.adam_beta1, step);
    const double bc2 = 1.0 - std::pow(options.adam_beta2, step);
    m_mu = options.adam_beta1 * m_mu + (1.0 - options.adam_beta1) * g_mu;
    v_mu = options.adam_beta2 * v_mu + (1.0 - options.adam_beta2) * g_mu.cwiseProduct(g_mu);
    vp.mean += options.lr * (m_mu / bc1).cwiseQuotient(
                   ((v_mu / bc2).cwiseSqrt().array() + options.adam_eps).matrix());
    m_ls = options.adam_beta1 * m_ls + (1.0 - options.adam_beta1) * g_ls;
    v_ls = options.adam_beta2 * v_ls + (1.0 - options.adam_beta2) * g_ls.cwiseProduct(g_ls);
    vp.log_sd += options.lr * (m_ls / bc1).cwiseQuotient(
                     ((v_ls / bc2).cwiseSqrt().array() + options.adam_eps).matrix());

    if (step > tail_start) {
      avg_mu += vp.mean;
      avg_ls += vp.log_sd;
      ++tail_count;
    }
  }
  if (tail_count > 0) {
    vp.mean = avg_mu / static_cast<double>(tail_count);
    vp.log_sd = avg_ls / static_cast<double>(tail_count);
  }
  if (report != nullptr) {
    int window = std::min<int>(100, static_cast<int>(trace.size()));
    double acc = 0.0;
    for (int i = 0; i < window; ++i) acc += trace[trace.size() - 1 - i];
    report->final_elbo = acc / window;
    report->elbo_trace = std::move(trace);
  }
  return vp;
}

VariationalParams fit_svi(const models::ParamIndex& pidx,
                          const std::vector<models::Observation>& observations,
                          const SviOptions& options, uint64_t seed, FitReport* report) {
  return fit_svi_cells(pidx, models::compress_observations(pidx, observations), options, seed,
                       report);
}

PosteriorSamples sample_posterior(const VariationalParams& vp, int n_samples, uint64_t seed) {
  if (n_samples < 1) throw InputError("sample_posterior: need at least one draw");
  const int dim = static_cast<int>(vp.mean.size());
  PosteriorSamples samples;
  samples.seed = seed;
  samples.draws.resize(n_samples, dim);
  for (int i = 0; i < dim; ++i) {
    RngStream stream(seed, static_cast<uint64_t>(i));
    double sd = std::exp(vp.log_sd[i]);  // log_sd = -inf degenerates to a point mass
    for (int s = 0; s < n_samples; ++s) samples.draws(s, i) = vp.mean[i] + sd * stream.normal();
  }
  return samples;
}

QuadratureResult quadrature_oracle_1d(const std::vector<int>& counts, double prior_mean,
                                      double prior_sd) {
  double n = static_cast<double>(counts.size());
  double sum_y = 0.0, sum_lgam = 0.0;
  for (int y : counts) {
    sum_y += y;
    sum_lgam += std::lgamma(static_cast<double>(y) + 1.0);
  }
  const double lo = -20.0, hi = 20.0;
  auto moments = [&](long nodes, QuadratureResult* out) {
    const double h = (hi - lo) / static_cast<double>(nodes - 1);
    std::vector<double> logf(nodes);
    double max_logf = -std::numeric_limits<double>::infinity();
    for (long i = 0; i < nodes; ++i) {
      double ell = lo + h * i;
      double lf = sum_y * ell - n * std::exp(ell) - sum_lgam +
                  dist::normal_logpdf(ell, prior_mean, prior_sd);
      logf[i] = lf;
      max_logf = std::max(max_logf, lf);
    }
    double z = 0.0, m1 = 0.0, m2 = 0.0, r1 = 0.0, r2 = 0.0;
    for (long i = 0; i < nodes; ++i) {
      double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
      double p = w * std::exp(logf[i] - max_logf);
      double ell = lo + h * i;
      double rate = std::exp(ell);
      z += p;
      m1 += p * ell;
      m2 += p * ell * ell;
      r1 += p * rate;
      r2 += p * rate * rate;
    }
    out->mean_log = m1 / z;
    out->sd_log = std::sqrt(std::max(0.0, m2 / z - out->mean_log * out->mean_log));
    out->mean_rate = r1 / z;
    out->sd_rate = std::sqrt(std::max(0.0, r2 / z - out->mean_rate * out->mean_rate));
  };
  long nodes = 10001;
  QuadratureResult prev;
  moments(nodes, &prev);
  for (int refine = 0; refine < 8; ++refine) {
    nodes = nodes * 2 - 1;
    QuadratureResult cur;
    moments(nodes, &cur);
    bool stable = std::fabs(cur.mean_log - prev.mean_log) < 1e-6 &&
                  std::fabs(cur.sd_log - prev.sd_log) < 1e-6 &&
                  std::fabs(cur.mean_rate - prev.mean_rate) < 1e-6 * (1.0 + cur.mean_rate) &&
                  std::fabs(cur.sd_rate - prev.sd_rate) < 1e-6 * (1.0 + cur.sd_rate);
    if (stable) return cur;
    prev = cur;
  }
  throw ComputeError("quadrature_oracle_1d: no convergence under node doubling");
}

PosteriorSamples mh_sample(const models::ParamIndex& pidx,
                           const std::vector<models::Observation>& observations, int iterations,
                           uint64_t seed) {
  const int dim = pidx.dim();
  if (dim > 500) throw InputError("mh_sample: oracle limited to dim <= 500");
  if (iterations < 100) throw InputError("mh_sample: too few iterations");
  auto cells = models::compress_observations(pidx, observations);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim), grad_unused(dim);
  double logp = value_and_grad(pidx, cells, theta, &grad_unused);

  RngStream rng(seed, 0xacce5);
  double step_size = 2.38 / std::sqrt(static_cast<double>(dim));
  const int burnin = iterations / 2;
  int window_accepts = 0, window_size = 0;
  int post_accepts = 0;
  PosteriorSamples samples;
  samples.seed = seed;
  samples.draws.resize(iterations - burnin, dim);
  Eigen::VectorXd proposal(dim);
  for (int iter = 0; iter < iterations; ++iter) {
    for (int i = 0; i < dim; ++i) proposal[i] = theta[i] + step_size * rng.normal();
    double logp_new = value_and_grad(pidx, cells, proposal, &grad_unused);
    bool accept = std::log(rng.uniform()) < logp_new - logp;
    if (accept) {
      theta = proposal;
      logp = logp_new;
    }
    if (iter < burnin) {
      window_accepts += accept ? 1 : 0;
      ++window_size;
      if (window_size == 50) {
        double rate = static_cast<double>(window_accepts) / window_size;
        step_size *= std::exp(1.2 * (rate - 0.3));
        step_size = std::clamp(step_size, 1e-4, 10.0);
        window_accepts = 0;
        window_size = 0;
      }
    } else {
      post_accepts += accept ? 1 : 0;
      samples.draws.row(iter - burnin) = theta;
    }
  }
  double acc_rate = static_cast<double>(post_accepts) / (iterations - burnin);
  if (acc_rate < 0.05 || acc_rate > 0.7)
    throw ComputeError("mh_sample: acceptance rate " + std::to_string(acc_rate) +
                       " outside [0.05, 0.7] after adaptation");
  return samples;
}

double r_hat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw InputError("r_hat: need at least 2 chains");
  const size_t len = chains.front().size();
  if (len < 4) throw InputError("r_hat: chains must have length >= 4");
  for (const auto& chain : chains)
    if (chain.size() != len) throw InputError("r_hat: chains must have equal lengths");

  // Split each chain into halves.
  const size_t n = len / 2;
  std::vector<std::pair<size_t, size_t>> spans;
  for (size_t c = 0; c < chains.size(); ++c) {
    spans.push_back({c, 0});
    spans.push_back({c, len - n});
  }
  const double m = static_cast<double>(spans.size());
  std::vector<double> means(spans.size()), vars(spans.size());
  for (size_t j = 0; j < spans.size(); ++j) {
    const auto& chain = chains[spans[j].first];
    double mean = 0.0;
    for (size_t t = 0; t < n; ++t) mean += chain[spans[j].second + t];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (size_t t = 0; t < n; ++t) {
      double c = chain[spans[j].second + t] - mean;
      ss += c * c;
    }
    means[j] = mean;
    vars[j] = ss / static_cast<double>(n - 1);
  }
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= m;
  double b = 0.0;
  for (double v : means) b += (v - grand) * (v - grand);
  b *= static_cast<double>(n) / (m - 1.0);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= m;
  // Identical chains cannot witness divergence; zero between-variance (which
  // covers the zero-total-variance case) maps to 1 by convention.
  if (b == 0.0) return 1.0;
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w +
                    b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

FitReport rhat_gate(const std::vector<VariationalParams>& fits, int n_samples, uint64_t seed) {
  if (fits.size() < 2) throw InputError("rhat_gate: need at least 2 fits");
  const int dim = static_cast<int>(fits.front().mean.size());
  std::vector<PosteriorSamples> draws;
  draws.reserve(fits.size());
  for (size_t k = 0; k < fits.size(); ++k)
    draws.push_back(sample_posterior(fits[k], n_samples, mix_seed(seed, 0x5eed0 + k)));
  FitReport report;
  report.r_hat.resize(dim);
  for (int i = 0; i < dim; ++i) {
    std::vector<std::vector<double>> chains;
    for (const auto& d : draws) {
      const auto& col = d.draws.col(i);
      chains.emplace_back(col.data(), col.data() + col.size());
    }
    report.r_hat[i] = r_hat(chains);
  }
  report.max_r_hat = report.r_hat.size() > 0 ? report.r_hat.maxCoeff() : 1.0;
  report.converged = report.max_r_hat < kRhatGate;
  return report;
}

FitReport convergence_gate_cells(const models::ParamIndex& pidx,
                                 const std::vector<models::CellStats>& cells,
                                 const SviOptions& options, int n_fits, int n_samples,
                                 uint64_t seed, std::vector<VariationalParams>* fits) {
  if (n_fits < 2) throw InputError("convergence_gate: need at least 2 fits");
  std::vector<VariationalParams> local;
  FitReport first_report;
  for (int k = 0; k < n_fits; ++k) {
    FitReport r;
    local.push_back(fit_svi_cells(pidx, cells, options, mix_seed(seed, k), &r));
    if (k == 0) first_report = std::move(r);
  }
  FitReport gate = rhat_gate(local, n_samples, seed);
  gate.final_elbo = first_report.final_elbo;
  gate.steps = options.steps;
  gate.lr = options.lr;
  gate.elbo_trace = std::move(first_report.elbo_trace);
  if (fits != nullptr) *fits = std::move(local);
  if (!gate.converged)
    logging::warn("convergence gate failed: max r_hat " + std::to_string(gate.max_r_hat));
  return gate;
}

FitReport convergence_gate(const models::ParamIndex& pidx,
                           const std::vector<models::Observation>& observations,
                           const SviOptions& options, int n_fits, int n_samples, uint64_t seed,
                           std::vector<VariationalParams>* fits) {
  return convergence_gate_cells(pidx, models::compress_observations(pidx, observations), options,
                                n_fits, n_samples, seed, fits);
}

}  // namespace authpeer::inference
