#include "authpeer/models.hpp"

#include <cmath>
#include <map>

#include "authpeer/distributions.hpp"
#include "authpeer/errors.hpp"

namespace authpeer::models {

const char* model_name(ModelId id) {
  switch (id) {
    case ModelId::kM1: return "m1";
    case ModelId::kM2: return "m2";
    case ModelId::kM3: return "m3";
    case ModelId::kM4: return "m4";
    case ModelId::kM5: return "m5";
    case ModelId::kM6: return "m6";
  }
  return "?";
}

std::optional<ModelId> model_from_name(const std::string& name) {
  if (name.size() == 2 && (name[0] == 'm' || name[0] == 'M') && name[1] >= '1' && name[1] <= '6')
    return static_cast<ModelId>(name[1] - '0');
  return std::nullopt;
}

ModelSpec ModelSpec::make(ModelId id, int k) {
  ModelSpec spec;
  spec.id = id;
  switch (id) {
    case ModelId::kM1: break;
    case ModelId::kM2: spec.uses_seasonality = true; break;
    case ModelId::kM3: spec.uses_groups = true; break;
    case ModelId::kM4:
      spec.uses_seasonality = true;
      spec.uses_groups = true;
      break;
    case ModelId::kM5:
      spec.uses_seasonality = true;
      spec.uses_groups = true;
      spec.uses_method = true;
      break;
    case ModelId::kM6:
      spec.uses_seasonality = true;
      spec.uses_groups = true;
      spec.uses_method = true;
      spec.hierarchical_method = true;
      break;
  }
  spec.k = spec.uses_groups ? k : 1;
  if (spec.uses_groups && k < 1) throw InputError("ModelSpec: grouped model needs k >= 1");
  return spec;
}

ParamIndex::ParamIndex(const ModelSpec& spec) : spec_(spec) {
  const int k = spec.uses_groups ? spec.k : 1;
  if (spec.uses_seasonality) {
    lambda_count_ = 24 * 7 * (spec.uses_groups ? k : 1);
  } else {
    lambda_count_ = spec.uses_groups ? k : 1;
  }
  dim_ = lambda_count_;
  if (spec.uses_method) {
    psi_offset_ = dim_;
    dim_ += 2 * k;
  }
  if (spec.hierarchical_method) {
    mu_offset_ = dim_;
    dim_ += 2;
  }
}

int ParamIndex::lambda_index(int h, int d, int g) const {
  if (h < 0 || h > 23 || d < 1 || d > 7) throw ComputeError("ParamIndex: h/d out of range");
  if (spec_.uses_groups && (g < 0 || g >= spec_.k))
    throw ComputeError("ParamIndex: group out of range");
  if (!spec_.uses_seasonality) return spec_.uses_groups ? g : 0;
  int cell = (d - 1) * 24 + h;
  return spec_.uses_groups ? g * 168 + cell : cell;
}

int ParamIndex::psi_index(int m, int g) const {
  if (psi_offset_ < 0) throw ComputeError("ParamIndex: model has no method effects");
  if (m < 1 || m > 2 || g < 0 || g >= spec_.k) throw ComputeError("ParamIndex: psi out of range");
  return psi_offset_ + g * 2 + (m - 1);
}

int ParamIndex::mu_index(int m) const {
  if (mu_offset_ < 0) throw ComputeError("ParamIndex: model has no hyper-means");
  if (m < 1 || m > 2) throw ComputeError("ParamIndex: mu out of range");
  return mu_offset_ + (m - 1);
}

std::string ParamIndex::name(int pos) const {
  if (pos < 0 || pos >= dim_) throw ComputeError("ParamIndex: position out of range");
  if (pos < lambda_count_) {
    if (!spec_.uses_seasonality) {
      if (!spec_.uses_groups) return "log_lambda";
      return "log_lambda[g=" + std::to_string(pos) + "]";
    }
    int g = pos / 168;
    int cell = pos % 168;
    int d = cell / 24 + 1;
    int h = cell % 24;
    std::string s = "log_lambda[h=" + std::to_string(h) + ",d=" + std::to_string(d);
    if (spec_.uses_groups) s += ",g=" + std::to_string(g);
    return s + "]";
  }
  if (mu_offset_ >= 0 && pos >= mu_offset_) return "mu[m=" + std::to_string(pos - mu_offset_ + 1) + "]";
  int off = pos - psi_offset_;
  return "log_psi[m=" + std::to_string(off % 2 + 1) + ",g=" + std::to_string(off / 2) + "]";
}

std::vector<Observation> build_observations(const std::vector<ingest::HourlyCount>& rows,
                                            const clustering::GroupAssignment& groups) {
  std::vector<Observation> observations;
  observations.reserve(rows.size());
  for (const auto& row : rows) {
    auto it = groups.mapping.find(row.user);
    if (it == groups.mapping.end())
      throw InputError("build_observations: user without group: " + row.user);
    Observation obs;
    obs.y = row.count;
    obs.h = row.hour;
    obs.d = row.dow;
    obs.g = it->second;
    obs.m = row.method == ingest::Method::kKerberos ? 1 : 2;
    observations.push_back(obs);
  }
  return observations;
}

double rate_lookup(const ParamIndex& pidx, const Eigen::VectorXd& latents, const Observation& obs) {
  if (latents.size() != pidx.dim()) throw ComputeError("rate_lookup: latent dimension mismatch");
  double log_rate = latents[pidx.lambda_index(obs)];
  if (pidx.has_psi()) log_rate += latents[pidx.psi_index(obs.m, obs.g)];
  return std::exp(log_rate);
}

std::vector<CellStats> compress_observations(const ParamIndex& pidx,
                                             const std::vector<Observation>& observations) {
  std::map<std::pair<int, int>, CellStats> cells;
  for (const auto& obs : observations) {
    int li = pidx.lambda_index(obs);
    int pi = pidx.has_psi() ? pidx.psi_index(obs.m, obs.g) : -1;
    CellStats& cell = cells[{li, pi}];
    cell.lambda_idx = li;
    cell.psi_idx = pi;
    cell.n += 1.0;
    cell.sum_y += obs.y;
    cell.sum_log_yfact += std::lgamma(static_cast<double>(obs.y) + 1.0);
  }
  std::vector<CellStats> out;
  out.reserve(cells.size());
  for (auto& [key, cell] : cells) out.push_back(cell);
  return out;
}

namespace {

// Gaussian prior terms shared by log_joint and its gradient. The ordering of
// the latent blocks is fixed by ParamIndex.
double prior_log_density(const ParamIndex& pidx, const Eigen::VectorXd& latents) {
  double total = 0.0;
  for (int i = 0; i < pidx.lambda_count(); ++i)
    total += dist::normal_logpdf(latents[i], 0.0, kPriorSd);
  if (pidx.has_psi()) {
    for (int g = 0; g < pidx.spec().k; ++g)
      for (int m = 1; m <= 2; ++m) {
        double mean = pidx.has_mu() ? latents[pidx.mu_index(m)] : 0.0;
        total += dist::normal_logpdf(latents[pidx.psi_index(m, g)], mean, kPriorSd);
      }
  }
  if (pidx.has_mu())
    for (int m = 1; m <= 2; ++m) total += dist::normal_logpdf(latents[pidx.mu_index(m)], 0.0, kPriorSd);
  return total;
}

void prior_grad(const ParamIndex& pidx, const Eigen::VectorXd& latents, Eigen::VectorXd* grad) {
  const double inv_var = 1.0 / (kPriorSd * kPriorSd);
  for (int i = 0; i < pidx.lambda_count(); ++i) (*grad)[i] -= latents[i] * inv_var;
  if (pidx.has_psi()) {
    for (int g = 0; g < pidx.spec().k; ++g)
      for (int m = 1; m <= 2; ++m) {
        int pi = pidx.psi_index(m, g);
        double mean = pidx.has_mu() ? latents[pidx.mu_index(m)] : 0.0;
        double centered = latents[pi] - mean;
        (*grad)[pi] -= centered * inv_var;
        if (pidx.has_mu()) (*grad)[pidx.mu_index(m)] += centered * inv_var;
      }
  }
  if (pidx.has_mu())
    for (int m = 1; m <= 2; ++m) (*grad)[pidx.mu_index(m)] -= latents[pidx.mu_index(m)] * inv_var;
}

}  // namespace

double log_joint_cells(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                       const std::vector<CellStats>& cells) {
  if (latents.size() != pidx.dim()) throw ComputeError("log_joint: latent dimension mismatch");
  if (!latents.allFinite()) throw ComputeError("log_joint: non-finite latents");
  double total = 0.0;
  for (const auto& cell : cells) {
    double eta = latents[cell.lambda_idx];
    if (cell.psi_idx >= 0) eta += latents[cell.psi_idx];
    total += cell.sum_y * eta - cell.n * std::exp(eta) - cell.sum_log_yfact;
  }
  return total + prior_log_density(pidx, latents);
}

void log_joint_grad_cells(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                          const std::vector<CellStats>& cells, Eigen::VectorXd* grad) {
  grad->setZero(pidx.dim());
  for (const auto& cell : cells) {
    double eta = latents[cell.lambda_idx];
    if (cell.psi_idx >= 0) eta += latents[cell.psi_idx];
    double g = cell.sum_y - cell.n * std::exp(eta);
    (*grad)[cell.lambda_idx] += g;
    if (cell.psi_idx >= 0) (*grad)[cell.psi_idx] += g;
  }
  prior_grad(pidx, latents, grad);
}

double log_joint(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                 const std::vector<Observation>& observations) {
  if (latents.size() != pidx.dim()) throw ComputeError("log_joint: latent dimension mismatch");
  if (!latents.allFinite()) throw ComputeError("log_joint: non-finite latents");
  double total = 0.0;
  for (const auto& obs : observations)
    total += dist::poisson_logpmf(obs.y, rate_lookup(pidx, latents, obs));
  return total + prior_log_density(pidx, latents);
}

Eigen::VectorXd log_joint_grad(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                               const std::vector<Observation>& observations) {
  Eigen::VectorXd grad;
  log_joint_grad_cells(pidx, latents, compress_observations(pidx, observations), &grad);
  return grad;
}

}  // namespace authpeer::models
