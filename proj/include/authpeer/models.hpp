#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "authpeer/clustering.hpp"
#include "authpeer/ingest.hpp"

namespace authpeer::models {

enum class ModelId { kM1 = 1, kM2, kM3, kM4, kM5, kM6 };

const char* model_name(ModelId id);  // "m1".."m6"
std::optional<ModelId> model_from_name(const std::string& name);

// Log-rate and log-method-effect priors are Normal(0, 5) on the log scale;
// 5 is a standard deviation.
constexpr double kPriorSd = 5.0;

struct ModelSpec {
  ModelId id = ModelId::kM1;
  bool uses_seasonality = false;  // M2, M4-M6
  bool uses_groups = false;       // M3-M6
  bool uses_method = false;       // M5-M6
  bool hierarchical_method = false;  // M6
  int k = 1;                      // |G| when grouped

  static ModelSpec make(ModelId id, int k);
};

struct Observation {
  int y = 0;  // >= 1
  int h = 0;  // 0..23
  int d = 1;  // 1 = Sunday .. 7
  int g = 0;  // group id
  int m = 1;  // 1 = Kerberos, 2 = NTLM
};

// Dense layout of the unconstrained latent vector:
//   [log-rates][log-method-effects][method hyper-means]
// Sizes: M1 1, M2 168, M3 k, M4 168k, M5 168k + 2k, M6 168k + 2k + 2.
class ParamIndex {
 public:
  explicit ParamIndex(const ModelSpec& spec);

  int dim() const { return dim_; }
  int lambda_count() const { return lambda_count_; }
  bool has_psi() const { return psi_offset_ >= 0; }
  bool has_mu() const { return mu_offset_ >= 0; }

  int lambda_index(int h, int d, int g) const;
  int psi_index(int m, int g) const;  // m in {1,2}
  int mu_index(int m) const;

  int lambda_index(const Observation& obs) const { return lambda_index(obs.h, obs.d, obs.g); }

  std::string name(int position) const;  // self-describing latent names

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  int dim_ = 0;
  int lambda_count_ = 0;
  int psi_offset_ = -1;
  int mu_offset_ = -1;
};

// One Observation per hourly count row; fields a model ignores stay populated
// so the same list serves every spec. Fails on any user without a group.
std::vector<Observation> build_observations(const std::vector<ingest::HourlyCount>& rows,
                                            const clustering::GroupAssignment& groups);

double rate_lookup(const ParamIndex& pidx, const Eigen::VectorXd& latents, const Observation& obs);

double log_joint(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                 const std::vector<Observation>& observations);

Eigen::VectorXd log_joint_grad(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                               const std::vector<Observation>& observations);

// Per-cell sufficient statistics: observations sharing the same latent
// indices collapse to (n, sum_y, sum_log_y!) without changing the log joint.
struct CellStats {
  int lambda_idx = 0;
  int psi_idx = -1;
  double n = 0.0;
  double sum_y = 0.0;
  double sum_log_yfact = 0.0;
};

std::vector<CellStats> compress_observations(const ParamIndex& pidx,
                                             const std::vector<Observation>& observations);

double log_joint_cells(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                       const std::vector<CellStats>& cells);

void log_joint_grad_cells(const ParamIndex& pidx, const Eigen::VectorXd& latents,
                          const std::vector<CellStats>& cells, Eigen::VectorXd* grad);

}  // namespace authpeer::models
