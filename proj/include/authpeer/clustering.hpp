#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "authpeer/graph.hpp"

namespace authpeer::clustering {

enum class GroupingMethod { kHr, kTs, kKmeans, kGmm, kBicluster, kTrue };

const char* grouping_name(GroupingMethod m);
std::optional<GroupingMethod> grouping_from_name(const std::string& name);

// user -> contiguous 0-based group id covering every retained user.
struct GroupAssignment {
  GroupingMethod method = GroupingMethod::kHr;
  std::map<std::string, int> mapping;
  int k = 1;
};

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x dims
  double wcss = 0.0;
};

// Lloyd iterations to an assignment fixpoint (or max_iter), best of
// `restarts` seeded k-means++ starts by WCSS.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed, int restarts = 10,
                    int max_iter = 300);

// Interior k maximizing the second difference of the WCSS curve; ties break
// toward the smallest k. Curve keys must be contiguous, length >= 4.
int select_k_elbow(const std::map<int, double>& wcss_curve);

struct GmmResult {
  std::vector<int> labels;
  Eigen::MatrixXd means;      // k x dims
  Eigen::MatrixXd variances;  // k x dims, diagonal covariances
  Eigen::VectorXd weights;
  double log_lik = 0.0;
  double bic = 0.0;
  int k = 1;
  std::vector<double> loglik_trace;   // selected fit, per EM iteration
  std::map<int, double> bic_curve;    // k -> BIC
};

// Diagonal-covariance EM; k chosen by minimum BIC over [k_min, k_max].
GmmResult gmm_em(const Eigen::MatrixXd& points, int k_min, int k_max, uint64_t seed);
GmmResult gmm_em_single(const Eigen::MatrixXd& points, int k, uint64_t seed);

// Spectral bi-clustering: SVD of the Dhillon-normalized adjacency, k-means on
// degree-scaled left singular vectors (leading vector skipped).
std::vector<int> bicluster(const graph::AdjacencyMatrix& adj, int k, uint64_t seed);

// Per-user AR(p), d in {0,1} fit by conditional least squares, order by AIC;
// emits (mean, sd, skewness, excess kurtosis, lag-1 autocorrelation) of the
// residuals. Series shorter than 10 are dropped (reported via kept).
struct TsFeatureResult {
  Eigen::MatrixXd features;        // kept.size() x 5
  std::vector<size_t> kept;        // indices into the input series list
  std::vector<int> selected_p;
  std::vector<int> selected_d;
};
TsFeatureResult ts_features(const std::vector<std::vector<double>>& series);

// Z-scores columns (zero-variance columns become zero) and delegates to gmm_em.
GroupAssignment cluster_ts(const Eigen::MatrixXd& features, const std::vector<std::string>& users,
                           int k_min, int k_max, uint64_t seed);

// Divisions to contiguous ids; users missing from the table share a dedicated
// "unknown" group.
GroupAssignment hr_grouping(const std::map<std::string, std::string>& hr_table,
                            const std::set<std::string>& users);

double adjusted_rand_index(const GroupAssignment& a, const GroupAssignment& b);
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace authpeer::clustering
