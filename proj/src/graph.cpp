#include "authpeer/graph.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "authpeer/errors.hpp"

namespace authpeer::graph {

Eigen::MatrixXd AdjacencyMatrix::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<long>(users.size()),
                                                static_cast<long>(targets.size()));
  for (const auto& e : entries) dense(e.user, e.target) = e.count;
  return dense;
}

AdjacencyMatrix build_adjacency(const std::vector<ingest::RawEvent>& events) {
  if (events.empty()) throw InputError("build_adjacency: empty event list");
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& ev : events) ++counts[{ev.user, ev.target}];

  AdjacencyMatrix adj;
  std::map<std::string, int> user_idx, target_idx;
  for (const auto& [edge, n] : counts) {
    user_idx.emplace(edge.first, 0);
    target_idx.emplace(edge.second, 0);
    (void)n;
  }
  for (auto& [user, idx] : user_idx) {
    idx = static_cast<int>(adj.users.size());
    adj.users.push_back(user);
  }
  for (auto& [target, idx] : target_idx) {
    idx = static_cast<int>(adj.targets.size());
    adj.targets.push_back(target);
  }
  adj.row_sums.assign(adj.users.size(), 0);
  adj.col_sums.assign(adj.targets.size(), 0);
  adj.entries.reserve(counts.size());
  for (const auto& [edge, n] : counts) {
    int u = user_idx[edge.first];
    int c = target_idx[edge.second];
    adj.entries.push_back({u, c, n});
    adj.row_sums[u] += n;
    adj.col_sums[c] += n;
    adj.edge_count += n;
  }
  std::sort(adj.entries.begin(), adj.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.user, a.target) < std::tie(b.user, b.target);
  });
  return adj;
}

SvdResult truncated_svd(const Eigen::MatrixXd& matrix, int rank) {
  const int max_rank = static_cast<int>(std::min(matrix.rows(), matrix.cols()));
  if (rank < 1 || rank > max_rank)
    throw ComputeError("truncated_svd: rank " + std::to_string(rank) + " out of range [1," +
                       std::to_string(max_rank) + "]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw ComputeError("truncated_svd: decomposition did not converge");
  SvdResult result;
  result.left = svd.matrixU().leftCols(rank);
  result.right = svd.matrixV().leftCols(rank);
  result.singular_values = svd.singularValues().head(rank);
  return result;
}

Eigen::MatrixXd bicluster_normalize(const AdjacencyMatrix& adj) {
  for (size_t u = 0; u < adj.row_sums.size(); ++u)
    if (adj.row_sums[u] <= 0)
      throw ComputeError("bicluster_normalize: zero row sum for user index " + std::to_string(u));
  for (size_t c = 0; c < adj.col_sums.size(); ++c)
    if (adj.col_sums[c] <= 0)
      throw ComputeError("bicluster_normalize: zero column sum for target index " +
                         std::to_string(c));
  Eigen::MatrixXd normalized = Eigen::MatrixXd::Zero(static_cast<long>(adj.users.size()),
                                                     static_cast<long>(adj.targets.size()));
  for (const auto& e : adj.entries) {
    normalized(e.user, e.target) =
        e.count / std::sqrt(static_cast<double>(adj.row_sums[e.user]) *
                            static_cast<double>(adj.col_sums[e.target]));
  }
  return normalized;
}

int embedding_rank(const Eigen::VectorXd& singular_values, double mass_fraction, int cap) {
  double total = singular_values.squaredNorm();
  if (total <= 0.0) return 1;
  double acc = 0.0;
  for (int i = 0; i < singular_values.size(); ++i) {
    acc += singular_values[i] * singular_values[i];
    if (acc >= mass_fraction * total) return std::min(i + 1, cap);
  }
  return std::min(static_cast<int>(singular_values.size()), cap);
}

void write_adjacency_csv(std::ostream& out, const AdjacencyMatrix& adj) {
  out << "user,target,count\n";
  for (const auto& e : adj.entries)
    out << adj.users[e.user] << ',' << adj.targets[e.target] << ',' << e.count << '\n';
}

}  // namespace authpeer::graph
