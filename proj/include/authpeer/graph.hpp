#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "authpeer/ingest.hpp"

namespace authpeer::graph {

// User x target event-count matrix with degree vectors. Only users/targets
// with at least one edge receive an index, so rows and columns are nonzero
// by construction.
struct AdjacencyMatrix {
  std::vector<std::string> users;    // row index -> user
  std::vector<std::string> targets;  // col index -> target
  struct Entry {
    int user;
    int target;
    int count;
  };
  std::vector<Entry> entries;  // sorted by (user, target)
  std::vector<int64_t> row_sums;
  std::vector<int64_t> col_sums;
  int64_t edge_count = 0;  // total events

  Eigen::MatrixXd to_dense() const;
};

AdjacencyMatrix build_adjacency(const std::vector<ingest::RawEvent>& train_events);

struct SvdResult {
  Eigen::MatrixXd left;   // |U| x rank
  Eigen::MatrixXd right;  // |C| x rank
  Eigen::VectorXd singular_values;  // nonincreasing
};

// Top-rank singular triplets of a dense matrix (full SVD, truncated).
SvdResult truncated_svd(const Eigen::MatrixXd& matrix, int rank);

// Dhillon normalization D_U^{-1/2} A D_C^{-1/2}.
Eigen::MatrixXd bicluster_normalize(const AdjacencyMatrix& adj);

// Smallest l whose leading squared singular-value mass reaches the given
// fraction of the total, capped.
int embedding_rank(const Eigen::VectorXd& singular_values, double mass_fraction = 0.8,
                   int cap = 16);

// Coordinate-triplet dump, header: user,target,count.
void write_adjacency_csv(std::ostream& out, const AdjacencyMatrix& adj);

}  // namespace authpeer::graph
