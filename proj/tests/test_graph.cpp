#include <doctest.h>

#include <sstream>

#include "authpeer/errors.hpp"
#include "authpeer/graph.hpp"
#include "authpeer/rng.hpp"
#include "authpeer/timeutil.hpp"

using namespace authpeer;

namespace {

ingest::RawEvent edge(const std::string& user, const std::string& target) {
  ingest::RawEvent ev;
  ev.ts = 1704067200;
  ev.user = user;
  ev.target = target;
  ev.method = ingest::Method::kKerberos;
  ev.outcome = ingest::Outcome::kSuccess;
  return ev;
}

// the 4x4 block fixture: [[3,2,0,0],[2,3,0,0],[0,0,3,2],[0,0,2,3]]
std::vector<ingest::RawEvent> block_fixture() {
  std::vector<ingest::RawEvent> events;
  auto add = [&](const char* u, const char* c, int n) {
    for (int i = 0; i < n; ++i) events.push_back(edge(u, c));
  };
  add("u1", "c1", 3);
  add("u1", "c2", 2);
  add("u2", "c1", 2);
  add("u2", "c2", 3);
  add("u3", "c3", 3);
  add("u3", "c4", 2);
  add("u4", "c3", 2);
  add("u4", "c4", 3);
  return events;
}

}  // namespace

TEST_CASE("build_adjacency counts events per edge") {
  auto adj = graph::build_adjacency({edge("u1", "c1"), edge("u1", "c1"), edge("u1", "c2")});
  REQUIRE(adj.users.size() == 1);
  REQUIRE(adj.targets.size() == 2);
  auto dense = adj.to_dense();
  CHECK(dense(0, 0) == 2);
  CHECK(dense(0, 1) == 1);
  CHECK(adj.row_sums[0] == 3);
  CHECK(adj.edge_count == 3);
}

TEST_CASE("build_adjacency single edge") {
  auto adj = graph::build_adjacency({edge("solo", "target")});
  CHECK(adj.users.size() == 1);
  CHECK(adj.targets.size() == 1);
  CHECK(adj.to_dense()(0, 0) == 1);
  CHECK(adj.row_sums[0] == 1);
  CHECK(adj.col_sums[0] == 1);
  CHECK_THROWS_AS(graph::build_adjacency({}), InputError);
}

TEST_CASE("block fixture row sums and edge conservation") {
  auto events = block_fixture();
  auto adj = graph::build_adjacency(events);
  REQUIRE(adj.users.size() == 4);
  for (int u = 0; u < 4; ++u) CHECK(adj.row_sums[u] == 5);
  CHECK(adj.edge_count == static_cast<int64_t>(events.size()));
}

TEST_CASE("truncated_svd fixtures") {
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);
  auto svd = graph::truncated_svd(identity, 2);
  CHECK(svd.singular_values[0] == doctest::Approx(1.0));
  CHECK(svd.singular_values[1] == doctest::Approx(1.0));

  Eigen::MatrixXd diag(2, 2);
  diag << 2, 0, 0, 0;
  auto svd1 = graph::truncated_svd(diag, 1);
  CHECK(svd1.singular_values[0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(graph::truncated_svd(identity, 0), ComputeError);
  CHECK_THROWS_AS(graph::truncated_svd(identity, 3), ComputeError);
}

TEST_CASE("svd mass equals squared Frobenius norm") {
  RngStream rng(11, 0);
  Eigen::MatrixXd random(20, 10);
  for (long i = 0; i < random.rows(); ++i)
    for (long j = 0; j < random.cols(); ++j) random(i, j) = rng.normal();
  auto svd = graph::truncated_svd(random, 10);
  CHECK(svd.singular_values.squaredNorm() ==
        doctest::Approx(random.squaredNorm()).epsilon(1e-8));
  // nonincreasing singular values
  for (int i = 1; i < svd.singular_values.size(); ++i)
    CHECK(svd.singular_values[i] <= svd.singular_values[i - 1] + 1e-12);
}

TEST_CASE("svd matches the best rank-l reconstruction") {
  RngStream rng(13, 0);
  Eigen::MatrixXd random(12, 8);
  for (long i = 0; i < random.rows(); ++i)
    for (long j = 0; j < random.cols(); ++j) random(i, j) = rng.normal();
  auto full = graph::truncated_svd(random, 8);
  for (int rank : {1, 3, 5}) {
    auto truncated = graph::truncated_svd(random, rank);
    Eigen::MatrixXd reconstruction = truncated.left *
                                     truncated.singular_values.asDiagonal() *
                                     truncated.right.transpose();
    double residual = (random - reconstruction).squaredNorm();
    double tail = full.singular_values.tail(8 - rank).squaredNorm();
    CHECK(residual == doctest::Approx(tail).epsilon(1e-8));
  }
}

TEST_CASE("bicluster_normalize fixtures") {
  {
    auto adj = graph::build_adjacency(
        {edge("u", "c"), edge("u", "c"), edge("u", "c"), edge("u", "c")});
    auto normalized = graph::bicluster_normalize(adj);
    CHECK(normalized(0, 0) == doctest::Approx(1.0));
  }
  {
    auto adj = graph::build_adjacency(
        {edge("u1", "c1"), edge("u1", "c2"), edge("u2", "c1"), edge("u2", "c2")});
    auto normalized = graph::bicluster_normalize(adj);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(normalized(i, j) == doctest::Approx(0.5));
  }
}

TEST_CASE("embedding rank covers the mass fraction") {
  Eigen::VectorXd sv(4);
  sv << 10.0, 1.0, 0.5, 0.1;  // first component holds ~99% of squared mass
  CHECK(graph::embedding_rank(sv) == 1);
  Eigen::VectorXd flat = Eigen::VectorXd::Ones(40);
  CHECK(graph::embedding_rank(flat) == 16);  // capped
}

TEST_CASE("adjacency csv dump") {
  auto adj = graph::build_adjacency({edge("u1", "c1"), edge("u1", "c1"), edge("u1", "c2")});
  std::ostringstream out;
  graph::write_adjacency_csv(out, adj);
  CHECK(out.str() == "user,target,count\nu1,c1,2\nu1,c2,1\n");
}
