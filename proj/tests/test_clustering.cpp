#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "authpeer/clustering.hpp"
#include "authpeer/errors.hpp"
#include "authpeer/graph.hpp"
#include "authpeer/rng.hpp"

using namespace authpeer;
using clustering::GroupAssignment;
using clustering::GroupingMethod;

namespace {

Eigen::MatrixXd planted_gaussians(int per_cluster, const std::vector<Eigen::Vector2d>& centers,
                                  double sigma, uint64_t seed, std::vector<int>* labels) {
  Eigen::MatrixXd points(per_cluster * centers.size(), 2);
  labels->clear();
  RngStream rng(seed, 0);
  long row = 0;
  for (size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < per_cluster; ++i, ++row) {
      points(row, 0) = centers[c][0] + sigma * rng.normal();
      points(row, 1) = centers[c][1] + sigma * rng.normal();
      labels->push_back(static_cast<int>(c));
    }
  }
  return points;
}

graph::AdjacencyMatrix block_adjacency() {
  // [[3,2,0,0],[2,3,0,0],[0,0,3,2],[0,0,2,3]]
  std::vector<ingest::RawEvent> events;
  auto add = [&](const char* u, const char* c, int n) {
    for (int i = 0; i < n; ++i) {
      ingest::RawEvent ev;
      ev.ts = 0;
      ev.user = u;
      ev.target = c;
      ev.method = ingest::Method::kKerberos;
      ev.outcome = ingest::Outcome::kSuccess;
      events.push_back(ev);
    }
  };
  add("u1", "c1", 3);
  add("u1", "c2", 2);
  add("u2", "c1", 2);
  add("u2", "c2", 3);
  add("u3", "c3", 3);
  add("u3", "c4", 2);
  add("u4", "c3", 2);
  add("u4", "c4", 3);
  return graph::build_adjacency(events);
}

}  // namespace

TEST_CASE("kmeans separable 1-d clusters") {
  Eigen::MatrixXd points(4, 1);
  points << 0.0, 0.1, 10.0, 10.1;
  auto result = clustering::kmeans(points, 2, 42);
  CHECK(result.labels[0] == result.labels[1]);
  CHECK(result.labels[2] == result.labels[3]);
  CHECK(result.labels[0] != result.labels[2]);
  std::vector<double> centroids = {result.centroids(0, 0), result.centroids(1, 0)};
  std::sort(centroids.begin(), centroids.end());
  CHECK(centroids[0] == doctest::Approx(0.05));
  CHECK(centroids[1] == doctest::Approx(10.05));
  CHECK(result.wcss == doctest::Approx(0.01));
}

TEST_CASE("kmeans with k equal to point count") {
  Eigen::MatrixXd points(5, 2);
  points << 0, 0, 1, 0, 2, 5, 3, 1, 4, 4;
  auto result = clustering::kmeans(points, 5, 1);
  CHECK(result.wcss == doctest::Approx(0.0));
  std::set<int> distinct(result.labels.begin(), result.labels.end());
  CHECK(distinct.size() == 5);
  CHECK_THROWS_AS(clustering::kmeans(points, 6, 1), InputError);
}

TEST_CASE("kmeans recovers planted gaussians") {
  std::vector<int> truth;
  auto points = planted_gaussians(
      20, {Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 0), Eigen::Vector2d(0, 3)}, 0.1, 99, &truth);
  auto result = clustering::kmeans(points, 3, 5);
  CHECK(clustering::adjusted_rand_index(result.labels, truth) >= 0.9);
}

TEST_CASE("kmeans multi-restart beats single restarts and is deterministic") {
  std::vector<int> truth;
  auto points = planted_gaussians(
      15, {Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 2), Eigen::Vector2d(4, 0)}, 0.4, 7, &truth);
  auto best = clustering::kmeans(points, 3, 11, 10);
  auto again = clustering::kmeans(points, 3, 11, 10);
  CHECK(best.labels == again.labels);
  CHECK(best.wcss == doctest::Approx(again.wcss));
  auto single = clustering::kmeans(points, 3, 11, 1);
  CHECK(best.wcss <= single.wcss + 1e-12);
}

TEST_CASE("select_k_elbow fixtures") {
  CHECK(clustering::select_k_elbow({{1, 100.0}, {2, 20.0}, {3, 18.0}, {4, 17.0}}) == 2);
  CHECK(clustering::select_k_elbow({{1, 50.0}, {2, 40.0}, {3, 12.0}, {4, 10.0}, {5, 9.0}}) == 3);
  // strictly linear curve: all second differences zero, smallest interior k
  CHECK(clustering::select_k_elbow({{1, 40.0}, {2, 30.0}, {3, 20.0}, {4, 10.0}}) == 2);
  CHECK_THROWS_AS(clustering::select_k_elbow({{1, 3.0}, {2, 2.0}, {3, 1.0}}), InputError);
  CHECK_THROWS_AS(clustering::select_k_elbow({{1, 3.0}, {3, 2.0}, {4, 1.0}, {5, 0.5}}),
                  InputError);
}

TEST_CASE("gmm selects two planted components by bic") {
  std::vector<int> truth;
  auto points =
      planted_gaussians(30, {Eigen::Vector2d(0, 0), Eigen::Vector2d(4, 4)}, 0.3, 17, &truth);
  auto result = clustering::gmm_em(points, 1, 5, 23);
  CHECK(result.k == 2);
  CHECK(clustering::adjusted_rand_index(result.labels, truth) >= 0.9);
  CHECK(result.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
  // per-iteration log-likelihood nondecreasing
  for (size_t i = 1; i < result.loglik_trace.size(); ++i)
    CHECK(result.loglik_trace[i] >= result.loglik_trace[i - 1] - 1e-9);
}

TEST_CASE("gmm with one component matches the sample mean") {
  std::vector<int> truth;
  auto points = planted_gaussians(40, {Eigen::Vector2d(1, 2)}, 0.7, 3, &truth);
  auto result = clustering::gmm_em_single(points, 1, 4);
  CHECK(result.means(0, 0) == doctest::Approx(points.col(0).mean()).epsilon(1e-9));
  CHECK(result.means(0, 1) == doctest::Approx(points.col(1).mean()).epsilon(1e-9));
  CHECK(result.weights[0] == doctest::Approx(1.0));
}

TEST_CASE("gmm on identical points picks k=1") {
  Eigen::MatrixXd points = Eigen::MatrixXd::Zero(12, 3);
  auto result = clustering::gmm_em(points, 1, 4, 9);
  CHECK(result.k == 1);
}

TEST_CASE("bicluster splits the block fixture") {
  auto adj = block_adjacency();
  auto labels = clustering::bicluster(adj, 2, 31);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[2] == labels[3]);
  CHECK(labels[0] != labels[2]);
  CHECK(clustering::adjusted_rand_index(labels, {0, 0, 1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("bicluster is invariant to user order") {
  std::vector<ingest::RawEvent> events;
  auto add = [&](const char* u, const char* c, int n) {
    for (int i = 0; i < n; ++i) {
      ingest::RawEvent ev;
      ev.user = u;
      ev.target = c;
      ev.method = ingest::Method::kKerberos;
      ev.outcome = ingest::Outcome::kSuccess;
      events.push_back(ev);
    }
  };
  add("u4", "c3", 2);
  add("u4", "c4", 3);
  add("u2", "c1", 2);
  add("u2", "c2", 3);
  add("u1", "c1", 3);
  add("u1", "c2", 2);
  add("u3", "c3", 3);
  add("u3", "c4", 2);
  auto adj = graph::build_adjacency(events);
  auto labels = clustering::bicluster(adj, 2, 31);
  std::map<std::string, int> by_user;
  for (size_t i = 0; i < adj.users.size(); ++i) by_user[adj.users[i]] = labels[i];
  CHECK(by_user["u1"] == by_user["u2"]);
  CHECK(by_user["u3"] == by_user["u4"]);
  CHECK(by_user["u1"] != by_user["u3"]);
}

TEST_CASE("bicluster single uniform block with k=1") {
  std::vector<ingest::RawEvent> events;
  for (const char* u : {"a", "b", "c"})
    for (const char* t : {"x", "y"}) {
      ingest::RawEvent ev;
      ev.user = u;
      ev.target = t;
      ev.method = ingest::Method::kKerberos;
      ev.outcome = ingest::Outcome::kSuccess;
      events.push_back(ev);
    }
  auto adj = graph::build_adjacency(events);
  auto labels = clustering::bicluster(adj, 1, 5);
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("ts_features on white noise") {
  RngStream rng(77, 0);
  int zero_zero = 0;
  const int trials = 60;
  Eigen::RowVectorXd mean_features = Eigen::RowVectorXd::Zero(5);
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> series(400);
    for (auto& v : series) v = rng.normal();
    auto result = clustering::ts_features({series});
    REQUIRE(result.kept.size() == 1);
    if (result.selected_p[0] == 0 && result.selected_d[0] == 0) ++zero_zero;
    mean_features += result.features.row(0);
  }
  mean_features /= trials;
  // AIC keeps the white-noise model most of the time and the residual
  // features concentrate on (0, 1, 0, 0, 0)
  CHECK(zero_zero > trials / 2);
  CHECK(std::fabs(mean_features[0]) < 0.2);
  CHECK(std::fabs(mean_features[1] - 1.0) < 0.2);
  CHECK(std::fabs(mean_features[2]) < 0.2);
  CHECK(std::fabs(mean_features[3]) < 0.2);
  CHECK(std::fabs(mean_features[4]) < 0.2);
}

TEST_CASE("ts_features constant series differencing") {
  std::vector<double> constant(50, 4.0);
  auto result = clustering::ts_features({constant});
  REQUIRE(result.kept.size() == 1);
  for (int j = 0; j < 5; ++j) CHECK(result.features(0, j) == doctest::Approx(0.0));
}

TEST_CASE("ts_features selects p >= 1 for AR(1)") {
  RngStream rng(5, 1);
  int selected_ar = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> series(300);
    double x = 0.0;
    for (auto& v : series) {
      x = 0.8 * x + rng.normal();
      v = x;
    }
    auto result = clustering::ts_features({series});
    REQUIRE(result.kept.size() == 1);
    if (result.selected_p[0] >= 1) ++selected_ar;
  }
  CHECK(selected_ar >= 90);
}

TEST_CASE("ts_features drops short series") {
  auto result = clustering::ts_features({{1, 2, 3}, std::vector<double>(60, 1.0)});
  REQUIRE(result.kept.size() == 1);
  CHECK(result.kept[0] == 1);
}

TEST_CASE("cluster_ts separates residual regimes") {
  RngStream rng(21, 0);
  std::vector<std::vector<double>> series;
  std::vector<int> truth;
  for (int u = 0; u < 30; ++u) {
    std::vector<double> s(200);
    for (auto& v : s) v = rng.normal();
    series.push_back(std::move(s));
    truth.push_back(0);
  }
  for (int u = 0; u < 30; ++u) {
    std::vector<double> s(200);
    for (auto& v : s) v = 6.0 * rng.normal();
    series.push_back(std::move(s));
    truth.push_back(1);
  }
  auto features = clustering::ts_features(series);
  REQUIRE(features.kept.size() == 60);
  std::vector<std::string> users;
  for (int u = 0; u < 60; ++u) users.push_back("user" + std::to_string(u));
  auto groups = clustering::cluster_ts(features.features, users, 1, 5, 13);
  CHECK(groups.k == 2);
  std::vector<int> labels;
  for (int u = 0; u < 60; ++u) labels.push_back(groups.mapping.at(users[u]));
  CHECK(clustering::adjusted_rand_index(labels, truth) >= 0.9);
}

TEST_CASE("cluster_ts handles a zero-variance column") {
  Eigen::MatrixXd features(6, 3);
  features << 1, 5, 0, 2, 5, 0, 1, 5, 0, 9, 5, 0, 8, 5, 0, 9, 5, 0;
  std::vector<std::string> users = {"a", "b", "c", "d", "e", "f"};
  auto groups = clustering::cluster_ts(features, users, 1, 3, 3);
  CHECK(groups.mapping.size() == 6);
  for (const auto& [user, gid] : groups.mapping) {
    CHECK(gid >= 0);
    CHECK(gid < groups.k);
  }
}

TEST_CASE("hr_grouping fixtures") {
  std::map<std::string, std::string> table = {
      {"alice", "Sales"}, {"bob", "Sales"}, {"carol", "Eng"}};
  auto groups = clustering::hr_grouping(table, {"alice", "bob", "carol"});
  CHECK(groups.k == 2);
  CHECK(groups.mapping["alice"] == groups.mapping["bob"]);
  CHECK(groups.mapping["alice"] != groups.mapping["carol"]);

  auto with_unknown = clustering::hr_grouping(table, {"alice", "bob", "carol", "dave"});
  CHECK(with_unknown.k == 3);
  CHECK(with_unknown.mapping["dave"] == 2);

  auto empty_table = clustering::hr_grouping({}, {"alice", "bob"});
  CHECK(empty_table.k == 1);
  CHECK(empty_table.mapping["alice"] == 0);
  CHECK(empty_table.mapping["bob"] == 0);
}

TEST_CASE("adjusted_rand_index fixtures") {
  CHECK(clustering::adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(clustering::adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(clustering::adjusted_rand_index({0, 0}, {0, 1}) == doctest::Approx(0.0));
  std::vector<int> a = {0, 0, 1, 2, 2, 1}, b = {1, 1, 0, 0, 2, 2};
  CHECK(clustering::adjusted_rand_index(a, b) ==
        doctest::Approx(clustering::adjusted_rand_index(b, a)));
  GroupAssignment ga, gb;
  ga.mapping = {{"u1", 0}, {"u2", 0}};
  gb.mapping = {{"u1", 0}, {"u3", 0}};
  CHECK_THROWS_AS(clustering::adjusted_rand_index(ga, gb), InputError);
}

TEST_CASE("group assignments have contiguous ids") {
  std::map<std::string, std::string> table = {{"a", "X"}, {"b", "Y"}, {"c", "Z"}};
  auto groups = clustering::hr_grouping(table, {"a", "b", "c"});
  std::set<int> ids;
  for (const auto& [user, gid] : groups.mapping) ids.insert(gid);
  CHECK(static_cast<int>(ids.size()) == groups.k);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == groups.k - 1);
}
