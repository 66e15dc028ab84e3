#include "authpeer/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "authpeer/errors.hpp"
#include "authpeer/log.hpp"
#include "authpeer/rng.hpp"

namespace authpeer::clustering {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVarFloor = 1e-6;

double sq_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

// k-means++ seeding.
Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int k, RngStream& rng) {
  const long n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<long>(rng.uniform_index(n)));
  Eigen::VectorXd d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    long pick;
    if (total <= 0.0) {
      pick = static_cast<long>(rng.uniform_index(n));
    } else {
      double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (long i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, int k, RngStream& rng, int max_iter) {
  const long n = points.rows();
  Eigen::MatrixXd centroids = seed_centroids(points, k, rng);
  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (long i = 0; i < n; ++i) {
      int best = 0;
      double best_d = kInf;
      for (int c = 0; c < k; ++c) {
        double d = sq_dist(points.row(i), centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<long> sizes(k, 0);
    for (long i = 0; i < n; ++i) {
      sums.row(labels[i]) += points.row(i);
      ++sizes[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Re-seed an empty cluster on the point farthest from its centroid.
        long worst = 0;
        double worst_d = -1.0;
        for (long i = 0; i < n; ++i) {
          double d = sq_dist(points.row(i), centroids.row(labels[i]));
          if (d > worst_d) {
            worst_d = d;
            worst = i;
          }
        }
        centroids.row(c) = points.row(worst);
        labels[worst] = c;
      } else {
        centroids.row(c) = sums.row(c) / static_cast<double>(sizes[c]);
      }
    }
  }
  KMeansResult result;
  result.labels = labels;
  result.centroids = centroids;
  for (long i = 0; i < n; ++i) result.wcss += sq_dist(points.row(i), centroids.row(labels[i]));
  return result;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

struct EmOutcome {
  GmmResult result;
  bool degenerate = false;
};

EmOutcome run_em(const Eigen::MatrixXd& points, int k, RngStream& rng) {
  const long n = points.rows();
  const long f = points.cols();
  EmOutcome out;
  GmmResult& gmm = out.result;
  gmm.k = k;
  gmm.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  gmm.means = seed_centroids(points, k, rng);
  Eigen::RowVectorXd col_mean = points.colwise().mean();
  Eigen::RowVectorXd col_var =
      ((points.rowwise() - col_mean).array().square().colwise().sum() / std::max<long>(n - 1, 1))
          .matrix();
  gmm.variances = col_var.cwiseMax(kVarFloor).replicate(k, 1);

  Eigen::MatrixXd resp(n, k);
  double prev_ll = -kInf;
  for (int iter = 0; iter < 500; ++iter) {
    // E-step
    Eigen::MatrixXd log_prob(n, k);
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd var = gmm.variances.row(c);
      double log_norm = -0.5 * (var.array().log().sum() + f * std::log(2.0 * M_PI));
      log_prob.col(c) =
          (((points.rowwise() - gmm.means.row(c)).array().square().rowwise() / var.array())
               .rowwise()
               .sum() *
           -0.5) +
          log_norm + std::log(gmm.weights[c]);
    }
    double ll = 0.0;
    for (long i = 0; i < n; ++i) {
      double lse = log_sum_exp(log_prob.row(i));
      ll += lse;
      resp.row(i) = (log_prob.row(i).array() - lse).exp();
    }
    if (!std::isfinite(ll) || ll + 1e-6 < prev_ll) {
      out.degenerate = true;
      return out;
    }
    gmm.loglik_trace.push_back(ll);
    gmm.log_lik = ll;
    if (iter > 0 && std::fabs(ll - prev_ll) < 1e-8 * (1.0 + std::fabs(ll))) break;
    prev_ll = ll;
    // M-step
    Eigen::VectorXd nk = resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      if (nk[c] < 1e-8) {
        out.degenerate = true;
        return out;
      }
      gmm.weights[c] = nk[c] / static_cast<double>(n);
      gmm.means.row(c) = (resp.col(c).transpose() * points) / nk[c];
      Eigen::MatrixXd centered = points.rowwise() - gmm.means.row(c);
      gmm.variances.row(c) =
          ((centered.array().square().colwise() * resp.col(c).array()).colwise().sum() / nk[c])
              .cwiseMax(kVarFloor);
    }
  }
  gmm.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    resp.row(i).maxCoeff(&arg);
    gmm.labels[i] = static_cast<int>(arg);
  }
  int params = (k - 1) + 2 * k * static_cast<int>(f);
  gmm.bic = -2.0 * gmm.log_lik + params * std::log(static_cast<double>(n));
  return out;
}

std::vector<int> relabel_contiguous(std::vector<int> labels, int* k_out) {
  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [old_id, new_id] : remap) new_id = next++;
  for (int& l : labels) l = remap[l];
  *k_out = next;
  return labels;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

const char* grouping_name(GroupingMethod m) {
  switch (m) {
    case GroupingMethod::kHr: return "hr";
    case GroupingMethod::kTs: return "ts";
    case GroupingMethod::kKmeans: return "kmeans";
    case GroupingMethod::kGmm: return "gmm";
    case GroupingMethod::kBicluster: return "bicluster";
    case GroupingMethod::kTrue: return "true";
  }
  return "?";
}

std::optional<GroupingMethod> grouping_from_name(const std::string& name) {
  if (name == "hr") return GroupingMethod::kHr;
  if (name == "ts") return GroupingMethod::kTs;
  if (name == "kmeans") return GroupingMethod::kKmeans;
  if (name == "gmm") return GroupingMethod::kGmm;
  if (name == "bicluster") return GroupingMethod::kBicluster;
  if (name == "true") return GroupingMethod::kTrue;
  return std::nullopt;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed, int restarts,
                    int max_iter) {
  if (k < 1 || k > points.rows())
    throw InputError("kmeans: k=" + std::to_string(k) + " out of range for " +
                     std::to_string(points.rows()) + " points");
  KMeansResult best;
  best.wcss = kInf;
  for (int r = 0; r < restarts; ++r) {
    RngStream rng(seed, static_cast<uint64_t>(r));
    KMeansResult candidate = lloyd(points, k, rng, max_iter);
    if (candidate.wcss < best.wcss) best = std::move(candidate);
  }
  return best;
}

int select_k_elbow(const std::map<int, double>& wcss_curve) {
  if (wcss_curve.size() < 4) throw InputError("select_k_elbow: need at least 4 curve points");
  int prev_k = wcss_curve.begin()->first - 1;
  for (const auto& [k, wcss] : wcss_curve) {
    if (k != prev_k + 1) throw InputError("select_k_elbow: curve keys must be contiguous");
    prev_k = k;
    (void)wcss;
  }
  int best_k = 0;
  double best_curvature = -kInf;
  for (auto it = std::next(wcss_curve.begin()); std::next(it) != wcss_curve.end(); ++it) {
    double curvature = std::prev(it)->second - 2.0 * it->second + std::next(it)->second;
    if (curvature > best_curvature) {
      best_curvature = curvature;
      best_k = it->first;
    }
  }
  return best_k;
}

GmmResult gmm_em_single(const Eigen::MatrixXd& points, int k, uint64_t seed) {
  if (points.rows() <= k)
    throw InputError("gmm_em: need more points than components (k=" + std::to_string(k) + ")");
  for (int attempt = 0; attempt < 5; ++attempt) {
    RngStream rng(seed, 977u + static_cast<uint64_t>(attempt));
    EmOutcome out = run_em(points, k, rng);
    if (!out.degenerate) return out.result;
    logging::debug("gmm_em: degenerate fit for k=" + std::to_string(k) + ", restarting");
  }
  throw ComputeError("gmm_em: singular components after 5 restarts (k=" + std::to_string(k) + ")");
}

GmmResult gmm_em(const Eigen::MatrixXd& points, int k_min, int k_max, uint64_t seed) {
  if (k_min < 1 || k_max < k_min) throw InputError("gmm_em: bad k range");
  if (points.rows() <= k_max) throw InputError("gmm_em: need more points than max(k_range)");
  GmmResult best;
  std::map<int, double> bic_curve;
  bool have_best = false;
  for (int k = k_min; k <= k_max; ++k) {
    GmmResult fit = gmm_em_single(points, k, seed);
    bic_curve[k] = fit.bic;
    if (!have_best || fit.bic < best.bic) {
      best = std::move(fit);
      have_best = true;
    }
  }
  best.bic_curve = std::move(bic_curve);
  return best;
}

std::vector<int> bicluster(const graph::AdjacencyMatrix& adj, int k, uint64_t seed) {
  const int n_users = static_cast<int>(adj.users.size());
  if (k < 1 || k > n_users) throw InputError("bicluster: k out of range");
  Eigen::MatrixXd normalized = bicluster_normalize(adj);
  const int max_rank = static_cast<int>(std::min(normalized.rows(), normalized.cols()));
  // ceil(log2 k) + 1 singular vectors past the leading one
  int want = static_cast<int>(std::ceil(std::log2(static_cast<double>(k)))) + 1;
  int rank = std::min(want + 1, max_rank);
  if (rank < 2) return std::vector<int>(n_users, 0);
  graph::SvdResult svd = graph::truncated_svd(normalized, rank);
  // principal coordinates: scale each direction by its singular value so
  // near-null directions cannot dominate the distances
  Eigen::MatrixXd coords = svd.left.rightCols(rank - 1) *
                           svd.singular_values.tail(rank - 1).asDiagonal();
  for (int u = 0; u < n_users; ++u)
    coords.row(u) /= std::sqrt(static_cast<double>(adj.row_sums[u]));
  return kmeans(coords, k, seed).labels;
}

TsFeatureResult ts_features(const std::vector<std::vector<double>>& series) {
  TsFeatureResult out;
  std::vector<std::array<double, 5>> feature_rows;
  for (size_t idx = 0; idx < series.size(); ++idx) {
    const auto& raw = series[idx];
    if (raw.size() < 10) {
      logging::warn("ts_features: series " + std::to_string(idx) + " shorter than 10, dropped");
      continue;
    }
    double best_aic = kInf;
    std::vector<double> best_resid;
    int best_p = 0, best_d = 0;
    bool have_fit = false;
    for (int d = 0; d <= 1; ++d) {
      std::vector<double> z = raw;
      if (d == 1) {
        std::vector<double> diff(raw.size() - 1);
        for (size_t t = 1; t < raw.size(); ++t) diff[t - 1] = raw[t] - raw[t - 1];
        z = std::move(diff);
      }
      for (int p = 0; p <= 3; ++p) {
        const long n_eff = static_cast<long>(z.size()) - p;
        if (n_eff < p + 3) continue;
        Eigen::MatrixXd design(n_eff, p + 1);
        Eigen::VectorXd target(n_eff);
        for (long t = 0; t < n_eff; ++t) {
          design(t, 0) = 1.0;
          for (int j = 1; j <= p; ++j) design(t, j) = z[t + p - j];
          target[t] = z[t + p];
        }
        Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
        Eigen::VectorXd resid = target - design * coef;
        double rss = resid.squaredNorm();
        double sigma2 = rss / static_cast<double>(n_eff);
        double aic = sigma2 > 0.0
                         ? static_cast<double>(n_eff) * std::log(sigma2) + 2.0 * (p + 1)
                         : -kInf;
        if (aic < best_aic) {
          best_aic = aic;
          best_resid.assign(resid.data(), resid.data() + resid.size());
          best_p = p;
          best_d = d;
          have_fit = true;
        }
      }
    }
    if (!have_fit) {
      logging::warn("ts_features: series " + std::to_string(idx) + " unusable, dropped");
      continue;
    }
    const auto& r = best_resid;
    double n = static_cast<double>(r.size());
    double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : r) {
      double c = v - mean;
      m2 += c * c;
      m3 += c * c * c;
      m4 += c * c * c * c;
    }
    double sd = n > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // Zero-variance convention: higher moments and autocorrelation are 0.
    double skew = m2 > 1e-12 ? m3 / std::pow(m2, 1.5) : 0.0;
    double exkurt = m2 > 1e-12 ? m4 / (m2 * m2) - 3.0 : 0.0;
    double lag1 = 0.0;
    if (m2 > 1e-12) {
      double num = 0.0;
      for (size_t t = 1; t < r.size(); ++t) num += (r[t] - mean) * (r[t - 1] - mean);
      lag1 = num / (m2 * n);
    }
    feature_rows.push_back({mean, sd, skew, exkurt, lag1});
    out.kept.push_back(idx);
    out.selected_p.push_back(best_p);
    out.selected_d.push_back(best_d);
  }
  out.features.resize(static_cast<long>(feature_rows.size()), 5);
  for (size_t i = 0; i < feature_rows.size(); ++i)
    for (int j = 0; j < 5; ++j) out.features(static_cast<long>(i), j) = feature_rows[i][j];
  return out;
}

GroupAssignment cluster_ts(const Eigen::MatrixXd& features, const std::vector<std::string>& users,
                           int k_min, int k_max, uint64_t seed) {
  if (features.rows() != static_cast<long>(users.size()))
    throw InputError("cluster_ts: feature rows do not match user list");
  Eigen::MatrixXd standardized = features;
  for (long j = 0; j < standardized.cols(); ++j) {
    double mean = standardized.col(j).mean();
    double var = (standardized.col(j).array() - mean).square().sum() /
                 std::max<long>(standardized.rows() - 1, 1);
    if (var > 1e-12) {
      standardized.col(j) = (standardized.col(j).array() - mean) / std::sqrt(var);
    } else {
      standardized.col(j).setZero();
    }
  }
  int k_cap = std::min<int>(k_max, static_cast<int>(standardized.rows()) - 1);
  GmmResult gmm = gmm_em(standardized, std::min(k_min, k_cap), k_cap, seed);
  GroupAssignment assignment;
  assignment.method = GroupingMethod::kTs;
  std::vector<int> labels = relabel_contiguous(gmm.labels, &assignment.k);
  for (size_t i = 0; i < users.size(); ++i) assignment.mapping[users[i]] = labels[i];
  return assignment;
}

GroupAssignment hr_grouping(const std::map<std::string, std::string>& hr_table,
                            const std::set<std::string>& users) {
  GroupAssignment assignment;
  assignment.method = GroupingMethod::kHr;
  std::map<std::string, int> division_ids;
  for (const auto& user : users) {
    auto it = hr_table.find(user);
    if (it != hr_table.end()) division_ids.emplace(it->second, 0);
  }
  int next = 0;
  for (auto& [division, id] : division_ids) id = next++;
  bool any_unknown = false;
  for (const auto& user : users) {
    auto it = hr_table.find(user);
    if (it != hr_table.end()) {
      assignment.mapping[user] = division_ids[it->second];
    } else {
      any_unknown = true;
    }
  }
  int unknown_id = next;
  if (any_unknown) {
    for (const auto& user : users)
      if (assignment.mapping.find(user) == assignment.mapping.end())
        assignment.mapping[user] = unknown_id;
    ++next;
  }
  assignment.k = std::max(next, 1);
  if (next == 0)  // no users at all
    assignment.k = 1;
  return assignment;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InputError("adjusted_rand_index: size mismatch");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> count_a, count_b;
  for (size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++count_a[a[i]];
    ++count_b[b[i]];
  }
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, c] : joint) sum_joint += comb2(c);
  for (const auto& [key, c] : count_a) sum_a += comb2(c);
  for (const auto& [key, c] : count_b) sum_b += comb2(c);
  double total_pairs = comb2(n);
  if (total_pairs <= 0.0) return 1.0;
  double expected = sum_a * sum_b / total_pairs;
  double maximum = 0.5 * (sum_a + sum_b);
  if (std::fabs(maximum - expected) < 1e-12) return 1.0;
  return (sum_joint - expected) / (maximum - expected);
}

double adjusted_rand_index(const GroupAssignment& a, const GroupAssignment& b) {
  if (a.mapping.size() != b.mapping.size())
    throw InputError("adjusted_rand_index: user sets differ");
  std::vector<int> la, lb;
  la.reserve(a.mapping.size());
  lb.reserve(b.mapping.size());
  for (const auto& [user, label] : a.mapping) {
    auto it = b.mapping.find(user);
    if (it == b.mapping.end()) throw InputError("adjusted_rand_index: user sets differ");
    la.push_back(label);
    lb.push_back(it->second);
  }
  return adjusted_rand_index(la, lb);
}

}  // namespace authpeer::clustering
