#include "hmgp/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hmgp {

namespace {

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const {
    return d2 != o.d2 ? d2 < o.d2 : index < o.index;
  }
};

double point_box_dist2(const Location& q, const Box& b) {
  const double dx = std::max({0.0, b.lo[0] - q.x, q.x - b.hi[0]});
  const double dy = std::max({0.0, b.lo[1] - q.y, q.y - b.hi[1]});
  return dx * dx + dy * dy;
}

// DFS with a bounded worst-candidate heap; descends the nearer child first.
void search(const Cluster& c, const Location& q, std::span<const Location> pts,
            const std::vector<int>& perm, int k, std::vector<Candidate>& heap) {
  if (c.is_leaf()) {
    for (int t = c.begin; t < c.end; ++t) {
      const int i = perm[t];
      const double dx = pts[i].x - q.x;
      const double dy = pts[i].y - q.y;
      const Candidate cand{dx * dx + dy * dy, i};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double dl = point_box_dist2(q, c.left->box);
  const double dr = point_box_dist2(q, c.right->box);
  const Cluster* first = dl <= dr ? c.left.get() : c.right.get();
  const Cluster* second = dl <= dr ? c.right.get() : c.left.get();
  const double dfirst = std::min(dl, dr);
  const double dsecond = std::max(dl, dr);
  if (static_cast<int>(heap.size()) < k || dfirst <= heap.front().d2)
    search(*first, q, pts, perm, k, heap);
  if (static_cast<int>(heap.size()) < k || dsecond <= heap.front().d2)
    search(*second, q, pts, perm, k, heap);
}

}  // namespace

KdTree::KdTree(std::span<const Location> points, int leaf_size)
    : pts_(points), tree_(std::make_unique<ClusterTree>(points, leaf_size)) {}

std::vector<int> KdTree::query(const Location& q, int k) const {
  if (k < 1) throw std::invalid_argument("KdTree::query: k must be >= 1");
  if (k > size()) throw std::invalid_argument("KdTree::query: k exceeds the index size");
  std::vector<Candidate> heap;
  heap.reserve(k);
  search(tree_->root(), q, pts_, tree_->perm(), k, heap);
  std::sort(heap.begin(), heap.end());
  std::vector<int> out(heap.size());
  for (size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].index;
  return out;
}

Eigen::VectorXd knn_predict(std::span<const Location> train, const Eigen::VectorXd& values,
                            std::span<const Location> queries, int k) {
  if (train.empty()) throw std::invalid_argument("knn_predict: empty training set");
  if (values.size() != static_cast<Eigen::Index>(train.size()))
    throw std::invalid_argument("knn_predict: |values| != n");
  if (k < 1 || k > static_cast<int>(train.size()))
    throw std::invalid_argument("knn_predict: need 1 <= k <= n_train");

  const KdTree index(train);
  Eigen::VectorXd out(queries.size());
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    const std::vector<int> nn = index.query(queries[qi], k);
    double s = 0.0;
    for (int i : nn) s += values(i);
    out(qi) = s / k;
  }
  return out;
}

SelectKResult select_k(std::span<const Location> train, const Eigen::VectorXd& values,
                       std::span<const int> candidate_ks, int splits, std::uint64_t seed) {
  const int n = static_cast<int>(train.size());
  if (n < 2) throw std::invalid_argument("select_k: need at least 2 training points");
  if (values.size() != n) throw std::invalid_argument("select_k: |values| != n");
  if (splits < 1) throw std::invalid_argument("select_k: splits must be >= 1");
  if (candidate_ks.empty()) throw std::invalid_argument("select_k: no candidate k");

  SelectKResult res;
  res.candidates.assign(candidate_ks.begin(), candidate_ks.end());
  std::sort(res.candidates.begin(), res.candidates.end());
  res.candidates.erase(std::unique(res.candidates.begin(), res.candidates.end()),
                       res.candidates.end());

  const int n_val = std::max(1, n / 10);  // validation : train = 1 : 9
  const int n_fit = n - n_val;
  const int k_max = res.candidates.back();
  if (res.candidates.front() < 1 || k_max > n_fit)
    throw std::invalid_argument("select_k: candidate k out of range for the split size");

  res.cv_rmse.assign(res.candidates.size(), 0.0);
  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Location> fit_pts(n_fit);
  Eigen::VectorXd fit_vals(n_fit);

  for (int rep = 0; rep < splits; ++rep) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int i = 0; i < n_fit; ++i) {
      fit_pts[i] = train[order[n_val + i]];
      fit_vals(i) = values(order[n_val + i]);
    }
    const KdTree index(fit_pts);
    std::vector<double> sq_err(res.candidates.size(), 0.0);
    for (int v = 0; v < n_val; ++v) {
      const Location& q = train[order[v]];
      const double truth = values(order[v]);
      const std::vector<int> nn = index.query(q, k_max);
      // prefix means give every candidate k from one k_max query
      double run = 0.0;
      size_t ci = 0;
      for (int r = 0; r < k_max && ci < res.candidates.size(); ++r) {
        run += fit_vals(nn[r]);
        if (r + 1 == res.candidates[ci]) {
          const double err = run / (r + 1) - truth;
          sq_err[ci] += err * err;
          ++ci;
        }
      }
    }
    for (size_t ci = 0; ci < res.candidates.size(); ++ci)
      res.cv_rmse[ci] += std::sqrt(sq_err[ci] / n_val);
  }
  for (double& v : res.cv_rmse) v /= splits;

  size_t best = 0;
  for (size_t ci = 1; ci < res.cv_rmse.size(); ++ci)
    if (res.cv_rmse[ci] < res.cv_rmse[best]) best = ci;
  res.k = res.candidates[best];
  return res;
}

}  // namespace hmgp
