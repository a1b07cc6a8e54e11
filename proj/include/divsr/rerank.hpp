#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "divsr/data.hpp"
#include "divsr/error.hpp"
#include "divsr/model.hpp"

namespace divsr {

struct CandidateSet {
  std::vector<ItemId> items;
  std::vector<double> relevance;
  Matrix item_vectors;  // one row per candidate

  std::size_t size() const { return items.size(); }
};

inline constexpr double kKernelJitter = 1e-10;
// Greedy MAP stops once no candidate's conditional variance exceeds this.
inline constexpr double kGreedyStop = 1e-8;

namespace detail {

inline void check_candidates(const CandidateSet& c, std::size_t k) {
  if (c.relevance.size() != c.items.size() ||
      static_cast<std::size_t>(c.item_vectors.rows()) != c.items.size()) {
    throw DataError("candidate set fields have inconsistent sizes");
  }
  if (k > c.size()) {
    throw DataError("cannot select " + std::to_string(k) + " items from " +
                    std::to_string(c.size()) + " candidates");
  }
  for (double r : c.relevance)
    if (!std::isfinite(r)) throw DataError("candidate relevance must be finite");
}

// (cos + 1) / 2 between candidate vectors; zero vectors count as orthogonal.
inline Matrix item_similarity(const Matrix& v) {
  Matrix unit = v;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    const double n = unit.row(r).norm();
    if (n > 0.0) unit.row(r) /= n;
  }
  Matrix s = unit * unit.transpose();
  s = (s.array() + 1.0) / 2.0;
  for (Eigen::Index r = 0; r < s.rows(); ++r) s(r, r) = 1.0;
  return s.cwiseMax(0.0).cwiseMin(1.0);
}

// Candidate positions by descending relevance, ties by ascending item id.
inline std::vector<std::size_t> relevance_order(const CandidateSet& c) {
  std::vector<std::size_t> order(c.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (c.relevance[a] != c.relevance[b]) return c.relevance[a] > c.relevance[b];
    return c.items[a] < c.items[b];
  });
  return order;
}

inline bool better(double score, ItemId item, double best_score, ItemId best_item) {
  return score > best_score || (score == best_score && item < best_item);
}

}  // namespace detail

// Top `pool` items for `user` by model score, excluding `exclude`. Relevance
// is the score min-max scaled to [0,1] within the pool.
inline CandidateSet build_candidates(const ForwardOutput& fo, UserId user,
                                     std::span<const ItemId> exclude, std::size_t pool) {
  const auto scores = score_all_items(fo, user, exclude);
  CandidateSet c;
  c.items = topk(scores, pool);
  c.relevance.reserve(c.items.size());
  for (auto i : c.items) c.relevance.push_back(scores[i]);
  if (!c.relevance.empty()) {
    const auto [lo, hi] = std::minmax_element(c.relevance.begin(), c.relevance.end());
    const double low = *lo, span = *hi - *lo;
    for (auto& r : c.relevance) r = span > 0.0 ? (r - low) / span : 1.0;
  }
  c.item_vectors.resize(static_cast<Eigen::Index>(c.items.size()), fo.items.cols());
  for (std::size_t p = 0; p < c.items.size(); ++p)
    c.item_vectors.row(static_cast<Eigen::Index>(p)) = fo.items.row(c.items[p]);
  return c;
}

inline std::vector<ItemId> mmr_rerank(const CandidateSet& c, std::size_t k, double trade_off) {
  detail::check_candidates(c, k);
  if (!(trade_off >= 0.0 && trade_off <= 1.0)) throw ConfigError("trade_off must lie in [0,1]");
  std::vector<ItemId> out;
  if (k == 0) return out;
  const auto sim = detail::item_similarity(c.item_vectors);
  std::vector<char> taken(c.size(), 0);
  std::vector<double> max_sim(c.size(), 0.0);

  std::size_t first = detail::relevance_order(c).front();
  taken[first] = 1;
  out.push_back(c.items[first]);
  std::size_t last = first;
  while (out.size() < k) {
    std::size_t best = c.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < c.size(); ++p) {
      if (taken[p]) continue;
      max_sim[p] = std::max(max_sim[p], sim(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(last)));
      const double s = trade_off * c.relevance[p] - (1.0 - trade_off) * max_sim[p];
      if (best == c.size() || detail::better(s, c.items[p], best_score, c.items[best])) {
        best = p;
        best_score = s;
      }
    }
    taken[best] = 1;
    out.push_back(c.items[best]);
    last = best;
  }
  return out;
}

// L = Diag(g) S Diag(g) with g_i = exp(theta * rel_i / (1 - theta + jitter)).
inline Matrix build_dpp_kernel(const CandidateSet& c, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0,1]");
  const auto s = detail::item_similarity(c.item_vectors);
  Vector g(static_cast<Eigen::Index>(c.size()));
  for (std::size_t p = 0; p < c.size(); ++p)
    g(static_cast<Eigen::Index>(p)) = std::exp(theta * c.relevance[p] / (1.0 - theta + kKernelJitter));
  Matrix l = g.asDiagonal() * s * g.asDiagonal();
  l.diagonal().array() += kKernelJitter;
  return l;
}

namespace detail {

// Greedy MAP over L = Diag(q) S Diag(q) with log q supplied directly, using the
// incremental Cholesky update. Stops when the best remaining conditional
// variance of L drops below kGreedyStop.
inline std::vector<std::size_t> greedy_map_factored(const Matrix& s,
                                                    const std::vector<double>& log_quality,
                                                    std::size_t k,
                                                    std::span<const ItemId> tie_ids = {}) {
  const auto n = static_cast<std::size_t>(s.rows());
  std::vector<std::size_t> picked;
  if (k == 0 || n == 0) return picked;
  Matrix chol = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  std::vector<char> taken(n, 0);
  const double log_stop = std::log(kGreedyStop);
  auto id_of = [&](std::size_t i) { return tie_ids.empty() ? static_cast<ItemId>(i) : tie_ids[i]; };

  while (picked.size() < k) {
    std::size_t best = n;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i] || !(d2[i] > 0.0)) continue;
      const double gain = 2.0 * log_quality[i] + std::log(d2[i]);
      if (best == n || better(gain, id_of(i), best_gain, id_of(best))) {
        best = i;
        best_gain = gain;
      }
    }
    if (best == n || best_gain < log_stop) break;
    const auto row = static_cast<Eigen::Index>(picked.size());
    const double dj = std::sqrt(d2[best]);
    taken[best] = 1;
    picked.push_back(best);
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const auto ii = static_cast<Eigen::Index>(i), bj = static_cast<Eigen::Index>(best);
      double dot = 0.0;
      for (Eigen::Index r = 0; r < row; ++r) dot += chol(r, bj) * chol(r, ii);
      const double e = (s(bj, ii) - dot) / dj;
      chol(row, ii) = e;
      d2[i] -= e * e;
    }
  }
  return picked;
}

}  // namespace detail

// Greedy MAP on an explicit kernel with positive diagonal. Returns indices in
// selection order; may return fewer than k when no positive gain remains.
inline std::vector<std::size_t> greedy_map(const Matrix& kernel, std::size_t k) {
  if (kernel.rows() != kernel.cols()) throw DataError("kernel must be square");
  if (k > static_cast<std::size_t>(kernel.rows())) throw DataError("k exceeds kernel size");
  const auto n = kernel.rows();
  std::vector<double> logq(static_cast<std::size_t>(n));
  Vector inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(kernel(i, i) > 0.0)) throw DataError("kernel diagonal must be positive");
    logq[static_cast<std::size_t>(i)] = 0.5 * std::log(kernel(i, i));
    inv(i) = 1.0 / std::sqrt(kernel(i, i));
  }
  const Matrix s = inv.asDiagonal() * kernel * inv.asDiagonal();
  return detail::greedy_map_factored(s, logq, k);
}

inline double log_det_subset(const Matrix& kernel, std::span<const std::size_t> subset) {
  const auto m = static_cast<Eigen::Index>(subset.size());
  Matrix sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = kernel(subset[a], subset[b]);
  Eigen::LLT<Matrix> llt(sub);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Slots left after the greedy gain vanishes are filled by relevance order.
inline std::vector<ItemId> dpp_rerank(const CandidateSet& c, std::size_t k, double theta) {
  detail::check_candidates(c, k);
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0,1]");
  Matrix s = detail::item_similarity(c.item_vectors);
  s.diagonal().array() += kKernelJitter;
  std::vector<double> logq(c.size());
  for (std::size_t p = 0; p < c.size(); ++p) logq[p] = theta * c.relevance[p] / (1.0 - theta + kKernelJitter);
  const auto picked = detail::greedy_map_factored(s, logq, k, c.items);

  std::vector<ItemId> out;
  std::vector<char> taken(c.size(), 0);
  for (auto p : picked) {
    taken[p] = 1;
    out.push_back(c.items[p]);
  }
  for (auto p : detail::relevance_order(c)) {
    if (out.size() >= k) break;
    if (!taken[p]) out.push_back(c.items[p]);
  }
  return out;
}

}  // namespace divsr
