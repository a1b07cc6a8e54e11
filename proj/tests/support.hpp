#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "divsr/divsr.hpp"

namespace divsr::fixtures {

struct Instance {
  EmbeddingModel model;
  InteractionGraph train;
  SocialGraph social;
  TripletBatch batch;
};

// Every user has at least one item and at least one non-item; every user
// trusts at least one other user. d >= 2 since cosines are constant in one dimension.
inline Instance random_instance(std::mt19937_64& rng, Backbone backbone, bool social_enabled,
                                std::size_t max_users = 6, std::size_t max_items = 6,
                                std::size_t max_dim = 4) {
  std::uniform_int_distribution<std::size_t> pick_m(2, max_users), pick_n(2, max_items),
      pick_d(2, max_dim);
  const auto m = pick_m(rng), n = pick_n(rng), d = pick_d(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> r;
  for (UserId a = 0; a < m; ++a) {
    std::vector<ItemId> items(n);
    for (ItemId i = 0; i < n; ++i) items[i] = i;
    std::shuffle(items.begin(), items.end(), rng);
    std::uniform_int_distribution<std::size_t> pick_deg(1, n - 1);
    const auto deg = pick_deg(rng);
    for (std::size_t k = 0; k < deg; ++k) r.push_back({a, items[k]});
  }
  std::vector<Edge> s;
  for (UserId a = 0; a < m; ++a) {
    std::uniform_int_distribution<UserId> pick_u(0, static_cast<UserId>(m - 1));
    UserId b;
    do b = pick_u(rng);
    while (b == a);
    s.push_back({a, b});
    for (UserId c = 0; c < m; ++c)
      if (c != a && unit(rng) < 0.3) s.push_back({a, c});
  }
  Instance inst;
  inst.train = InteractionGraph::from_edges(m, n, std::move(r));
  inst.social = SocialGraph::from_edges(m, std::move(s));
  ModelShape shape{backbone, social_enabled, d, 2};
  inst.model = init_model(shape, m, n, rng());
  // Larger entries than the default init keep cosines away from degeneracy.
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto* t : {&inst.model.user_table, &inst.model.item_table, &inst.model.trustee_table})
    for (Eigen::Index k = 0; k < t->size(); ++k) t->data()[k] = gauss(rng);
  Rng sampler(rng());
  inst.batch = sample_triplets(inst.train, 8, sampler);
  return inst;
}

using ModelLoss = std::function<double(const EmbeddingModel&)>;

// ||analytic - numeric|| / max(||analytic|| + ||numeric||, 1e-12) using
// central differences on every parameter.
inline double gradient_relative_error(const EmbeddingModel& model, const ModelGrad& analytic,
                                      const ModelLoss& loss, double h = 1e-4) {
  EmbeddingModel probe = model;
  double diff2 = 0.0, norm_a = 0.0, norm_n = 0.0;
  auto scan = [&](Matrix EmbeddingModel::*table, const Matrix& grad) {
    Matrix& t = probe.*table;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double saved = t.data()[k];
      t.data()[k] = saved + h;
      const double up = loss(probe);
      t.data()[k] = saved - h;
      const double down = loss(probe);
      t.data()[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grad.data()[k];
      diff2 += (a - numeric) * (a - numeric);
      norm_a += a * a;
      norm_n += numeric * numeric;
    }
  };
  scan(&EmbeddingModel::user_table, analytic.user_table);
  scan(&EmbeddingModel::item_table, analytic.item_table);
  scan(&EmbeddingModel::trustee_table, analytic.trustee_table);
  const double denom = std::max(std::sqrt(norm_a) + std::sqrt(norm_n), 1e-12);
  return std::sqrt(diff2) / denom;
}

struct GradientCase {
  const char* name;
  Backbone backbone;
  bool social_enabled;
  // Returns (loss, analytic gradient) for the instance.
  std::function<std::pair<double, ModelGrad>(const Instance&, const EmbeddingModel&)> eval;
};

inline std::vector<UserId> all_users(const Instance& inst) {
  std::vector<UserId> u(inst.model.num_users());
  for (UserId a = 0; a < u.size(); ++a) u[a] = a;
  return u;
}

// Loss/gradient pairs built from the public forward/backward pieces.
inline std::vector<GradientCase> gradient_cases() {
  std::vector<GradientCase> cases;
  for (auto backbone : {Backbone::MF, Backbone::DiffNet}) {
    const bool social = backbone == Backbone::DiffNet;
    cases.push_back({"bpr", backbone, social, [](const Instance& inst, const EmbeddingModel& m) {
                       const auto* s = m.social_enabled ? &inst.social : nullptr;
                       const auto fo = forward(m, inst.train, s);
                       auto g = zeros_like(fo);
                       const double l = bpr_data_loss_grad(fo, inst.batch, 1.0, g);
                       return std::make_pair(l, backward(m, inst.train, s, g));
                     }});
  }
  cases.push_back({"socialmf", Backbone::SocialMF, true,
                   [](const Instance& inst, const EmbeddingModel& m) {
                     const auto fo = forward(m, inst.train, &inst.social);
                     auto g = zeros_like(fo);
                     const double l = socialmf_regularizer_grad(fo, inst.social, 1.0, g);
                     return std::make_pair(l, backward(m, inst.train, &inst.social, g));
                   }});
  cases.push_back({"trustmf", Backbone::TrustMF, true,
                   [](const Instance& inst, const EmbeddingModel& m) {
                     std::vector<TrustPair> pairs;
                     for (const auto& e : inst.social.edges()) pairs.push_back({e.source, e.target, 1.0});
                     for (UserId a = 0; a < m.num_users(); ++a)
                       for (UserId b = 0; b < m.num_users(); ++b)
                         if (a != b && !inst.social.contains(a, b)) pairs.push_back({a, b, 0.0});
                     auto g = ModelGrad::zeros_like(m);
                     const double l = trustmf_loss_grad(m, pairs, 1.0, g);
                     return std::make_pair(l, g);
                   }});
  for (auto backbone : {Backbone::SocialMF, Backbone::DiffNet}) {
    cases.push_back({"distill", backbone, true, [](const Instance& inst, const EmbeddingModel& m) {
                       auto teacher = inst.model;  // fixed target, independent of the probe
                       teacher.social_enabled = false;
                       for (Eigen::Index a = 0; a < teacher.user_table.rows(); ++a)
                         for (Eigen::Index k = 0; k < teacher.user_table.cols(); ++k)
                           teacher.user_table(a, k) = std::sin(3.7 * a + 1.3 * k + 0.5);
                       const auto ctx = make_distill_context(forward(teacher, inst.train, nullptr), inst.social);
                       const auto fo = forward(m, inst.train, &inst.social);
                       auto g = zeros_like(fo);
                       const auto users = all_users(inst);
                       const double l = distill_loss_grad(fo, ctx, users, 1.0, &g);
                       return std::make_pair(l, backward(m, inst.train, &inst.social, g));
                     }});
    cases.push_back({"unsupervised", backbone, true,
                     [](const Instance& inst, const EmbeddingModel& m) {
                       const auto fo = forward(m, inst.train, &inst.social);
                       auto g = zeros_like(fo);
                       const auto users = all_users(inst);
                       const double l = unsupervised_div_loss_grad(fo, inst.social, users, 1.0, &g);
                       return std::make_pair(l, backward(m, inst.train, &inst.social, g));
                     }});
  }
  return cases;
}

// True when some user's cosine to its friend mean sits at +-1, where the
// potential has a zero-gradient extremum and relative error is undefined.
inline bool saturated_potentials(const Instance& inst) {
  const auto* social = inst.model.social_enabled ? &inst.social : nullptr;
  const auto fo = forward(inst.model, inst.train, social);
  for (UserId a = 0; a < inst.model.num_users(); ++a) {
    if (inst.social.out_degree(a) == 0) continue;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(fo.users.cols());
    for (auto b : inst.social.friends_of(a)) mean += fo.users.row(b);
    const double psi = angle_potential(fo.users.row(a), mean).value;
    if (std::abs(psi) > 1.0 - 1e-9) return true;
  }
  return false;
}

inline Instance gradient_instance(std::mt19937_64& rng, const GradientCase& c) {
  for (;;) {
    auto inst = random_instance(rng, c.backbone, c.social_enabled);
    if (!saturated_potentials(inst)) return inst;
  }
}

// Brute-force metric references written directly from the definitions.
namespace oracle {

inline double recall(const std::vector<std::vector<ItemId>>& lists,
                     const std::vector<std::set<ItemId>>& truth) {
  double sum = 0.0;
  int users = 0;
  for (std::size_t a = 0; a < truth.size(); ++a) {
    if (truth[a].empty()) continue;
    int hits = 0;
    for (auto i : lists[a]) hits += truth[a].count(i) ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(truth[a].size());
    ++users;
  }
  return sum / users;
}

inline double ndcg(const std::vector<std::vector<ItemId>>& lists,
                   const std::vector<std::set<ItemId>>& truth, std::size_t k) {
  double sum = 0.0;
  int users = 0;
  for (std::size_t a = 0; a < truth.size(); ++a) {
    if (truth[a].empty()) continue;
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t r = 0; r < lists[a].size(); ++r)
      if (truth[a].count(lists[a][r])) dcg += 1.0 / std::log2(r + 2.0);
    for (std::size_t r = 0; r < std::min(k, truth[a].size()); ++r) idcg += 1.0 / std::log2(r + 2.0);
    sum += dcg / idcg;
    ++users;
  }
  return sum / users;
}

inline double coverage(const std::vector<std::vector<ItemId>>& lists, std::size_t n) {
  std::set<ItemId> seen;
  for (const auto& l : lists) seen.insert(l.begin(), l.end());
  return static_cast<double>(seen.size()) / static_cast<double>(n);
}

inline double entropy(const std::vector<std::vector<ItemId>>& lists, std::size_t n) {
  std::vector<double> counts(n, 0.0);
  double total = 0.0;
  for (const auto& l : lists)
    for (auto i : l) {
      counts[i] += 1.0;
      total += 1.0;
    }
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / total) * std::log2(c / total);
  return h;
}

}  // namespace oracle

struct MetricInstance {
  RankedLists lists;
  InteractionGraph test;
  std::vector<std::set<ItemId>> truth;
  std::size_t num_items = 0;
};

inline MetricInstance random_metric_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_m(1, 5), pick_n(1, 8), pick_k(1, 4);
  const auto m = pick_m(rng), n = pick_n(rng), k = pick_k(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MetricInstance inst;
  inst.num_items = n;
  inst.lists.k = k;
  inst.lists.lists.resize(m);
  inst.truth.resize(m);
  std::vector<Edge> test;
  for (UserId a = 0; a < m; ++a) {
    std::vector<ItemId> items(n);
    for (ItemId i = 0; i < n; ++i) items[i] = i;
    std::shuffle(items.begin(), items.end(), rng);
    items.resize(std::min(k, n));
    inst.lists.lists[a] = items;
    for (ItemId i = 0; i < n; ++i)
      if (unit(rng) < 0.35) {
        test.push_back({a, i});
        inst.truth[a].insert(i);
      }
  }
  if (test.empty()) {
    test.push_back({0, 0});
    inst.truth[0].insert(0);
  }
  inst.test = InteractionGraph::from_edges(m, n, std::move(test));
  return inst;
}

// All size-k subsets of {0..n-1}.
inline void for_each_subset(std::size_t n, std::size_t k,
                            const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> idx(k);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t start) {
    if (pos == k) {
      fn(idx);
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      idx[pos] = i;
      rec(pos + 1, i + 1);
    }
  };
  rec(0, 0);
}

// L = Diag(g) S Diag(g) with g_i = exp(u_i), u_i in [1,3], and S the (cos+1)/2
// similarity of random vectors.
inline Matrix random_dpp_kernel(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> pick_d(2, 5);
  const auto d = pick_d(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  CandidateSet c;
  c.item_vectors.resize(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index k = 0; k < c.item_vectors.size(); ++k) c.item_vectors.data()[k] = gauss(rng);
  for (std::size_t i = 0; i < n; ++i) {
    c.items.push_back(static_cast<ItemId>(i));
    c.relevance.push_back(u(rng));
  }
  // theta = 0.5 makes the exponent theta * rel / (1 - theta) equal to rel.
  return build_dpp_kernel(c, 0.5);
}

inline double best_log_det(const Matrix& kernel, std::size_t k) {
  double opt = -std::numeric_limits<double>::infinity();
  for_each_subset(static_cast<std::size_t>(kernel.rows()), k,
                  [&](const auto& s) { opt = std::max(opt, log_det_subset(kernel, s)); });
  return opt;
}

// Kernels whose best size-k log-det is positive; the (1 - 1/e) factor is only
// meaningful for a positive objective.
inline Matrix random_positive_dpp_kernel(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  for (;;) {
    auto kernel = random_dpp_kernel(rng, n);
    if (best_log_det(kernel, k) > 0.0) return kernel;
  }
}

}  // namespace divsr::fixtures
