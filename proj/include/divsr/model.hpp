#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "divsr/data.hpp"
#include "divsr/error.hpp"

namespace divsr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Backbone : std::uint32_t { MF = 0, SocialMF = 1, TrustMF = 2, DiffNet = 3 };

inline std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::MF: return "MF";
    case Backbone::SocialMF: return "SocialMF";
    case Backbone::TrustMF: return "TrustMF";
    case Backbone::DiffNet: return "DiffNet";
  }
  return "?";
}

inline Backbone parse_backbone(const std::string& s) {
  if (s == "MF" || s == "mf") return Backbone::MF;
  if (s == "SocialMF" || s == "socialmf") return Backbone::SocialMF;
  if (s == "TrustMF" || s == "trustmf") return Backbone::TrustMF;
  if (s == "DiffNet" || s == "diffnet") return Backbone::DiffNet;
  throw ConfigError("unknown backbone '" + s + "'");
}

// Trainable parameters. `trustee_table` is non-empty only for TrustMF with
// its social module enabled.
struct EmbeddingModel {
  Backbone backbone = Backbone::MF;
  bool social_enabled = false;
  std::size_t dim = 0;
  std::size_t num_layers = 2;
  std::uint64_t seed = 0;
  Matrix user_table;
  Matrix item_table;
  Matrix trustee_table;

  std::size_t num_users() const { return static_cast<std::size_t>(user_table.rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(item_table.rows()); }

  bool has_trustee() const { return trustee_table.size() > 0; }

  double squared_norm() const {
    return user_table.squaredNorm() + item_table.squaredNorm() + trustee_table.squaredNorm();
  }

  bool all_finite() const {
    return user_table.allFinite() && item_table.allFinite() && trustee_table.allFinite();
  }
};

struct ModelShape {
  Backbone backbone = Backbone::MF;
  bool social_enabled = false;
  std::size_t dim = 64;
  std::size_t num_layers = 2;
};

// Entries i.i.d. uniform on [-0.5/sqrt(d), 0.5/sqrt(d)], filled user, item,
// then trustee table.
inline EmbeddingModel init_model(const ModelShape& shape, std::size_t num_users,
                                 std::size_t num_items, std::uint64_t seed) {
  if (shape.dim == 0) throw ConfigError("embedding dimension must be > 0");
  if (shape.backbone == Backbone::DiffNet && shape.num_layers == 0) {
    throw ConfigError("DiffNet needs at least one layer");
  }
  EmbeddingModel m;
  m.backbone = shape.backbone;
  m.social_enabled = shape.social_enabled;
  m.dim = shape.dim;
  m.num_layers = shape.num_layers;
  m.seed = seed;
  const double bound = 0.5 / std::sqrt(static_cast<double>(shape.dim));
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto fill = [&](Matrix& t, std::size_t rows) {
    t.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(shape.dim));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = dist(rng);
  };
  fill(m.user_table, num_users);
  fill(m.item_table, num_items);
  if (shape.backbone == Backbone::TrustMF && shape.social_enabled) fill(m.trustee_table, num_users);
  return m;
}

// Final embeddings used for scoring: score(a, i) = users.row(a) . items.row(i).
struct ForwardOutput {
  Matrix users;
  Matrix items;
};

namespace detail {

// One diffusion layer: h'_a = (h_a + mean_{b in N_s(a)} h_b) / 2, or h_a when
// a trusts nobody.
inline Matrix diffuse(const Matrix& h, const SocialGraph& social) {
  Matrix out = h;
  for (UserId a = 0; a < social.num_users(); ++a) {
    const auto friends = social.friends_of(a);
    if (friends.empty()) continue;
    Vector mean = Vector::Zero(h.cols());
    for (auto b : friends) mean += h.row(b).transpose();
    mean /= static_cast<double>(friends.size());
    out.row(a) = 0.5 * (h.row(a) + mean.transpose());
  }
  return out;
}

// Adjoint of `diffuse`.
inline Matrix diffuse_adjoint(const Matrix& grad, const SocialGraph& social) {
  Matrix out = grad;
  for (UserId a = 0; a < social.num_users(); ++a) {
    const auto friends = social.friends_of(a);
    if (friends.empty()) continue;
    out.row(a) -= 0.5 * grad.row(a);
    const double w = 0.5 / static_cast<double>(friends.size());
    for (auto b : friends) out.row(b) += w * grad.row(a);
  }
  return out;
}

inline void check_social(const EmbeddingModel& model, const SocialGraph* social) {
  if (model.social_enabled && social == nullptr) {
    throw ConfigError(to_string(model.backbone) + " with social module needs a social graph");
  }
  if (social != nullptr && model.social_enabled && social->num_users() != model.num_users()) {
    throw DataError("social graph user count does not match model");
  }
}

}  // namespace detail

// `social` must be non-null when the model's social module is enabled; it is
// ignored otherwise.
inline ForwardOutput forward(const EmbeddingModel& model, const InteractionGraph& train,
                             const SocialGraph* social) {
  detail::check_social(model, social);
  ForwardOutput fo;
  fo.items = model.item_table;
  if (model.backbone != Backbone::DiffNet) {
    fo.users = model.user_table;
    return fo;
  }
  if (train.num_users() != model.num_users() || train.num_items() != model.num_items()) {
    throw DataError("interaction graph shape does not match model");
  }
  Matrix h = model.user_table;
  if (model.social_enabled) {
    for (std::size_t k = 0; k < model.num_layers; ++k) h = detail::diffuse(h, *social);
  }
  for (UserId a = 0; a < train.num_users(); ++a) {
    const auto items = train.items_of(a);
    if (items.empty()) continue;
    Vector mean = Vector::Zero(model.item_table.cols());
    for (auto i : items) mean += model.item_table.row(i).transpose();
    h.row(a) += mean.transpose() / static_cast<double>(items.size());
  }
  fo.users = std::move(h);
  return fo;
}

// Gradients with respect to the model's own tables.
struct ModelGrad {
  Matrix user_table;
  Matrix item_table;
  Matrix trustee_table;

  static ModelGrad zeros_like(const EmbeddingModel& m) {
    ModelGrad g;
    g.user_table = Matrix::Zero(m.user_table.rows(), m.user_table.cols());
    g.item_table = Matrix::Zero(m.item_table.rows(), m.item_table.cols());
    g.trustee_table = Matrix::Zero(m.trustee_table.rows(), m.trustee_table.cols());
    return g;
  }
};

// Chain rule from d(loss)/d(ForwardOutput) to d(loss)/d(tables).
inline ModelGrad backward(const EmbeddingModel& model, const InteractionGraph& train,
                          const SocialGraph* social, const ForwardOutput& grad_out) {
  detail::check_social(model, social);
  ModelGrad g;
  g.trustee_table = Matrix::Zero(model.trustee_table.rows(), model.trustee_table.cols());
  g.item_table = grad_out.items;
  if (model.backbone != Backbone::DiffNet) {
    g.user_table = grad_out.users;
    return g;
  }
  for (UserId a = 0; a < train.num_users(); ++a) {
    const auto items = train.items_of(a);
    if (items.empty()) continue;
    const double w = 1.0 / static_cast<double>(items.size());
    for (auto i : items) g.item_table.row(i) += w * grad_out.users.row(a);
  }
  Matrix gh = grad_out.users;
  if (model.social_enabled) {
    for (std::size_t k = 0; k < model.num_layers; ++k) gh = detail::diffuse_adjoint(gh, *social);
  }
  g.user_table = std::move(gh);
  return g;
}

// Excluded items get -inf and therefore never enter a top-k list.
inline std::vector<double> score_all_items(const ForwardOutput& fo, UserId user,
                                           std::span<const ItemId> exclude = {}) {
  std::vector<double> scores(static_cast<std::size_t>(fo.items.rows()));
  Eigen::Map<Vector> out(scores.data(), fo.items.rows());
  out.noalias() = fo.items * fo.users.row(user).transpose();
  for (auto i : exclude) scores[i] = -std::numeric_limits<double>::infinity();
  return scores;
}

// Highest scores first, ties by ascending id; non-finite scores are dropped.
inline std::vector<ItemId> topk(std::span<const double> scores, std::size_t k) {
  std::vector<ItemId> ids;
  ids.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (std::isfinite(scores[i])) ids.push_back(static_cast<ItemId>(i));
  const auto n = std::min(k, ids.size());
  auto better = [&](ItemId x, ItemId y) {
    return scores[x] > scores[y] || (scores[x] == scores[y] && x < y);
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), better);
  ids.resize(n);
  return ids;
}

}  // namespace divsr
