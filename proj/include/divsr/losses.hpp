#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <vector>

#include "divsr/data.hpp"
#include "divsr/model.hpp"

namespace divsr {

// log(1 + e^x) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline ForwardOutput zeros_like(const ForwardOutput& fo) {
  return {Matrix::Zero(fo.users.rows(), fo.users.cols()),
          Matrix::Zero(fo.items.rows(), fo.items.cols())};
}

// ---------------------------------------------------------------------------
// BPR

// Mean of -ln sigmoid(s_ai - s_aj) over the batch, without the L2 term.
inline double bpr_data_loss(const ForwardOutput& fo, const TripletBatch& batch) {
  double sum = 0.0;
  for (const auto& t : batch.rows) {
    const double margin = fo.users.row(t.user).dot(fo.items.row(t.positive) - fo.items.row(t.negative));
    sum += softplus(-margin);
  }
  return sum / static_cast<double>(batch.size());
}

// `params_l2` is the squared Frobenius norm of every trainable table.
inline double bpr_loss(const ForwardOutput& fo, const TripletBatch& batch, double params_l2,
                       double lambda) {
  return bpr_data_loss(fo, batch) + lambda * params_l2;
}

// Adds weight * d(bpr_data_loss)/d(fo) into `grad`; returns the unweighted loss.
inline double bpr_data_loss_grad(const ForwardOutput& fo, const TripletBatch& batch, double weight,
                                 ForwardOutput& grad) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double sum = 0.0;
  for (const auto& t : batch.rows) {
    const auto p = fo.users.row(t.user);
    const auto qi = fo.items.row(t.positive);
    const auto qj = fo.items.row(t.negative);
    const double margin = p.dot(qi - qj);
    sum += softplus(-margin);
    const double coeff = -sigmoid(-margin) * inv_b * weight;
    grad.users.row(t.user) += coeff * (qi - qj);
    grad.items.row(t.positive) += coeff * p;
    grad.items.row(t.negative) -= coeff * p;
  }
  return sum * inv_b;
}

// ---------------------------------------------------------------------------
// Social regularizers

struct FriendMean {
  Matrix mean;
  std::vector<char> active;  // user has at least one out-neighbor
  std::size_t num_active = 0;
};

// Row a is the mean of rows N_s(a); zero (and inactive) when a trusts nobody.
inline FriendMean friend_mean(const Matrix& embeddings, const SocialGraph& social) {
  FriendMean fm;
  fm.mean = Matrix::Zero(embeddings.rows(), embeddings.cols());
  fm.active.assign(static_cast<std::size_t>(embeddings.rows()), 0);
  for (UserId a = 0; a < social.num_users(); ++a) {
    const auto friends = social.friends_of(a);
    if (friends.empty()) continue;
    for (auto b : friends) fm.mean.row(a) += embeddings.row(b);
    fm.mean.row(a) /= static_cast<double>(friends.size());
    fm.active[a] = 1;
    ++fm.num_active;
  }
  return fm;
}

// SocialMF: mean over users with friends of ||p_a - mean_{b in N_s(a)} p_b||^2.
inline double socialmf_regularizer(const ForwardOutput& fo, const SocialGraph& social) {
  const auto fm = friend_mean(fo.users, social);
  if (fm.num_active == 0) return 0.0;
  double sum = 0.0;
  for (UserId a = 0; a < social.num_users(); ++a)
    if (fm.active[a]) sum += (fo.users.row(a) - fm.mean.row(a)).squaredNorm();
  return sum / static_cast<double>(fm.num_active);
}

inline double socialmf_regularizer_grad(const ForwardOutput& fo, const SocialGraph& social,
                                        double weight, ForwardOutput& grad) {
  const auto fm = friend_mean(fo.users, social);
  if (fm.num_active == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(fm.num_active);
  double sum = 0.0;
  for (UserId a = 0; a < social.num_users(); ++a) {
    if (!fm.active[a]) continue;
    const Eigen::RowVectorXd r = fo.users.row(a) - fm.mean.row(a);
    sum += r.squaredNorm();
    const Eigen::RowVectorXd g = 2.0 * weight * inv_n * r;
    grad.users.row(a) += g;
    const auto friends = social.friends_of(a);
    const double share = 1.0 / static_cast<double>(friends.size());
    for (auto b : friends) grad.users.row(b) -= share * g;
  }
  return sum * inv_n;
}

// TrustMF truster half: mean binary cross-entropy of sigmoid(u_a . w_b) vs s_ab.
inline double trustmf_loss(const EmbeddingModel& model, std::span<const TrustPair> pairs) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double z = model.user_table.row(p.truster).dot(model.trustee_table.row(p.trustee));
    sum += p.label * softplus(-z) + (1.0 - p.label) * softplus(z);
  }
  return sum / static_cast<double>(pairs.size());
}

inline double trustmf_loss_grad(const EmbeddingModel& model, std::span<const TrustPair> pairs,
                                double weight, ModelGrad& grad) {
  if (pairs.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  double sum = 0.0;
  for (const auto& p : pairs) {
    const auto u = model.user_table.row(p.truster);
    const auto w = model.trustee_table.row(p.trustee);
    const double z = u.dot(w);
    sum += p.label * softplus(-z) + (1.0 - p.label) * softplus(z);
    const double coeff = (sigmoid(z) - p.label) * inv_n * weight;
    grad.user_table.row(p.truster) += coeff * w;
    grad.trustee_table.row(p.trustee) += coeff * u;
  }
  return sum * inv_n;
}

// ---------------------------------------------------------------------------
// Angle-wise potentials

inline constexpr double kDegenerateNorm = 1e-12;

struct AnglePotential {
  double value = 0.0;
  bool degenerate = false;  // a norm fell below kDegenerateNorm; value forced to 0
};

template <typename A, typename B>
AnglePotential angle_potential(const A& u, const B& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu < kDegenerateNorm || nv < kDegenerateNorm) return {0.0, true};
  return {std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0), false};
}

// d cos(u,v)/du and d cos(u,v)/dv. Both zero for degenerate pairs.
template <typename A, typename B>
void angle_potential_grad(const A& u, const B& v, Eigen::RowVectorXd& du, Eigen::RowVectorXd& dv) {
  const double nu = u.norm();
  const double nv = v.norm();
  du = Eigen::RowVectorXd::Zero(u.size());
  dv = Eigen::RowVectorXd::Zero(v.size());
  if (nu < kDegenerateNorm || nv < kDegenerateNorm) return;
  const double c = u.dot(v) / (nu * nv);
  du = v / (nu * nv) - c * u / (nu * nu);
  dv = u / (nu * nv) - c * v / (nv * nv);
}

// psi(a, af) for every user; inactive (friendless) users hold 0.
inline std::vector<double> user_friend_potentials(const Matrix& users, const FriendMean& fm) {
  std::vector<double> psi(static_cast<std::size_t>(users.rows()), 0.0);
  for (Eigen::Index a = 0; a < users.rows(); ++a)
    if (fm.active[static_cast<std::size_t>(a)])
      psi[static_cast<std::size_t>(a)] = angle_potential(users.row(a), fm.mean.row(a)).value;
  return psi;
}

// ---------------------------------------------------------------------------
// Relational distillation

// Frozen teacher targets. Built once before student training.
struct DistillContext {
  ForwardOutput teacher_output;
  FriendMean teacher_friend_mean;
  std::vector<double> teacher_potential;  // psi_T(a, af)
  const SocialGraph* social = nullptr;
};

inline DistillContext make_distill_context(ForwardOutput teacher_output, const SocialGraph& social) {
  DistillContext ctx;
  ctx.teacher_friend_mean = friend_mean(teacher_output.users, social);
  ctx.teacher_potential = user_friend_potentials(teacher_output.users, ctx.teacher_friend_mean);
  ctx.teacher_output = std::move(teacher_output);
  ctx.social = &social;
  return ctx;
}

// How per-user potential terms are combined.
enum class Reduction { Mean, Sum };

namespace detail {

inline std::vector<UserId> users_with_friends(const SocialGraph& social) {
  std::vector<UserId> out;
  for (UserId a = 0; a < social.num_users(); ++a)
    if (social.out_degree(a) > 0) out.push_back(a);
  return out;
}

inline Eigen::RowVectorXd friend_mean_row(const Matrix& users, const SocialGraph& social, UserId a) {
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(users.cols());
  const auto friends = social.friends_of(a);
  for (auto b : friends) m += users.row(b);
  return m / static_cast<double>(friends.size());
}

// Mean over `users` (those with friends) of loss(psi_S(a, af), a), with
// gradients pushed through psi_S into `grad` when non-null.
template <typename PointLoss>
double potential_loss(const ForwardOutput& fo, const SocialGraph& social,
                      std::span<const UserId> users, double weight, ForwardOutput* grad,
                      Reduction reduction, PointLoss&& point_loss) {
  std::size_t count = 0;
  for (auto a : users)
    if (social.out_degree(a) > 0) ++count;
  if (count == 0) return 0.0;
  const double inv_n = reduction == Reduction::Mean ? 1.0 / static_cast<double>(count) : 1.0;
  double sum = 0.0;
  Eigen::RowVectorXd du, dm;
  for (auto a : users) {
    const auto friends = social.friends_of(a);
    if (friends.empty()) continue;
    const Eigen::RowVectorXd mean = friend_mean_row(fo.users, social, a);
    const auto psi = angle_potential(fo.users.row(a), mean);
    const auto [value, slope] = point_loss(psi.value, a);
    sum += value;
    if (grad == nullptr || psi.degenerate) continue;
    angle_potential_grad(fo.users.row(a), mean, du, dm);
    const double coeff = slope * inv_n * weight;
    grad->users.row(a) += coeff * du;
    const double share = coeff / static_cast<double>(friends.size());
    for (auto b : friends) grad->users.row(b) += share * dm;
  }
  return sum * inv_n;
}

struct ValueSlope {
  double value;
  double slope;
};

}  // namespace detail

// Mean (or sum) over `users` with friends of (psi_T(a, af) - psi_S(a, af))^2.
// Adds weight * gradient into `grad` when non-null.
inline double distill_loss_grad(const ForwardOutput& student, const DistillContext& ctx,
                                std::span<const UserId> users, double weight,
                                ForwardOutput* grad, Reduction reduction = Reduction::Mean) {
  return detail::potential_loss(student, *ctx.social, users, weight, grad, reduction,
                                [&](double psi_s, UserId a) {
                                  const double diff = ctx.teacher_potential[a] - psi_s;
                                  return detail::ValueSlope{diff * diff, -2.0 * diff};
                                });
}

inline double distill_loss(const ForwardOutput& student, const DistillContext& ctx) {
  const auto users = detail::users_with_friends(*ctx.social);
  if (users.empty()) {
    std::cerr << "warning: distillation loss has no users with friends\n";
    return 0.0;
  }
  return distill_loss_grad(student, ctx, users, 1.0, nullptr);
}

// Teacher-free variant: mean over users with friends of psi_S(a, af)^2.
inline double unsupervised_div_loss_grad(const ForwardOutput& student, const SocialGraph& social,
                                         std::span<const UserId> users, double weight,
                                         ForwardOutput* grad,
                                         Reduction reduction = Reduction::Mean) {
  return detail::potential_loss(student, social, users, weight, grad, reduction,
                                [](double psi_s, UserId) {
    return detail::ValueSlope{psi_s * psi_s, 2.0 * psi_s};
  });
}

inline double unsupervised_div_loss(const ForwardOutput& student, const SocialGraph& social) {
  const auto users = detail::users_with_friends(social);
  return unsupervised_div_loss_grad(student, social, users, 1.0, nullptr);
}

// L = L_R + beta * L_D.
inline double joint_loss(double recommendation_loss, double distill, double beta) {
  return recommendation_loss + beta * distill;
}

}  // namespace divsr
