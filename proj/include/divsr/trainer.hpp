#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "divsr/adam.hpp"
#include "divsr/data.hpp"
#include "divsr/error.hpp"
#include "divsr/losses.hpp"
#include "divsr/metrics.hpp"
#include "divsr/model.hpp"

namespace divsr {

enum class TeacherStrategy { SameFamily, CrossModel, Unsupervised, None };

inline std::string to_string(TeacherStrategy s) {
  switch (s) {
    case TeacherStrategy::SameFamily: return "same-family";
    case TeacherStrategy::CrossModel: return "cross-model";
    case TeacherStrategy::Unsupervised: return "unsupervised";
    case TeacherStrategy::None: return "none";
  }
  return "?";
}

inline TeacherStrategy parse_teacher_strategy(const std::string& s) {
  if (s == "same-family" || s == "SameFamily") return TeacherStrategy::SameFamily;
  if (s == "cross-model" || s == "CrossModel") return TeacherStrategy::CrossModel;
  if (s == "unsupervised" || s == "Unsupervised") return TeacherStrategy::Unsupervised;
  if (s == "none" || s == "None") return TeacherStrategy::None;
  throw ConfigError("unknown teacher strategy '" + s + "'");
}

struct TrainConfig {
  Backbone backbone = Backbone::MF;
  bool social_enabled = true;
  std::size_t dim = 64;
  std::size_t num_layers = 2;  // DiffNet diffusion depth
  double learning_rate = 0.001;
  std::size_t batch_size = 2000;
  double l2_lambda = 0.001;
  double beta = 0.1;
  double social_reg_weight = 0.1;  // SocialMF
  double trust_loss_weight = 0.5;  // TrustMF
  std::size_t epochs = 300;
  std::size_t early_stop_patience = 10;
  TeacherStrategy teacher_strategy = TeacherStrategy::SameFamily;
  std::uint64_t seed = 0;
  std::size_t eval_k = 100;
  double validation_fraction = 0.1;

  ModelShape shape() const { return {backbone, social_enabled, dim, num_layers}; }

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(l2_lambda >= 0)) throw ConfigError("l2_lambda must be >= 0");
    if (!(beta >= 0)) throw ConfigError("beta must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (eval_k < 1) throw ConfigError("eval_k must be >= 1");
    if (!(validation_fraction > 0 && validation_fraction < 1)) {
      throw ConfigError("validation_fraction must lie in (0,1)");
    }
    if (backbone == Backbone::DiffNet && num_layers < 1) throw ConfigError("num_layers must be >= 1");
  }
};

// Training edges minus a per-user validation holdout used for early stopping.
struct TrainingData {
  InteractionGraph fit;
  InteractionGraph validation;
};

inline TrainingData carve_validation(const InteractionGraph& train, double fraction,
                                     std::uint64_t seed) {
  auto s = split_holdout(train, fraction, seed ^ 0x9e3779b97f4a7c15ull);
  return {std::move(s.train), std::move(s.test)};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double rec_loss = std::numeric_limits<double>::quiet_NaN();
  double distill_loss = std::numeric_limits<double>::quiet_NaN();
  double total_loss = std::numeric_limits<double>::quiet_NaN();
  double val_recall = std::numeric_limits<double>::quiet_NaN();
  double sim = std::numeric_limits<double>::quiet_NaN();  // mean normalized user-friend cosine
};

inline constexpr const char* kEpochLogHeader = "epoch\tL_R\tL_D\ttotal\tval_recall\tsim";

inline std::string format_epoch_record(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.epoch << '\t' << r.rec_loss << '\t' << r.distill_loss << '\t'
     << r.total_loss << '\t' << r.val_recall << '\t' << r.sim;
  return os.str();
}

inline EpochRecord parse_epoch_record(const std::string& line) {
  std::istringstream in(line);
  EpochRecord r;
  std::string f[6];
  for (auto& s : f)
    if (!(in >> s)) throw DataError("malformed epoch record: " + line);
  r.epoch = std::stoul(f[0]);
  r.rec_loss = std::stod(f[1]);
  r.distill_loss = std::stod(f[2]);
  r.total_loss = std::stod(f[3]);
  r.val_recall = std::stod(f[4]);
  r.sim = std::stod(f[5]);
  return r;
}

struct TrainResult {
  EmbeddingModel model;  // best-validation checkpoint
  std::vector<EpochRecord> log;  // epoch 0 is the untrained model
  std::size_t best_epoch = 0;
  double best_val_recall = 0.0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

namespace detail {

enum class DistillMode { Off, Teacher, Unsupervised };

struct Objective {
  const SocialGraph* social = nullptr;  // graph seen by the model's social module
  const SocialGraph* diagnostics = nullptr;  // graph used for the sim column
  DistillMode distill = DistillMode::Off;
  const DistillContext* ctx = nullptr;
};

inline std::vector<UserId> distinct_users(const TripletBatch& batch) {
  std::vector<UserId> users;
  users.reserve(batch.size());
  for (const auto& t : batch.rows) users.push_back(t.user);
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());
  return users;
}

// Squared norms of the table rows a batch touches, one term per occurrence,
// divided by the batch size. Adds lambda * d/d(theta) into `grad`.
inline double batch_l2(const EmbeddingModel& model, const TripletBatch& batch, double lambda,
                       ModelGrad& grad) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double c = 2.0 * lambda * inv_b;
  double sum = 0.0;
  for (const auto& t : batch.rows) {
    sum += model.user_table.row(t.user).squaredNorm() +
           model.item_table.row(t.positive).squaredNorm() +
           model.item_table.row(t.negative).squaredNorm();
    if (c == 0.0) continue;
    grad.user_table.row(t.user) += c * model.user_table.row(t.user);
    grad.item_table.row(t.positive) += c * model.item_table.row(t.positive);
    grad.item_table.row(t.negative) += c * model.item_table.row(t.negative);
  }
  return sum * inv_b;
}

// Same scheme for the trustee rows of the sampled trust pairs.
inline double trustee_l2(const EmbeddingModel& model, std::span<const TrustPair> pairs, double lambda,
                         ModelGrad& grad) {
  if (pairs.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(pairs.size());
  const double c = 2.0 * lambda * inv_b;
  double sum = 0.0;
  for (const auto& p : pairs) {
    sum += model.trustee_table.row(p.trustee).squaredNorm();
    if (c != 0.0) grad.trustee_table.row(p.trustee) += c * model.trustee_table.row(p.trustee);
  }
  return sum * inv_b;
}

inline EpochRecord validate_epoch(const EmbeddingModel& model, const TrainingData& data,
                                  const Objective& obj, std::size_t k, std::size_t epoch) {
  EpochRecord rec;
  rec.epoch = epoch;
  const auto fo = forward(model, data.fit, obj.social);
  if (data.validation.num_edges() > 0) {
    const auto lists = rank_users(fo, data.fit, k, &data.validation);
    rec.val_recall = recall_at_k(lists, data.validation);
  }
  if (obj.diagnostics != nullptr) {
    if (auto s = user_friend_similarity(fo, *obj.diagnostics)) rec.sim = *s;
  }
  return rec;
}

inline TrainResult train_loop(const TrainConfig& cfg, EmbeddingModel model,
                              const TrainingData& data, const Objective& obj,
                              const EpochObserver& observer) {
  TrainResult result;
  AdamState adam = AdamState::for_model(model);
  Rng rng(cfg.seed * 0x2545f4914f6cdd1dull + 1);
  const bool socialmf = model.backbone == Backbone::SocialMF && model.social_enabled;
  const bool trustmf = model.backbone == Backbone::TrustMF && model.social_enabled;
  const std::size_t steps =
      std::max<std::size_t>(1, (data.fit.num_edges() + cfg.batch_size - 1) / cfg.batch_size);

  auto record = validate_epoch(model, data, obj, cfg.eval_k, 0);
  result.log.push_back(record);
  if (observer) observer(record);
  result.model = model;
  result.best_epoch = 0;
  result.best_val_recall = std::isnan(record.val_recall) ? 0.0 : record.val_recall;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double sum_rec = 0.0, sum_distill = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batch = sample_triplets(data.fit, cfg.batch_size, rng);
      const auto fo = forward(model, data.fit, obj.social);
      auto grad_fo = zeros_like(fo);
      double rec = bpr_data_loss_grad(fo, batch, 1.0, grad_fo);
      if (socialmf) {
        rec += cfg.social_reg_weight *
               socialmf_regularizer_grad(fo, *obj.social, cfg.social_reg_weight, grad_fo);
      }
      double distill = 0.0;
      if (obj.distill != DistillMode::Off) {
        const auto users = distinct_users(batch);
        auto* g = cfg.beta > 0 ? &grad_fo : nullptr;
        distill = obj.distill == DistillMode::Teacher
                      ? distill_loss_grad(fo, *obj.ctx, users, cfg.beta, g, Reduction::Mean)
                      : unsupervised_div_loss_grad(fo, *obj.social, users, cfg.beta, g,
                                                   Reduction::Mean);
      }
      auto grad = backward(model, data.fit, obj.social, grad_fo);
      if (trustmf) {
        const auto pairs = sample_trust_pairs(*obj.social, std::max<std::size_t>(1, cfg.batch_size / 2), rng);
        rec += cfg.trust_loss_weight * trustmf_loss_grad(model, pairs, cfg.trust_loss_weight, grad);
        rec += cfg.l2_lambda * trustee_l2(model, pairs, cfg.l2_lambda, grad);
      }
      rec += cfg.l2_lambda * batch_l2(model, batch, cfg.l2_lambda, grad);
      sum_rec += rec;
      sum_distill += distill;
      try {
        adam_step(model, grad, adam, cfg.learning_rate);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            ": " + e.what());
      }
    }
    record = validate_epoch(model, data, obj, cfg.eval_k, epoch);
    record.rec_loss = sum_rec / static_cast<double>(steps);
    record.distill_loss = sum_distill / static_cast<double>(steps);
    record.total_loss = joint_loss(record.rec_loss, record.distill_loss, cfg.beta);
    result.log.push_back(record);
    if (observer) observer(record);

    // Without a validation signal the last epoch wins.
    const bool improved =
        std::isnan(record.val_recall) || record.val_recall > result.best_val_recall;
    if (improved) {
      result.model = model;
      result.best_epoch = epoch;
      result.best_val_recall = std::isnan(record.val_recall) ? 0.0 : record.val_recall;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  return result;
}

}  // namespace detail

// Non-social variant trained on BPR alone. `diagnostics` only feeds the sim
// column of the epoch log.
inline TrainResult train_teacher(TrainConfig cfg, const DatasetSplit& split,
                                 const SocialGraph* diagnostics = nullptr,
                                 const EpochObserver& observer = {}) {
  cfg.social_enabled = false;
  cfg.validate();
  const auto data = carve_validation(split.train, cfg.validation_fraction, cfg.seed);
  auto model = init_model(cfg.shape(), split.train.num_users(), split.train.num_items(), cfg.seed);
  detail::Objective obj;
  obj.diagnostics = diagnostics;
  cfg.beta = 0.0;
  return detail::train_loop(cfg, std::move(model), data, obj, observer);
}

// Social backbone trained on L_R + beta * L_D. The teacher is read only.
inline TrainResult train_student(TrainConfig cfg, const DatasetSplit& split,
                                 const SocialGraph& social, const EmbeddingModel* teacher,
                                 const EpochObserver& observer = {}) {
  cfg.social_enabled = true;
  cfg.validate();
  if (social.num_users() != split.train.num_users()) {
    throw DataError("social graph has " + std::to_string(social.num_users()) +
                    " users, interactions have " + std::to_string(split.train.num_users()));
  }
  const auto data = carve_validation(split.train, cfg.validation_fraction, cfg.seed);
  auto model = init_model(cfg.shape(), split.train.num_users(), split.train.num_items(), cfg.seed);

  detail::Objective obj;
  obj.social = &social;
  obj.diagnostics = &social;
  std::optional<DistillContext> ctx;
  switch (cfg.teacher_strategy) {
    case TeacherStrategy::None:
      break;
    case TeacherStrategy::Unsupervised:
      obj.distill = detail::DistillMode::Unsupervised;
      break;
    case TeacherStrategy::SameFamily:
    case TeacherStrategy::CrossModel: {
      if (teacher == nullptr) {
        throw ConfigError(cfg.teacher_strategy == TeacherStrategy::CrossModel
                              ? "cross-model strategy needs an external teacher checkpoint"
                              : "same-family strategy needs a teacher checkpoint");
      }
      if (teacher->social_enabled) throw ConfigError("teacher must be a non-social model");
      if (teacher->dim != cfg.dim) {
        throw ConfigError("teacher dimension " + std::to_string(teacher->dim) +
                          " does not match student dimension " + std::to_string(cfg.dim));
      }
      if (cfg.teacher_strategy == TeacherStrategy::SameFamily && teacher->backbone != cfg.backbone) {
        throw ConfigError("same-family teacher is " + to_string(teacher->backbone) +
                          ", student is " + to_string(cfg.backbone));
      }
      if (teacher->num_users() != model.num_users() || teacher->num_items() != model.num_items()) {
        throw ConfigError("teacher was trained on a different user/item catalog");
      }
      ctx = make_distill_context(forward(*teacher, data.fit, nullptr), social);
      obj.distill = detail::DistillMode::Teacher;
      obj.ctx = &*ctx;
      break;
    }
  }
  return detail::train_loop(cfg, std::move(model), data, obj, observer);
}

// Test-set report. The forward pass sees every training edge (validation
// included), and all of them are excluded from the ranking.
inline EvalReport evaluate_model(const EmbeddingModel& model, const DatasetSplit& split,
                                 const SocialGraph* social, std::size_t k) {
  const auto fo = forward(model, split.train, model.social_enabled ? social : nullptr);
  return evaluate(fo, split.train, split.test, k, social);
}

}  // namespace divsr
