#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "divsr/error.hpp"
#include "divsr/model.hpp"

namespace divsr {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators for every table of one model.
struct AdamState {
  ModelGrad first;
  ModelGrad second;
  std::uint64_t step = 0;

  static AdamState for_model(const EmbeddingModel& m) {
    return {ModelGrad::zeros_like(m), ModelGrad::zeros_like(m), 0};
  }
};

namespace detail {

inline bool row_is_zero(const Matrix& g, Eigen::Index r) {
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    if (g(r, c) != 0.0) return false;
  return true;
}

inline void check_finite(const Matrix& g, const char* name) {
  if (!g.allFinite()) throw TrainingError(std::string("non-finite gradient in ") + name);
}

// Updates only rows with a non-zero loss gradient; L2 (2*lambda*theta) is
// added to those rows before the moment update.
inline void adam_table(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, double lr,
                       double l2_lambda, double bias1, double bias2, const AdamHyper& h) {
  for (Eigen::Index r = 0; r < param.rows(); ++r) {
    if (row_is_zero(grad, r)) continue;
    for (Eigen::Index c = 0; c < param.cols(); ++c) {
      const double g = grad(r, c) + 2.0 * l2_lambda * param(r, c);
      m(r, c) = h.beta1 * m(r, c) + (1.0 - h.beta1) * g;
      v(r, c) = h.beta2 * v(r, c) + (1.0 - h.beta2) * g * g;
      const double mhat = m(r, c) / bias1;
      const double vhat = v(r, c) / bias2;
      param(r, c) -= lr * mhat / (std::sqrt(vhat) + h.epsilon);
    }
  }
}

}  // namespace detail

// Throws TrainingError, leaving the model untouched, if any gradient is
// non-finite.
inline void adam_step(EmbeddingModel& model, const ModelGrad& grad, AdamState& state, double lr,
                      double l2_lambda = 0.0, const AdamHyper& h = {}) {
  detail::check_finite(grad.user_table, "user table");
  detail::check_finite(grad.item_table, "item table");
  detail::check_finite(grad.trustee_table, "trustee table");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  detail::adam_table(model.user_table, grad.user_table, state.first.user_table,
                     state.second.user_table, lr, l2_lambda, bias1, bias2, h);
  detail::adam_table(model.item_table, grad.item_table, state.first.item_table,
                     state.second.item_table, lr, l2_lambda, bias1, bias2, h);
  detail::adam_table(model.trustee_table, grad.trustee_table, state.first.trustee_table,
                     state.second.trustee_table, lr, l2_lambda, bias1, bias2, h);
  if (!model.all_finite()) throw TrainingError("parameters became non-finite after Adam step");
}

}  // namespace divsr
