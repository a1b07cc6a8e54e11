#pragma once

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "divsr/config.hpp"
#include "divsr/data.hpp"
#include "divsr/metrics.hpp"
#include "divsr/trainer.hpp"

namespace divsr {

// Interactions plus social graph over one user index.
struct ExperimentData {
  InteractionGraph interactions;
  SocialGraph social;
};

using ProgressFn = std::function<void(const std::string&)>;

// Field-wise mean; sim averages only defined values.
inline EvalReport average_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("no reports to average");
  EvalReport out;
  out.k = reports.front().k;
  double sim = 0.0;
  std::size_t sims = 0;
  for (const auto& r : reports) {
    out.recall += r.recall;
    out.ndcg += r.ndcg;
    out.coverage += r.coverage;
    out.entropy += r.entropy;
    if (!std::isnan(r.sim)) {
      sim += r.sim;
      ++sims;
    }
  }
  const double n = static_cast<double>(reports.size());
  out.recall /= n;
  out.ndcg /= n;
  out.coverage /= n;
  out.entropy /= n;
  if (sims > 0) out.sim = sim / static_cast<double>(sims);
  return out;
}

// Repetition r uses split seed split_seed + r and training seed seed + r.
inline DatasetSplit repetition_split(const ExperimentSpec& spec, const ExperimentData& data,
                                     std::size_t r) {
  return split_holdout(data.interactions, spec.test_fraction, spec.split_seed + r);
}

inline TrainConfig repetition_config(const ExperimentSpec& spec, std::size_t r) {
  auto cfg = spec.train;
  cfg.seed = spec.train.seed + r;
  return cfg;
}

struct SweepRow {
  double beta = 0.0;
  EvalReport report;
};

inline constexpr const char* kSweepHeader = "beta\trecall\tcoverage\tentropy\tndcg";

inline std::vector<SweepRow> sweep_beta(const ExperimentSpec& spec, const ExperimentData& data,
                                        const ProgressFn& progress = {}) {
  if (spec.beta_grid.empty()) throw ConfigError("beta_grid must not be empty");
  if (spec.repetitions == 0) throw ConfigError("repetitions must be >= 1");
  std::vector<std::vector<EvalReport>> per_beta(spec.beta_grid.size());
  for (std::size_t r = 0; r < spec.repetitions; ++r) {
    const auto split = repetition_split(spec, data, r);
    auto cfg = repetition_config(spec, r);
    const auto teacher = train_teacher(cfg, split, &data.social).model;
    cfg.teacher_strategy = TeacherStrategy::SameFamily;
    for (std::size_t b = 0; b < spec.beta_grid.size(); ++b) {
      cfg.beta = spec.beta_grid[b];
      const auto student = train_student(cfg, split, data.social, &teacher).model;
      per_beta[b].push_back(evaluate_model(student, split, &data.social, cfg.eval_k));
      if (progress) {
        progress("repetition " + std::to_string(r + 1) + "/" + std::to_string(spec.repetitions) +
                 " beta " + std::to_string(cfg.beta) + " done");
      }
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t b = 0; b < spec.beta_grid.size(); ++b)
    rows.push_back({spec.beta_grid[b], average_reports(per_beta[b])});
  return rows;
}

inline std::string format_sweep_row(const SweepRow& row, bool percent = true) {
  const double s = percent ? 100.0 : 1.0;
  std::ostringstream os;
  os << std::setprecision(10) << row.beta << '\t' << row.report.recall * s << '\t'
     << row.report.coverage * s << '\t' << row.report.entropy << '\t' << row.report.ndcg * s;
  return os.str();
}

struct ComparisonRow {
  Backbone backbone = Backbone::MF;
  std::string variant;  // "w/o social", "Base" or "DivSR"
  EvalReport report;
};

inline constexpr const char* kComparisonHeader =
    "backbone\tvariant\trecall\tndcg\tcoverage\tentropy\tsim\tk";

// Three rows per backbone: non-social variant, social backbone, and the
// social backbone distilled from the non-social variant at spec.train.beta.
inline std::vector<ComparisonRow> compare_social(const ExperimentSpec& spec,
                                                 const ExperimentData& data,
                                                 const ProgressFn& progress = {}) {
  if (spec.repetitions == 0) throw ConfigError("repetitions must be >= 1");
  std::vector<ComparisonRow> rows;
  for (auto backbone : spec.backbones) {
    std::vector<EvalReport> plain, base, divsr;
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      const auto split = repetition_split(spec, data, r);
      auto cfg = repetition_config(spec, r);
      cfg.backbone = backbone;
      const auto teacher = train_teacher(cfg, split, &data.social).model;
      plain.push_back(evaluate_model(teacher, split, &data.social, cfg.eval_k));
      cfg.teacher_strategy = TeacherStrategy::None;
      const auto social = train_student(cfg, split, data.social, nullptr).model;
      base.push_back(evaluate_model(social, split, &data.social, cfg.eval_k));
      cfg.teacher_strategy = TeacherStrategy::SameFamily;
      const auto distilled = train_student(cfg, split, data.social, &teacher).model;
      divsr.push_back(evaluate_model(distilled, split, &data.social, cfg.eval_k));
      if (progress) {
        progress(to_string(backbone) + " repetition " + std::to_string(r + 1) + "/" +
                 std::to_string(spec.repetitions) + " done");
      }
    }
    rows.push_back({backbone, "w/o social", average_reports(plain)});
    rows.push_back({backbone, "Base", average_reports(base)});
    rows.push_back({backbone, "DivSR", average_reports(divsr)});
  }
  return rows;
}

inline std::string format_comparison_row(const ComparisonRow& row, bool percent = true) {
  return to_string(row.backbone) + '\t' + row.variant + '\t' + format_report_row(row.report, percent);
}

}  // namespace divsr
