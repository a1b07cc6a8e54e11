#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "divsr/divsr.hpp"

namespace fs = std::filesystem;
using namespace divsr;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
};

ExperimentSpec load_spec(const Options& o) {
  ExperimentSpec spec;
  if (!o.config.empty()) apply_config_file(spec, o.config);
  for (const auto& kv : o.overrides) apply_assignment(spec, kv);
  return spec;
}

void ensure_output_dir(const ExperimentSpec& spec) {
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec || !fs::is_directory(spec.output_dir)) {
    throw ConfigError("output_dir '" + spec.output_dir + "' is not writable");
  }
}

std::string out_path(const ExperimentSpec& spec, const std::string& name) {
  return (fs::path(spec.output_dir) / name).string();
}

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError("config key '" + key + "' is required");
  if (!fs::is_regular_file(path)) throw ConfigError(key + " file '" + path + "' not found");
}

Dataset load_spec_dataset(const ExperimentSpec& spec) {
  require_file("interactions", spec.interactions_path);
  if (!spec.social_path.empty()) require_file("social", spec.social_path);
  auto ds = load_dataset(spec.interactions_path, spec.social_path);
  if (ds.dropped_self_loops > 0) {
    std::cerr << "warning: dropped " << ds.dropped_self_loops << " self-loop trust edges\n";
  }
  return ds;
}

DatasetSplit make_split(const ExperimentSpec& spec, const Dataset& ds) {
  return split_holdout(ds.interactions, spec.test_fraction, spec.split_seed);
}

class EpochLog {
 public:
  explicit EpochLog(const std::string& path) : out_(path) {
    if (!out_) throw DataError("cannot write " + path);
    out_ << kEpochLogHeader << '\n';
  }
  EpochObserver observer() {
    return [this](const EpochRecord& r) {
      out_ << format_epoch_record(r) << '\n';
      out_.flush();
    };
  }

 private:
  std::ofstream out_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void report_training(const TrainResult& r, const std::string& ckpt) {
  std::cout << "best_epoch=" << r.best_epoch << "\nbest_val_recall=" << r.best_val_recall
            << "\ncheckpoint=" << ckpt << "\ndigest=" << digest(r.model) << '\n';
}

int cmd_train_teacher(const Options& o) {
  auto spec = load_spec(o);
  ensure_output_dir(spec);
  const auto ds = load_spec_dataset(spec);
  const auto split = make_split(spec, ds);
  EpochLog log(out_path(spec, "teacher_log.tsv"));
  const auto result = train_teacher(spec.train, split, &ds.social, log.observer());
  const auto ckpt = out_path(spec, "teacher.ckpt");
  save_checkpoint(ckpt, result.model);
  ds.users.save(out_path(spec, "user_ids.tsv"));
  ds.items.save(out_path(spec, "item_ids.tsv"));
  report_training(result, ckpt);
  return 0;
}

int cmd_train_student(const Options& o) {
  auto spec = load_spec(o);
  ensure_output_dir(spec);
  const auto ds = load_spec_dataset(spec);
  const auto split = make_split(spec, ds);

  std::optional<EmbeddingModel> teacher;
  std::string teacher_digest;
  const bool needs_teacher = spec.train.teacher_strategy == TeacherStrategy::SameFamily ||
                             spec.train.teacher_strategy == TeacherStrategy::CrossModel;
  if (needs_teacher) {
    require_file("teacher", spec.teacher_path);
    const auto bytes = read_file_bytes(spec.teacher_path);
    teacher_digest = digest(bytes);
    teacher = deserialize(bytes);
  }
  EpochLog log(out_path(spec, "student_log.tsv"));
  const auto result = train_student(spec.train, split, ds.social, teacher ? &*teacher : nullptr,
                                    log.observer());
  if (needs_teacher) {
    const auto after = digest(read_file_bytes(spec.teacher_path));
    if (after != teacher_digest) throw TrainingError("teacher checkpoint changed during training");
    std::cout << "teacher_digest=" << teacher_digest << '\n';
  }
  const auto ckpt = out_path(spec, "student.ckpt");
  save_checkpoint(ckpt, result.model);
  report_training(result, ckpt);
  return 0;
}

EmbeddingModel load_spec_checkpoint(const ExperimentSpec& spec) {
  require_file("checkpoint", spec.checkpoint_path);
  return load_checkpoint(spec.checkpoint_path);
}

void check_catalog(const EmbeddingModel& m, const Dataset& ds) {
  if (m.num_users() != ds.interactions.num_users() || m.num_items() != ds.interactions.num_items()) {
    throw ConfigError("checkpoint shape " + std::to_string(m.num_users()) + "x" +
                      std::to_string(m.num_items()) + " does not match dataset " +
                      std::to_string(ds.interactions.num_users()) + "x" +
                      std::to_string(ds.interactions.num_items()));
  }
}

void print_report(const EvalReport& r) {
  std::cout << kReportHeader << '\n' << format_report_row(r, true) << '\n';
}

int cmd_evaluate(const Options& o) {
  auto spec = load_spec(o);
  const auto model = load_spec_checkpoint(spec);
  const auto ds = load_spec_dataset(spec);
  check_catalog(model, ds);
  const auto split = make_split(spec, ds);
  const auto report = evaluate_model(model, split, &ds.social, spec.train.eval_k);
  ensure_output_dir(spec);
  write_text(out_path(spec, "report.kv"), format_report_kv(report));
  print_report(report);
  return 0;
}

int cmd_rerank(const Options& o) {
  auto spec = load_spec(o);
  const auto model = load_spec_checkpoint(spec);
  const auto ds = load_spec_dataset(spec);
  check_catalog(model, ds);
  const auto split = make_split(spec, ds);
  if (spec.rerank.pool_factor < 1) throw ConfigError("pool_factor must be >= 1");
  const auto k = spec.train.eval_k;
  const auto fo = forward(model, split.train, model.social_enabled ? &ds.social : nullptr);

  RankedLists lists;
  lists.k = k;
  lists.lists.resize(fo.users.rows());
  for (UserId a = 0; a < lists.lists.size(); ++a) {
    if (split.test.degree(a) == 0) continue;
    const auto cands = build_candidates(fo, a, split.train.items_of(a), spec.rerank.pool_factor * k);
    const auto take = std::min(k, cands.size());
    lists.lists[a] = spec.rerank.method == RerankMethod::MMR
                         ? mmr_rerank(cands, take, spec.rerank.trade_off)
                         : dpp_rerank(cands, take, spec.rerank.theta);
  }
  EvalReport r;
  r.k = k;
  r.recall = recall_at_k(lists, split.test);
  r.ndcg = ndcg_at_k(lists, split.test);
  r.coverage = coverage_at_k(lists, split.test.num_items());
  r.entropy = entropy_at_k(lists);
  if (auto s = user_friend_similarity(fo, ds.social)) r.sim = *s;
  ensure_output_dir(spec);
  write_text(out_path(spec, "rerank_" + to_string(spec.rerank.method) + ".kv"), format_report_kv(r));
  print_report(r);
  return 0;
}

ExperimentData experiment_data(const ExperimentSpec& spec) {
  const auto ds = load_spec_dataset(spec);
  return {ds.interactions, ds.social};
}

void progress(const std::string& msg) { std::cerr << msg << '\n'; }

int cmd_sweep_beta(const Options& o) {
  auto spec = load_spec(o);
  ensure_output_dir(spec);
  const auto rows = sweep_beta(spec, experiment_data(spec), progress);
  std::ofstream table(out_path(spec, "sweep_beta.tsv"));
  table << kSweepHeader << '\n';
  std::cout << kSweepHeader << '\n';
  for (const auto& row : rows) {
    table << format_sweep_row(row) << '\n';
    std::cout << format_sweep_row(row) << '\n';
  }
  return 0;
}

int cmd_compare_social(const Options& o) {
  auto spec = load_spec(o);
  ensure_output_dir(spec);
  const auto rows = compare_social(spec, experiment_data(spec), progress);
  std::ofstream table(out_path(spec, "compare_social.tsv"));
  table << kComparisonHeader << '\n';
  std::cout << kComparisonHeader << '\n';
  for (const auto& row : rows) {
    table << format_comparison_row(row) << '\n';
    std::cout << format_comparison_row(row) << '\n';
  }
  return 0;
}

int cmd_gen_synth(const Options& o) {
  auto spec = load_spec(o);
  ensure_output_dir(spec);
  const auto data = generate_synthetic(spec.synth);
  const auto ri = out_path(spec, "interactions.txt");
  const auto rs = out_path(spec, "social.txt");
  write_interactions(ri, data.interactions);
  write_social(rs, data.social);
  std::cout << "interactions=" << ri << "\nsocial=" << rs << "\nusers=" << data.interactions.num_users()
            << "\nitems=" << data.interactions.num_items()
            << "\ninteraction_edges=" << data.interactions.num_edges()
            << "\nsocial_edges=" << data.social.num_edges() << '\n';
  return 0;
}

int cmd_dump_embeddings(const Options& o, const std::string& output) {
  auto spec = load_spec(o);
  const auto model = load_spec_checkpoint(spec);
  const auto ds = load_spec_dataset(spec);
  check_catalog(model, ds);
  const auto split = make_split(spec, ds);
  const auto fo = forward(model, split.train, model.social_enabled ? &ds.social : nullptr);
  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) throw DataError("cannot write " + output);
  }
  std::ostream& out = output.empty() ? std::cout : file;
  out << std::setprecision(8);
  for (Eigen::Index a = 0; a < fo.users.rows(); ++a) {
    out << ds.users.external_of(static_cast<std::uint32_t>(a)) << '\t';
    for (Eigen::Index c = 0; c < fo.users.cols(); ++c) out << (c ? "," : "") << fo.users(a, c);
    out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diversity-aware social recommendation toolkit"};
  app.require_subcommand(1);

  Options opts;
  std::string dump_output;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config, "key=value config file");
    sub->add_option("-s,--set", opts.overrides, "override a config key (key=value)");
    return sub;
  };
  auto* teacher = add_common(app.add_subcommand("train-teacher", "train the non-social teacher"));
  auto* student = add_common(app.add_subcommand("train-student", "train a social student"));
  auto* evaluate = add_common(app.add_subcommand("evaluate", "evaluate a checkpoint on the test split"));
  auto* rerank = add_common(app.add_subcommand("rerank", "re-rank a checkpoint's candidates with MMR or DPP"));
  auto* sweep = add_common(app.add_subcommand("sweep-beta", "sweep the distillation weight"));
  auto* compare = add_common(app.add_subcommand("compare-social", "w/o social vs Base vs DivSR"));
  auto* synth = add_common(app.add_subcommand("gen-synth", "write a synthetic community dataset"));
  auto* dump = add_common(app.add_subcommand("dump-embeddings", "write user_id<TAB>v1,...,vd lines"));
  dump->add_option("-o,--output", dump_output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (teacher->parsed()) return cmd_train_teacher(opts);
    if (student->parsed()) return cmd_train_student(opts);
    if (evaluate->parsed()) return cmd_evaluate(opts);
    if (rerank->parsed()) return cmd_rerank(opts);
    if (sweep->parsed()) return cmd_sweep_beta(opts);
    if (compare->parsed()) return cmd_compare_social(opts);
    if (synth->parsed()) return cmd_gen_synth(opts);
    if (dump->parsed()) return cmd_dump_embeddings(opts, dump_output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
