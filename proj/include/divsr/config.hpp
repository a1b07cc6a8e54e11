#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "divsr/error.hpp"
#include "divsr/model.hpp"
#include "divsr/synthetic.hpp"
#include "divsr/trainer.hpp"

namespace divsr {

enum class RerankMethod { MMR, DPP };

inline RerankMethod parse_rerank_method(const std::string& s) {
  if (s == "mmr" || s == "MMR") return RerankMethod::MMR;
  if (s == "dpp" || s == "DPP") return RerankMethod::DPP;
  throw ConfigError("unknown rerank method '" + s + "'");
}

inline std::string to_string(RerankMethod m) { return m == RerankMethod::MMR ? "mmr" : "dpp"; }

struct RerankConfig {
  RerankMethod method = RerankMethod::MMR;
  double trade_off = 0.5;  // MMR
  double theta = 0.5;      // DPP
  std::size_t pool_factor = 5;
};

struct ExperimentSpec {
  std::string interactions_path;
  std::string social_path;
  std::string output_dir = "out";
  std::string teacher_path;
  std::string checkpoint_path;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  TrainConfig train;
  std::vector<double> beta_grid{2.0, 1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001, 5e-4, 1e-4};
  std::size_t repetitions = 5;
  std::vector<Backbone> backbones{Backbone::SocialMF, Backbone::DiffNet};
  RerankConfig rerank;
  SyntheticSpec synth;
};

namespace detail {

inline std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("invalid value '" + value + "' for config key '" + key + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid value '" + value + "' for config key '" + key + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    auto t = trim_copy(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

using Setter = std::function<void(ExperimentSpec&, const std::string& key, const std::string& value)>;

template <typename T, typename Field>
Setter number(Field field) {
  return [field](ExperimentSpec& s, const std::string& k, const std::string& v) {
    field(s) = parse_number<T>(k, v);
  };
}

template <typename Field>
Setter text(Field field) {
  return [field](ExperimentSpec& s, const std::string&, const std::string& v) { field(s) = v; };
}

inline const std::map<std::string, Setter>& setters() {
  using S = ExperimentSpec;
  static const std::map<std::string, Setter> table{
      {"interactions", text([](S& s) -> auto& { return s.interactions_path; })},
      {"social", text([](S& s) -> auto& { return s.social_path; })},
      {"output_dir", text([](S& s) -> auto& { return s.output_dir; })},
      {"teacher", text([](S& s) -> auto& { return s.teacher_path; })},
      {"checkpoint", text([](S& s) -> auto& { return s.checkpoint_path; })},
      {"test_fraction", number<double>([](S& s) -> auto& { return s.test_fraction; })},
      {"split_seed", number<std::uint64_t>([](S& s) -> auto& { return s.split_seed; })},
      {"repetitions", number<std::size_t>([](S& s) -> auto& { return s.repetitions; })},
      {"beta_grid",
       [](S& s, const std::string& k, const std::string& v) {
         s.beta_grid.clear();
         for (const auto& b : split_list(v)) s.beta_grid.push_back(parse_number<double>(k, b));
       }},
      {"backbones",
       [](S& s, const std::string& k, const std::string& v) {
         s.backbones.clear();
         for (const auto& b : split_list(v)) {
           try {
             s.backbones.push_back(parse_backbone(b));
           } catch (const ConfigError&) {
             throw ConfigError("invalid value '" + b + "' for config key '" + k + "'");
           }
         }
       }},

      {"backbone",
       [](S& s, const std::string& k, const std::string& v) {
         try {
           s.train.backbone = parse_backbone(v);
         } catch (const ConfigError&) {
           throw ConfigError("invalid value '" + v + "' for config key '" + k + "'");
         }
       }},
      {"teacher_strategy",
       [](S& s, const std::string& k, const std::string& v) {
         try {
           s.train.teacher_strategy = parse_teacher_strategy(v);
         } catch (const ConfigError&) {
           throw ConfigError("invalid value '" + v + "' for config key '" + k + "'");
         }
       }},
      {"social_enabled",
       [](S& s, const std::string& k, const std::string& v) { s.train.social_enabled = parse_bool(k, v); }},
      {"dim", number<std::size_t>([](S& s) -> auto& { return s.train.dim; })},
      {"num_layers", number<std::size_t>([](S& s) -> auto& { return s.train.num_layers; })},
      {"learning_rate", number<double>([](S& s) -> auto& { return s.train.learning_rate; })},
      {"batch_size", number<std::size_t>([](S& s) -> auto& { return s.train.batch_size; })},
      {"l2_lambda", number<double>([](S& s) -> auto& { return s.train.l2_lambda; })},
      {"beta", number<double>([](S& s) -> auto& { return s.train.beta; })},
      {"social_reg_weight", number<double>([](S& s) -> auto& { return s.train.social_reg_weight; })},
      {"trust_loss_weight", number<double>([](S& s) -> auto& { return s.train.trust_loss_weight; })},
      {"epochs", number<std::size_t>([](S& s) -> auto& { return s.train.epochs; })},
      {"early_stop_patience", number<std::size_t>([](S& s) -> auto& { return s.train.early_stop_patience; })},
      {"seed", number<std::uint64_t>([](S& s) -> auto& { return s.train.seed; })},
      {"eval_k", number<std::size_t>([](S& s) -> auto& { return s.train.eval_k; })},
      {"validation_fraction", number<double>([](S& s) -> auto& { return s.train.validation_fraction; })},

      {"rerank_method",
       [](S& s, const std::string& k, const std::string& v) {
         try {
           s.rerank.method = parse_rerank_method(v);
         } catch (const ConfigError&) {
           throw ConfigError("invalid value '" + v + "' for config key '" + k + "'");
         }
       }},
      {"trade_off", number<double>([](S& s) -> auto& { return s.rerank.trade_off; })},
      {"theta", number<double>([](S& s) -> auto& { return s.rerank.theta; })},
      {"pool_factor", number<std::size_t>([](S& s) -> auto& { return s.rerank.pool_factor; })},

      {"synth.num_users", number<std::size_t>([](S& s) -> auto& { return s.synth.num_users; })},
      {"synth.num_items", number<std::size_t>([](S& s) -> auto& { return s.synth.num_items; })},
      {"synth.communities", number<std::size_t>([](S& s) -> auto& { return s.synth.communities; })},
      {"synth.p_in", number<double>([](S& s) -> auto& { return s.synth.p_in; })},
      {"synth.p_out", number<double>([](S& s) -> auto& { return s.synth.p_out; })},
      {"synth.homophily", number<double>([](S& s) -> auto& { return s.synth.homophily; })},
      {"synth.mean_friends", number<double>([](S& s) -> auto& { return s.synth.mean_friends; })},
      {"synth.popularity_exponent", number<double>([](S& s) -> auto& { return s.synth.popularity_exponent; })},
      {"synth.topics", number<std::size_t>([](S& s) -> auto& { return s.synth.topics; })},
      {"synth.topic_boost", number<double>([](S& s) -> auto& { return s.synth.topic_boost; })},
      {"synth.topic_homophily", number<double>([](S& s) -> auto& { return s.synth.topic_homophily; })},
      {"synth.seed", number<std::uint64_t>([](S& s) -> auto& { return s.synth.seed; })},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(spec, key, value);
}

// "key=value" with optional surrounding whitespace.
inline void apply_assignment(ExperimentSpec& spec, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  apply_setting(spec, detail::trim_copy(std::string_view(assignment).substr(0, eq)),
                detail::trim_copy(std::string_view(assignment).substr(eq + 1)));
}

// One assignment per line; '#' starts a comment.
inline void apply_config_text(ExperimentSpec& spec, const std::string& text,
                              const std::string& source = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    try {
      apply_assignment(spec, line);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(ExperimentSpec& spec, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(spec, buf.str(), path);
}

inline std::string format_config(const ExperimentSpec& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto list = [&](const auto& xs, auto fmt) {
    for (std::size_t k = 0; k < xs.size(); ++k) os << (k ? "," : "") << fmt(xs[k]);
  };
  os << "interactions=" << s.interactions_path << "\nsocial=" << s.social_path
     << "\noutput_dir=" << s.output_dir << "\nteacher=" << s.teacher_path
     << "\ncheckpoint=" << s.checkpoint_path << "\ntest_fraction=" << s.test_fraction
     << "\nsplit_seed=" << s.split_seed << "\nrepetitions=" << s.repetitions << "\nbeta_grid=";
  list(s.beta_grid, [](double b) { return b; });
  os << "\nbackbones=";
  list(s.backbones, [](Backbone b) { return to_string(b); });
  const auto& t = s.train;
  os << "\nbackbone=" << to_string(t.backbone) << "\nteacher_strategy=" << to_string(t.teacher_strategy)
     << "\nsocial_enabled=" << (t.social_enabled ? "true" : "false") << "\ndim=" << t.dim
     << "\nnum_layers=" << t.num_layers << "\nlearning_rate=" << t.learning_rate
     << "\nbatch_size=" << t.batch_size << "\nl2_lambda=" << t.l2_lambda << "\nbeta=" << t.beta
     << "\nsocial_reg_weight=" << t.social_reg_weight << "\ntrust_loss_weight=" << t.trust_loss_weight
     << "\nepochs=" << t.epochs << "\nearly_stop_patience=" << t.early_stop_patience
     << "\nseed=" << t.seed << "\neval_k=" << t.eval_k << "\nvalidation_fraction=" << t.validation_fraction
     << "\nrerank_method=" << to_string(s.rerank.method) << "\ntrade_off=" << s.rerank.trade_off
     << "\ntheta=" << s.rerank.theta << "\npool_factor=" << s.rerank.pool_factor;
  const auto& y = s.synth;
  os << "\nsynth.num_users=" << y.num_users << "\nsynth.num_items=" << y.num_items
     << "\nsynth.communities=" << y.communities << "\nsynth.p_in=" << y.p_in << "\nsynth.p_out=" << y.p_out
     << "\nsynth.homophily=" << y.homophily << "\nsynth.mean_friends=" << y.mean_friends
     << "\nsynth.popularity_exponent=" << y.popularity_exponent << "\nsynth.topics=" << y.topics
     << "\nsynth.topic_boost=" << y.topic_boost << "\nsynth.topic_homophily=" << y.topic_homophily
     << "\nsynth.seed=" << y.seed << '\n';
  return os.str();
}

}  // namespace divsr
