#pragma once

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "divsr/data.hpp"
#include "divsr/error.hpp"
#include "divsr/losses.hpp"
#include "divsr/model.hpp"

namespace divsr {

// One top-k list per user (possibly empty).
struct RankedLists {
  std::vector<std::vector<ItemId>> lists;
  std::size_t k = 0;
};

namespace detail {

template <typename PerUser>
double mean_over_test_users(const RankedLists& lists, const InteractionGraph& test,
                            PerUser&& per_user) {
  double sum = 0.0;
  std::size_t users = 0;
  for (UserId a = 0; a < test.num_users(); ++a) {
    const auto truth = test.items_of(a);
    if (truth.empty()) continue;
    if (a >= lists.lists.size()) throw DataError("no ranked list for test user " + std::to_string(a));
    sum += per_user(lists.lists[a], truth);
    ++users;
  }
  if (users == 0) throw DataError("empty test set");
  return sum / static_cast<double>(users);
}

inline bool sorted_contains(std::span<const ItemId> sorted, ItemId i) {
  return std::binary_search(sorted.begin(), sorted.end(), i);
}

}  // namespace detail

inline double recall_at_k(const RankedLists& lists, const InteractionGraph& test) {
  return detail::mean_over_test_users(lists, test, [](const auto& list, auto truth) {
    std::size_t hits = 0;
    for (auto i : list)
      if (detail::sorted_contains(truth, i)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
  });
}

// Binary relevance; ideal DCG over min(k, |test_a|) positions.
inline double ndcg_at_k(const RankedLists& lists, const InteractionGraph& test) {
  return detail::mean_over_test_users(lists, test, [&](const auto& list, auto truth) {
    double dcg = 0.0;
    for (std::size_t r = 0; r < list.size(); ++r)
      if (detail::sorted_contains(truth, list[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0.0;
    const auto ideal = std::min(lists.k, truth.size());
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
  });
}

// Fraction of the full catalog that appears in at least one list.
inline double coverage_at_k(const RankedLists& lists, std::size_t num_items) {
  if (num_items == 0) throw DataError("coverage needs a non-empty catalog");
  std::vector<char> seen(num_items, 0);
  std::size_t distinct = 0;
  for (const auto& list : lists.lists)
    for (auto i : list)
      if (!seen[i]) {
        seen[i] = 1;
        ++distinct;
      }
  return static_cast<double>(distinct) / static_cast<double>(num_items);
}

// Base-2 Shannon entropy of item exposure counts across all lists.
inline double entropy_at_k(const RankedLists& lists) {
  std::map<ItemId, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& list : lists.lists)
    for (auto i : list) {
      ++counts[i];
      ++total;
    }
  if (total == 0) throw DataError("entropy of empty recommendation lists");
  double h = 0.0;
  for (const auto& [item, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

// Mean over users with friends of (cos(p_a, p_af) + 1) / 2. Empty when no user
// has friends.
inline std::optional<double> user_friend_similarity(const ForwardOutput& fo,
                                                    const SocialGraph& social) {
  const auto fm = friend_mean(fo.users, social);
  if (fm.num_active == 0) return std::nullopt;
  double sum = 0.0;
  for (Eigen::Index a = 0; a < fo.users.rows(); ++a) {
    if (!fm.active[static_cast<std::size_t>(a)]) continue;
    sum += (angle_potential(fo.users.row(a), fm.mean.row(a)).value + 1.0) / 2.0;
  }
  return sum / static_cast<double>(fm.num_active);
}

// Top-k lists for every user that has at least one item in `targets`
// (every user when `targets` is null), excluding the user's items in
// `exclude`.
inline RankedLists rank_users(const ForwardOutput& fo, const InteractionGraph& exclude,
                              std::size_t k, const InteractionGraph* targets = nullptr) {
  RankedLists out;
  out.k = k;
  out.lists.resize(static_cast<std::size_t>(fo.users.rows()));
  for (UserId a = 0; a < out.lists.size(); ++a) {
    if (targets != nullptr && targets->degree(a) == 0) continue;
    const auto scores = score_all_items(fo, a, a < exclude.num_users() ? exclude.items_of(a)
                                                                      : std::span<const ItemId>{});
    out.lists[a] = topk(scores, k);
  }
  return out;
}

struct EvalReport {
  double recall = 0.0;
  double ndcg = 0.0;
  double coverage = 0.0;
  double entropy = 0.0;
  std::size_t k = 0;
  double sim = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
};

// Lists are produced only for test users; coverage and entropy are computed
// over those same lists.
inline EvalReport evaluate(const ForwardOutput& fo, const InteractionGraph& train,
                           const InteractionGraph& test, std::size_t k,
                           const SocialGraph* social = nullptr) {
  const auto lists = rank_users(fo, train, k, &test);
  EvalReport r;
  r.k = k;
  r.recall = recall_at_k(lists, test);
  r.ndcg = ndcg_at_k(lists, test);
  r.coverage = coverage_at_k(lists, test.num_items());
  r.entropy = entropy_at_k(lists);
  if (social != nullptr) {
    if (auto s = user_friend_similarity(fo, *social)) r.sim = *s;
  }
  return r;
}

inline constexpr const char* kReportHeader = "recall\tndcg\tcoverage\tentropy\tsim\tk";

// Tab-separated record matching kReportHeader. `percent` scales recall, ndcg
// and coverage by 100.
inline std::string format_report_row(const EvalReport& r, bool percent = false) {
  const double s = percent ? 100.0 : 1.0;
  std::ostringstream os;
  os << std::setprecision(10) << r.recall * s << '\t' << r.ndcg * s << '\t' << r.coverage * s
     << '\t' << r.entropy << '\t' << r.sim << '\t' << r.k;
  return os.str();
}

// "key=value" lines, values unscaled.
inline std::string format_report_kv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "recall=" << r.recall << "\nndcg=" << r.ndcg
     << "\ncoverage=" << r.coverage << "\nentropy=" << r.entropy << "\nsim=" << r.sim
     << "\nk=" << r.k << '\n';
  return os.str();
}

inline EvalReport parse_report_kv(const std::string& text) {
  EvalReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "recall") r.recall = std::stod(value);
    else if (key == "ndcg") r.ndcg = std::stod(value);
    else if (key == "coverage") r.coverage = std::stod(value);
    else if (key == "entropy") r.entropy = std::stod(value);
    else if (key == "sim") r.sim = std::stod(value);
    else if (key == "k") r.k = std::stoul(value);
    else throw DataError("unknown report key '" + key + "'");
  }
  return r;
}

}  // namespace divsr
