#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "divsr/data.hpp"
#include "divsr/error.hpp"

namespace divsr {

// Planted-partition generator. Users and items are split into balanced
// communities; user a interacts with item i with probability
// min(1, p * w_i), p = p_in inside a's community and p_out across, where w_i
// is a Zipf popularity weight normalized to mean 1 within each community.
// Each user trusts Poisson(mean_friends) others, a `homophily` fraction of
// them drawn from the same community.
struct SyntheticSpec {
  std::size_t num_users = 300;
  std::size_t num_items = 500;
  std::size_t communities = 5;
  double p_in = 0.08;
  double p_out = 0.01;
  double homophily = 0.9;
  double mean_friends = 8.0;
  double popularity_exponent = 0.8;
  std::size_t topics = 4;          // sub-communities per community
  double topic_boost = 4.0;        // in-community multiplier for the user's own topic
  double topic_homophily = 0.5;    // chance an intra-community friend shares the topic
  std::uint64_t seed = 0;
};

struct SyntheticData {
  InteractionGraph interactions;
  SocialGraph social;
  std::vector<std::uint32_t> user_community;
  std::vector<std::uint32_t> item_community;
  std::vector<std::uint32_t> user_topic;
  std::vector<std::uint32_t> item_topic;
};

namespace detail {

inline std::vector<std::uint32_t> balanced_labels(std::size_t n, std::size_t communities, Rng& rng) {
  std::vector<std::uint32_t> labels(n);
  for (std::size_t k = 0; k < n; ++k) labels[k] = static_cast<std::uint32_t>(k % communities);
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.communities < 2) throw ConfigError("synthetic data needs at least 2 communities");
  if (spec.num_users < spec.communities || spec.num_items < spec.communities) {
    throw ConfigError("synthetic data needs at least one user and item per community");
  }
  if (!(spec.homophily >= 0 && spec.homophily <= 1)) throw ConfigError("homophily must lie in [0,1]");
  Rng rng(spec.seed);
  SyntheticData out;
  out.user_community = detail::balanced_labels(spec.num_users, spec.communities, rng);
  out.item_community = detail::balanced_labels(spec.num_items, spec.communities, rng);

  const std::size_t topics = std::max<std::size_t>(1, spec.topics);
  std::uniform_int_distribution<std::uint32_t> pick_topic(0, static_cast<std::uint32_t>(topics - 1));
  out.user_topic.resize(spec.num_users);
  out.item_topic.resize(spec.num_items);
  for (auto& t : out.user_topic) t = pick_topic(rng);
  for (auto& t : out.item_topic) t = pick_topic(rng);

  std::vector<std::vector<ItemId>> members(spec.communities);
  for (ItemId i = 0; i < spec.num_items; ++i) members[out.item_community[i]].push_back(i);
  std::vector<std::vector<UserId>> user_members(spec.communities);
  for (UserId a = 0; a < spec.num_users; ++a) user_members[out.user_community[a]].push_back(a);

  // Popularity ranks are random within each community.
  std::vector<double> weight(spec.num_items, 1.0);
  for (auto& group : members) {
    std::vector<ItemId> order = group;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      weight[order[r]] = std::pow(static_cast<double>(r + 1), -spec.popularity_exponent);
      total += weight[order[r]];
    }
    const double scale = static_cast<double>(order.size()) / total;
    for (auto i : order) weight[i] *= scale;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> interactions;
  for (UserId a = 0; a < spec.num_users; ++a) {
    const auto c = out.user_community[a];
    std::size_t degree = 0;
    for (ItemId i = 0; i < spec.num_items; ++i) {
      double p = spec.p_out * weight[i];
      if (out.item_community[i] == c) {
        p = spec.p_in * weight[i];
        if (out.item_topic[i] == out.user_topic[a]) p *= spec.topic_boost;
      }
      if (unit(rng) < std::min(1.0, p)) {
        interactions.push_back({a, i});
        ++degree;
      }
    }
    if (degree == 0) {
      const auto& group = members[c];
      std::vector<double> w;
      for (auto i : group) w.push_back(weight[i]);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      interactions.push_back({a, group[pick(rng)]});
    }
  }

  std::poisson_distribution<std::size_t> friends(spec.mean_friends);
  std::vector<Edge> social;
  for (UserId a = 0; a < spec.num_users; ++a) {
    const auto c = out.user_community[a];
    const auto& same = user_members[c];
    const auto want = friends(rng);
    for (std::size_t f = 0; f < want; ++f) {
      UserId b;
      if (unit(rng) < spec.homophily && same.size() > 1) {
        const bool same_topic = unit(rng) < spec.topic_homophily;
        std::uniform_int_distribution<std::size_t> pick(0, same.size() - 1);
        std::size_t tries = 0;
        do {
          b = same[pick(rng)];
        } while (b == a || (same_topic && out.user_topic[b] != out.user_topic[a] && ++tries < 1000));
      } else {
        std::uniform_int_distribution<UserId> pick(0, static_cast<UserId>(spec.num_users - 1));
        do {
          b = pick(rng);
        } while (out.user_community[b] == c);
      }
      social.push_back({a, b});
    }
  }

  out.interactions = InteractionGraph::from_edges(spec.num_users, spec.num_items, std::move(interactions));
  out.social = SocialGraph::from_edges(spec.num_users, std::move(social));
  return out;
}

}  // namespace divsr
