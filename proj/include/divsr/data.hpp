#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "divsr/error.hpp"

namespace divsr {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using Rng = std::mt19937_64;

struct Edge {
  std::uint32_t source = 0;
  std::uint32_t target = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

namespace detail {

// Compressed adjacency: row r owns ids[offsets[r] .. offsets[r+1]).
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> ids;

  // `edges` must be sorted and unique.
  static Csr build(std::size_t rows, std::span<const Edge> edges) {
    Csr csr;
    csr.offsets.assign(rows + 1, 0);
    for (const auto& e : edges) ++csr.offsets[e.source + 1];
    for (std::size_t r = 0; r < rows; ++r) csr.offsets[r + 1] += csr.offsets[r];
    csr.ids.reserve(edges.size());
    for (const auto& e : edges) csr.ids.push_back(e.target);
    return csr;
  }

  std::span<const std::uint32_t> row(std::size_t r) const {
    return {ids.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  std::size_t rows() const { return offsets.size() - 1; }
};

inline void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// User-item bipartite graph with binary implicit feedback.
class InteractionGraph {
 public:
  InteractionGraph() = default;

  // Edges are (user, item). Duplicates are collapsed; out-of-range ids throw.
  static InteractionGraph from_edges(std::size_t num_users, std::size_t num_items,
                                     std::vector<Edge> edges) {
    for (const auto& e : edges) {
      if (e.source >= num_users || e.target >= num_items) {
        throw DataError("interaction (" + std::to_string(e.source) + "," +
                        std::to_string(e.target) + ") out of range");
      }
    }
    detail::sort_unique(edges);
    InteractionGraph g;
    g.num_items_ = num_items;
    g.by_user_ = detail::Csr::build(num_users, edges);
    std::vector<Edge> flipped;
    flipped.reserve(edges.size());
    for (const auto& e : edges) flipped.push_back({e.target, e.source});
    detail::sort_unique(flipped);
    g.by_item_ = detail::Csr::build(num_items, flipped);
    return g;
  }

  std::size_t num_users() const { return by_user_.rows(); }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_edges() const { return by_user_.ids.size(); }

  std::span<const ItemId> items_of(UserId u) const { return by_user_.row(u); }
  std::span<const UserId> users_of(ItemId i) const { return by_item_.row(i); }
  std::size_t degree(UserId u) const { return items_of(u).size(); }

  bool contains(UserId u, ItemId i) const {
    if (u >= num_users()) return false;
    const auto row = items_of(u);
    return std::binary_search(row.begin(), row.end(), i);
  }

  // The k-th edge in (user, item) lexicographic order.
  Edge edge_at(std::size_t k) const {
    const auto it = std::upper_bound(by_user_.offsets.begin(), by_user_.offsets.end(), k);
    const auto user = static_cast<UserId>(std::distance(by_user_.offsets.begin(), it) - 1);
    return {user, by_user_.ids[k]};
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (UserId u = 0; u < num_users(); ++u)
      for (auto i : items_of(u)) out.push_back({u, i});
    return out;
  }

 private:
  std::size_t num_items_ = 0;
  detail::Csr by_user_;
  detail::Csr by_item_;
};

// Directed trust graph; an edge (a, b) means user a trusts user b.
class SocialGraph {
 public:
  SocialGraph() = default;
  explicit SocialGraph(std::size_t num_users) { out_.offsets.assign(num_users + 1, 0); }

  // Self-loops are dropped and counted in `dropped_self_loops` when given.
  static SocialGraph from_edges(std::size_t num_users, std::vector<Edge> edges,
                                std::size_t* dropped_self_loops = nullptr) {
    std::size_t dropped = 0;
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.source >= num_users || e.target >= num_users) {
        throw DataError("social edge (" + std::to_string(e.source) + "," +
                        std::to_string(e.target) + ") references user >= " +
                        std::to_string(num_users));
      }
      if (e.source == e.target) {
        ++dropped;
        continue;
      }
      kept.push_back(e);
    }
    detail::sort_unique(kept);
    if (dropped_self_loops != nullptr) *dropped_self_loops = dropped;
    SocialGraph g;
    g.out_ = detail::Csr::build(num_users, kept);
    return g;
  }

  std::size_t num_users() const { return out_.rows(); }
  std::size_t num_edges() const { return out_.ids.size(); }
  std::span<const UserId> friends_of(UserId u) const { return out_.row(u); }
  std::size_t out_degree(UserId u) const { return friends_of(u).size(); }

  bool contains(UserId a, UserId b) const {
    if (a >= num_users()) return false;
    const auto row = friends_of(a);
    return std::binary_search(row.begin(), row.end(), b);
  }

  Edge edge_at(std::size_t k) const {
    const auto it = std::upper_bound(out_.offsets.begin(), out_.offsets.end(), k);
    const auto user = static_cast<UserId>(std::distance(out_.offsets.begin(), it) - 1);
    return {user, out_.ids[k]};
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (UserId a = 0; a < num_users(); ++a)
      for (auto b : friends_of(a)) out.push_back({a, b});
    return out;
  }

 private:
  detail::Csr out_;
};

struct DatasetSplit {
  InteractionGraph train;
  InteractionGraph test;
  std::uint64_t seed = 0;
};

struct Triplet {
  UserId user = 0;
  ItemId positive = 0;
  ItemId negative = 0;
};

struct TripletBatch {
  std::vector<Triplet> rows;
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

// Observed trust pair (label 1) or sampled non-edge (label 0).
struct TrustPair {
  UserId truster = 0;
  UserId trustee = 0;
  double label = 0.0;
};

using RawEdge = std::pair<std::uint64_t, std::uint64_t>;

// Reads "id<ws>id" lines. Blank lines are skipped; columns past the second
// (e.g. a rating) are ignored since feedback is binarized.
inline std::vector<RawEdge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<RawEdge> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto rest = detail::trim(line);
    if (rest.empty()) continue;
    std::uint64_t ids[2];
    for (int c = 0; c < 2; ++c) {
      rest = detail::trim(rest);
      const auto* first = rest.data();
      const auto* last = rest.data() + rest.size();
      auto [ptr, ec] = std::from_chars(first, last, ids[c]);
      const bool at_boundary = ptr == last || *ptr == ' ' || *ptr == '\t' || *ptr == ',';
      if (ec != std::errc{} || !at_boundary) {
        throw DataError(path + ": parse error at line " + std::to_string(line_no));
      }
      rest = rest.substr(static_cast<std::size_t>(ptr - first));
      if (!rest.empty() && rest.front() == ',') rest.remove_prefix(1);
    }
    out.emplace_back(ids[0], ids[1]);
  }
  return out;
}

namespace detail {
inline std::uint32_t checked_id(std::uint64_t v, const std::string& what) {
  if (v > 0xFFFFFFFEull) throw DataError(what + " id " + std::to_string(v) + " too large");
  return static_cast<std::uint32_t>(v);
}
}  // namespace detail

// M = 1 + max user id, N = 1 + max item id.
inline InteractionGraph load_interactions(const std::string& path) {
  const auto raw = read_edge_list(path);
  if (raw.empty()) throw DataError(path + ": no interactions");
  std::vector<Edge> edges;
  edges.reserve(raw.size());
  std::uint64_t max_user = 0, max_item = 0;
  for (const auto& [u, i] : raw) {
    edges.push_back({detail::checked_id(u, "user"), detail::checked_id(i, "item")});
    max_user = std::max(max_user, u);
    max_item = std::max(max_item, i);
  }
  return InteractionGraph::from_edges(max_user + 1, max_item + 1, std::move(edges));
}

struct SocialLoad {
  SocialGraph graph;
  std::size_t dropped_self_loops = 0;
};

inline SocialLoad load_social(const std::string& path, std::size_t num_users) {
  const auto raw = read_edge_list(path);
  std::vector<Edge> edges;
  edges.reserve(raw.size());
  for (const auto& [a, b] : raw) {
    if (a >= num_users || b >= num_users) {
      throw DataError(path + ": user id " + std::to_string(std::max(a, b)) +
                      " out of range (num_users=" + std::to_string(num_users) + ")");
    }
    edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
  }
  SocialLoad out;
  out.graph = SocialGraph::from_edges(num_users, std::move(edges), &out.dropped_self_loops);
  return out;
}

inline void write_edges(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : edges) out << e.source << ' ' << e.target << '\n';
}

inline void write_interactions(const std::string& path, const InteractionGraph& g) {
  write_edges(path, g.edges());
}

inline void write_social(const std::string& path, const SocialGraph& g) {
  write_edges(path, g.edges());
}

// Dense re-indexing of arbitrary external ids, ordered by external id.
class IdMap {
 public:
  IdMap() = default;

  static IdMap from_ids(std::vector<std::uint64_t> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    IdMap m;
    m.external_ = std::move(ids);
    return m;
  }

  std::size_t size() const { return external_.size(); }
  std::uint64_t external_of(std::uint32_t internal) const { return external_.at(internal); }

  std::uint32_t index_of(std::uint64_t external) const {
    const auto it = std::lower_bound(external_.begin(), external_.end(), external);
    if (it == external_.end() || *it != external) {
      throw DataError("unknown external id " + std::to_string(external));
    }
    return static_cast<std::uint32_t>(it - external_.begin());
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t k = 0; k < external_.size(); ++k) out << external_[k] << '\t' << k << '\n';
  }

  static IdMap load(const std::string& path) {
    const auto raw = read_edge_list(path);
    std::vector<std::uint64_t> ids(raw.size());
    for (const auto& [ext, idx] : raw) {
      if (idx >= raw.size()) throw DataError(path + ": internal index out of range");
      ids[idx] = ext;
    }
    IdMap m;
    m.external_ = std::move(ids);
    return m;
  }

 private:
  std::vector<std::uint64_t> external_;
};

// Both graphs over one dense user index. Users that appear only in the social
// file are kept with empty item lists.
struct Dataset {
  InteractionGraph interactions;
  SocialGraph social;
  IdMap users;
  IdMap items;
  std::size_t dropped_self_loops = 0;
};

inline Dataset load_dataset(const std::string& interactions_path, const std::string& social_path) {
  const auto raw_r = read_edge_list(interactions_path);
  if (raw_r.empty()) throw DataError(interactions_path + ": no interactions");
  std::vector<RawEdge> raw_s;
  if (!social_path.empty()) raw_s = read_edge_list(social_path);

  std::vector<std::uint64_t> user_ids, item_ids;
  for (const auto& [u, i] : raw_r) {
    user_ids.push_back(u);
    item_ids.push_back(i);
  }
  for (const auto& [a, b] : raw_s) {
    user_ids.push_back(a);
    user_ids.push_back(b);
  }
  Dataset ds;
  ds.users = IdMap::from_ids(std::move(user_ids));
  ds.items = IdMap::from_ids(std::move(item_ids));

  std::vector<Edge> r;
  r.reserve(raw_r.size());
  for (const auto& [u, i] : raw_r) r.push_back({ds.users.index_of(u), ds.items.index_of(i)});
  std::vector<Edge> s;
  s.reserve(raw_s.size());
  for (const auto& [a, b] : raw_s) s.push_back({ds.users.index_of(a), ds.users.index_of(b)});

  ds.interactions = InteractionGraph::from_edges(ds.users.size(), ds.items.size(), std::move(r));
  ds.social = SocialGraph::from_edges(ds.users.size(), std::move(s), &ds.dropped_self_loops);
  return ds;
}

// Per-user random holdout: floor(test_fraction * degree) items go to test.
inline DatasetSplit split_holdout(const InteractionGraph& g, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("test_fraction must lie in (0,1)");
  }
  Rng rng(seed);
  std::vector<Edge> train, test;
  train.reserve(g.num_edges());
  std::vector<ItemId> items;
  for (UserId u = 0; u < g.num_users(); ++u) {
    const auto row = g.items_of(u);
    items.assign(row.begin(), row.end());
    std::shuffle(items.begin(), items.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * items.size()));
    for (std::size_t k = 0; k < items.size(); ++k) {
      (k < n_test ? test : train).push_back({u, items[k]});
    }
  }
  DatasetSplit split;
  split.train = InteractionGraph::from_edges(g.num_users(), g.num_items(), std::move(train));
  split.test = InteractionGraph::from_edges(g.num_users(), g.num_items(), std::move(test));
  split.seed = seed;
  return split;
}

// (user, positive) uniform over training edges; negative uniform over items,
// resampled until it is not a positive of that user.
inline TripletBatch sample_triplets(const InteractionGraph& train, std::size_t batch_size,
                                    Rng& rng) {
  if (train.num_edges() == 0) throw DataError("cannot sample from an empty training graph");
  std::uniform_int_distribution<std::size_t> pick_edge(0, train.num_edges() - 1);
  std::uniform_int_distribution<ItemId> pick_item(0, static_cast<ItemId>(train.num_items() - 1));
  TripletBatch batch;
  batch.rows.reserve(batch_size);
  for (std::size_t r = 0; r < batch_size; ++r) {
    const auto e = train.edge_at(pick_edge(rng));
    if (train.degree(e.source) >= train.num_items()) {
      throw DataError("user " + std::to_string(e.source) + " has no negative items");
    }
    ItemId neg;
    do {
      neg = pick_item(rng);
    } while (train.contains(e.source, neg));
    batch.rows.push_back({e.source, e.target, neg});
  }
  return batch;
}

// `count` observed edges plus `count` sampled non-edges.
inline std::vector<TrustPair> sample_trust_pairs(const SocialGraph& social, std::size_t count,
                                                 Rng& rng) {
  std::vector<TrustPair> out;
  const auto m = social.num_users();
  if (social.num_edges() == 0 || m < 2) return out;
  out.reserve(2 * count);
  std::uniform_int_distribution<std::size_t> pick_edge(0, social.num_edges() - 1);
  std::uniform_int_distribution<UserId> pick_user(0, static_cast<UserId>(m - 1));
  for (std::size_t r = 0; r < count; ++r) {
    const auto e = social.edge_at(pick_edge(rng));
    out.push_back({e.source, e.target, 1.0});
  }
  for (std::size_t r = 0; r < count; ++r) {
    const UserId a = pick_user(rng);
    if (social.out_degree(a) + 1 >= m) continue;  // trusts everyone
    UserId b;
    do {
      b = pick_user(rng);
    } while (b == a || social.contains(a, b));
    out.push_back({a, b, 0.0});
  }
  return out;
}

}  // namespace divsr
