#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace divsr;

namespace {

CandidateSet make_cands(std::vector<ItemId> items, std::vector<double> rel,
                        std::initializer_list<std::initializer_list<double>> vecs) {
  CandidateSet c;
  c.items = std::move(items);
  c.relevance = std::move(rel);
  c.item_vectors.resize(static_cast<Eigen::Index>(vecs.size()),
                        static_cast<Eigen::Index>(vecs.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : vecs) {
    Eigen::Index col = 0;
    for (double v : row) c.item_vectors(r, col++) = v;
    ++r;
  }
  return c;
}

CandidateSet random_cands(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CandidateSet c;
  c.item_vectors.resize(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index k = 0; k < c.item_vectors.size(); ++k) c.item_vectors.data()[k] = g(rng);
  for (std::size_t i = 0; i < n; ++i) {
    c.items.push_back(static_cast<ItemId>(10 + 3 * i));
    c.relevance.push_back(u(rng));
  }
  return c;
}

std::vector<ItemId> by_relevance(const CandidateSet& c, std::size_t k) {
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return c.relevance[a] != c.relevance[b] ? c.relevance[a] > c.relevance[b] : c.items[a] < c.items[b];
  });
  std::vector<ItemId> out;
  for (std::size_t p = 0; p < k; ++p) out.push_back(c.items[idx[p]]);
  return out;
}

}  // namespace

TEST(Mmr, TradeOffOneIsRelevanceOrder) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto c = random_cands(rng, 8);
    EXPECT_EQ(mmr_rerank(c, 5, 1.0), by_relevance(c, 5));
  }
}

TEST(Mmr, AvoidsDuplicateVector) {
  const auto c = make_cands({0, 1, 2}, {1.0, 0.5, 0.5}, {{1, 0}, {1, 0}, {0, 1}});
  EXPECT_EQ(mmr_rerank(c, 2, 0.5), (std::vector<ItemId>{0, 2}));
}

TEST(Mmr, HandTrace) {
  // sim((1,0),(0,1)) = 0.5, sim((1,0),(-1,0)) = 0, sim((1,0),(1,1)) = (1+0.7071)/2.
  const auto c = make_cands({5, 6, 7, 8, 9}, {0.9, 0.8, 0.7, 0.6, 0.1},
                            {{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {0, -1}});
  // Step 1: item 5. Step 2 scores 0.5*rel - 0.5*sim(.,5):
  //   6: 0.4 - 0.4268 = -0.0268, 7: 0.35 - 0.25 = 0.1, 8: 0.3 - 0 = 0.3, 9: 0.05 - 0.25 = -0.2.
  // Step 3, max over {5, 8}: 6: 0.4 - 0.4268 = -0.0268, 7: 0.35 - 0.25 = 0.1, 9: 0.05 - 0.25 = -0.2.
  EXPECT_EQ(mmr_rerank(c, 3, 0.5), (std::vector<ItemId>{5, 8, 7}));
}

TEST(Mmr, TiesByAscendingId) {
  const auto c = make_cands({9, 4, 7}, {0.5, 0.5, 0.5}, {{1, 0}, {1, 0}, {1, 0}});
  EXPECT_EQ(mmr_rerank(c, 3, 0.5), (std::vector<ItemId>{4, 7, 9}));
}

TEST(Rerank, ErrorsAndShape) {
  std::mt19937_64 rng(3);
  const auto c = random_cands(rng, 4);
  EXPECT_THROW(mmr_rerank(c, 5, 0.5), DataError);
  EXPECT_THROW(dpp_rerank(c, 5, 0.5), DataError);
  for (int t = 0; t < 30; ++t) {
    const auto d = random_cands(rng, 9);
    for (const auto& out : {mmr_rerank(d, 6, 0.3), dpp_rerank(d, 6, 0.4)}) {
      EXPECT_EQ(out.size(), 6u);
      EXPECT_EQ(std::set<ItemId>(out.begin(), out.end()).size(), 6u);
      for (auto i : out) EXPECT_NE(std::find(d.items.begin(), d.items.end(), i), d.items.end());
    }
    EXPECT_EQ(dpp_rerank(d, 6, 0.4), dpp_rerank(d, 6, 0.4));
  }
}

TEST(Dpp, SingleItemIsHighestRelevance) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto c = random_cands(rng, 7);
    EXPECT_EQ(dpp_rerank(c, 1, 0.6), by_relevance(c, 1));
  }
}

TEST(Dpp, PairMaximizesDeterminant) {
  // Near-duplicate leader: the best pair swaps the runner-up for the orthogonal item.
  const std::vector<CandidateSet> cases{
      make_cands({0, 1, 2}, {1.0, 0.9, 0.2}, {{1, 0}, {1, 0.05}, {0, 1}}),
      make_cands({4, 7, 9}, {0.5, 0.5, 0.5}, {{1, 0}, {1, 0.1}, {0, 1}}),
      make_cands({2, 5, 6}, {0.1, 0.8, 0.6}, {{1, 1}, {1, -1}, {1, -0.9}})};
  for (const auto& c : cases) {
    const auto kernel = build_dpp_kernel(c, 0.5);
    double best = -1e300;
    std::vector<ItemId> best_pair;
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        const double det = kernel(a, a) * kernel(b, b) - kernel(a, b) * kernel(b, a);
        if (det > best) {
          best = det;
          best_pair = {c.items[a], c.items[b]};
        }
      }
    auto got = dpp_rerank(c, 2, 0.5);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, best_pair);
  }
}

TEST(Dpp, IdenticalVectorsFallBackToRelevance) {
  const auto c = make_cands({3, 1, 2, 0}, {0.2, 0.9, 0.5, 0.7}, {{1, 1}, {1, 1}, {1, 1}, {1, 1}});
  EXPECT_EQ(dpp_rerank(c, 4, 0.5), (std::vector<ItemId>{1, 0, 2, 3}));
  EXPECT_EQ(greedy_map(build_dpp_kernel(c, 0.5), 4).size(), 1u);
}

TEST(Dpp, GreedyWithinSubmodularBound) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<std::size_t> pick_c(3, 10), pick_k(1, 3);
    const auto n = pick_c(rng);
    const auto k = pick_k(rng);
    const auto kernel = fixtures::random_positive_dpp_kernel(rng, n, k);
    const auto greedy = greedy_map(kernel, k);
    ASSERT_EQ(greedy.size(), k);
    double opt = -1e300;
    fixtures::for_each_subset(n, k, [&](const auto& s) { opt = std::max(opt, log_det_subset(kernel, s)); });
    const double got = log_det_subset(kernel, greedy);
    EXPECT_GE(got, (1.0 - 1.0 / std::exp(1.0)) * opt);
    if (k == 1) EXPECT_NEAR(got, opt, 1e-12);
  }
}

TEST(Candidates, TopPoolWithScaledRelevance) {
  ForwardOutput fo;
  fo.users.resize(1, 1);
  fo.users << 1;
  fo.items.resize(5, 1);
  fo.items << 3, 1, 5, 4, 2;
  const std::vector<ItemId> exclude{2};
  const auto c = build_candidates(fo, 0, exclude, 3);
  EXPECT_EQ(c.items, (std::vector<ItemId>{3, 0, 4}));
  EXPECT_EQ(c.relevance, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_EQ(c.item_vectors(0, 0), 4.0);
}
