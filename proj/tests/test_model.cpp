#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "divsr/adam.hpp"
#include "divsr/checkpoint.hpp"
#include "divsr/model.hpp"

using namespace divsr;

TEST(InitModel, DeterministicAndBounded) {
  const ModelShape shape{Backbone::MF, false, 64, 2};
  const auto a = init_model(shape, 20, 30, 9);
  const auto b = init_model(shape, 20, 30, 9);
  EXPECT_EQ(serialize(a), serialize(b));
  EXPECT_LE(a.user_table.cwiseAbs().maxCoeff(), 0.0625);
  EXPECT_LE(a.item_table.cwiseAbs().maxCoeff(), 0.0625);
  EXPECT_NE(serialize(a), serialize(init_model(shape, 20, 30, 10)));
}

TEST(InitModel, EmptyUsersAndTrusteeTable) {
  const auto m = init_model({Backbone::MF, false, 8, 2}, 0, 5, 1);
  EXPECT_EQ(m.num_users(), 0u);
  EXPECT_EQ(m.num_items(), 5u);
  EXPECT_TRUE(init_model({Backbone::TrustMF, true, 4, 2}, 3, 3, 1).has_trustee());
  EXPECT_FALSE(init_model({Backbone::TrustMF, false, 4, 2}, 3, 3, 1).has_trustee());
  EXPECT_THROW(init_model({Backbone::MF, false, 0, 2}, 3, 3, 1), ConfigError);
  EXPECT_THROW(init_model({Backbone::DiffNet, true, 4, 0}, 3, 3, 1), ConfigError);
}

TEST(Forward, DiffNetOneLayerMean) {
  auto m = init_model({Backbone::DiffNet, true, 2, 1}, 2, 1, 0);
  m.user_table << 1, 0, 0, 1;
  const auto social = SocialGraph::from_edges(2, {{0, 1}});
  const auto train = InteractionGraph::from_edges(2, 1, {});
  const auto fo = forward(m, train, &social);
  EXPECT_DOUBLE_EQ(fo.users(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(fo.users(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(fo.users(1, 0), 0.0);  // trusts nobody: copies h^0
  EXPECT_DOUBLE_EQ(fo.users(1, 1), 1.0);
}

TEST(Forward, DiffNetWithoutSocialKeepsItemMean) {
  auto m = init_model({Backbone::DiffNet, false, 2, 3}, 2, 2, 4);
  const auto train = InteractionGraph::from_edges(2, 2, {{0, 0}, {0, 1}});
  const auto social = SocialGraph::from_edges(2, {{0, 1}, {1, 0}});
  const auto fo = forward(m, train, &social);
  const Eigen::RowVectorXd expect =
      m.user_table.row(0) + 0.5 * (m.item_table.row(0) + m.item_table.row(1));
  EXPECT_TRUE(fo.users.row(0).isApprox(expect));
  EXPECT_TRUE(fo.users.row(1).isApprox(m.user_table.row(1)));
  EXPECT_TRUE(forward(m, train, nullptr).users.isApprox(fo.users));
}

TEST(Forward, MatrixFactorizationIsIdentity) {
  for (auto b : {Backbone::MF, Backbone::SocialMF, Backbone::TrustMF}) {
    const auto m = init_model({b, true, 3, 2}, 4, 5, 2);
    const auto social = SocialGraph::from_edges(4, {{0, 1}});
    const auto train = InteractionGraph::from_edges(4, 5, {{0, 0}});
    const auto fo = forward(m, train, &social);
    EXPECT_EQ(fo.users, m.user_table);
    EXPECT_EQ(fo.items, m.item_table);
  }
}

TEST(Forward, SocialModelNeedsGraph) {
  const auto m = init_model({Backbone::DiffNet, true, 3, 2}, 2, 2, 1);
  EXPECT_THROW(forward(m, InteractionGraph::from_edges(2, 2, {}), nullptr), ConfigError);
}

TEST(Forward, NeighbourOrderInvariantAndPure) {
  auto m = init_model({Backbone::DiffNet, true, 3, 2}, 4, 3, 8);
  const auto train = InteractionGraph::from_edges(4, 3, {{0, 1}, {2, 2}});
  const auto s1 = SocialGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {3, 1}});
  const auto s2 = SocialGraph::from_edges(4, {{3, 1}, {0, 3}, {0, 2}, {0, 1}});
  const auto a = forward(m, train, &s1);
  EXPECT_TRUE(a.users.isApprox(forward(m, train, &s2).users, 1e-15));
  EXPECT_EQ(a.users, forward(m, train, &s1).users);
}

TEST(Scoring, DotProductAndExclusion) {
  ForwardOutput fo;
  fo.users.resize(1, 2);
  fo.users << 1, 0;
  fo.items.resize(3, 2);
  fo.items << 2, 5, -1, 0, 9, 9;
  const std::vector<ItemId> ex{2};
  const auto s = score_all_items(fo, 0, ex);
  EXPECT_DOUBLE_EQ(s[0], 2.0);
  EXPECT_EQ(topk(s, 3), (std::vector<ItemId>{0, 1}));
  fo.users.setZero();
  for (double v : score_all_items(fo, 0)) EXPECT_EQ(v, 0.0);
}

TEST(TopK, OrderTiesAndTruncation) {
  const std::vector<double> s{0.1, 0.9, 0.5};
  EXPECT_EQ(topk(s, 2), (std::vector<ItemId>{1, 2}));
  const std::vector<double> flat{1.0, 1.0, 1.0};
  EXPECT_EQ(topk(flat, 2), (std::vector<ItemId>{0, 1}));
  EXPECT_EQ(topk(s, 5).size(), 3u);
  std::vector<double> shifted = s;
  for (auto& v : shifted) v += 3.5;
  EXPECT_EQ(topk(shifted, 3), topk(s, 3));
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto m = init_model({Backbone::TrustMF, true, 5, 2}, 7, 4, 3);
  const auto bytes = serialize(m);
  const auto back = deserialize(bytes);
  EXPECT_EQ(serialize(back), bytes);
  EXPECT_EQ(back.backbone, Backbone::TrustMF);
  EXPECT_TRUE(back.social_enabled);
  EXPECT_EQ(digest(back), digest(m));
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), DataError);

  const auto path = (std::filesystem::temp_directory_path() / "divsr_ckpt_test.bin").string();
  save_checkpoint(path, m);
  EXPECT_EQ(digest(read_file_bytes(path)), digest(m));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), DataError);
}

TEST(Digest, KnownValue) {
  // FNV-1a 64 of the empty string is the offset basis.
  EXPECT_EQ(digest(std::string_view{}), "cbf29ce484222325");
  EXPECT_EQ(digest(std::string_view{"a"}), "af63dc4c8601ec8c");
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  auto m = init_model({Backbone::MF, false, 3, 2}, 3, 3, 1);
  const auto before = serialize(m);
  auto state = AdamState::for_model(m);
  for (int t = 0; t < 5; ++t) adam_step(m, ModelGrad::zeros_like(m), state, 0.01);
  EXPECT_EQ(serialize(m), before);
}

TEST(Adam, FirstStepMatchesScalarSimulation) {
  auto m = init_model({Backbone::MF, false, 1, 2}, 1, 1, 1);
  m.user_table(0, 0) = 0.0;
  auto state = AdamState::for_model(m);
  auto g = ModelGrad::zeros_like(m);
  g.user_table(0, 0) = 3.0;
  const double lr = 0.001;
  // Hand simulation: m1 = 0.1*3, v1 = 0.001*9, mhat = 3, vhat = 9.
  double theta = 0.0, mom = 0.0, vel = 0.0;
  for (int t = 1; t <= 3; ++t) {
    adam_step(m, g, state, lr);
    mom = 0.9 * mom + 0.1 * 3.0;
    vel = 0.999 * vel + 0.001 * 9.0;
    const double mhat = mom / (1 - std::pow(0.9, t)), vhat = vel / (1 - std::pow(0.999, t));
    theta -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR(m.user_table(0, 0), theta, 1e-15);
  }
  EXPECT_NEAR(theta, -3 * lr, 1e-9);  // unit-scaled steps
}

TEST(Adam, NonFiniteGradientRejectedWithoutUpdate) {
  auto m = init_model({Backbone::MF, false, 2, 2}, 2, 2, 1);
  const auto before = serialize(m);
  auto state = AdamState::for_model(m);
  auto g = ModelGrad::zeros_like(m);
  g.user_table(0, 0) = 1.0;
  g.item_table(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(m, g, state, 0.1), TrainingError);
  EXPECT_EQ(serialize(m), before);
}

TEST(Adam, LazyRowsUntouched) {
  auto m = init_model({Backbone::MF, false, 2, 2}, 3, 1, 1);
  const Eigen::RowVectorXd row2 = m.user_table.row(2);
  auto state = AdamState::for_model(m);
  auto g = ModelGrad::zeros_like(m);
  g.user_table(0, 1) = 0.5;
  adam_step(m, g, state, 0.1, 0.01);
  EXPECT_EQ(m.user_table.row(2), row2);
}
