/*
 * Copyright 2026 The ARNN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <vector>

#include <gtest/gtest.h>

#include "arnn/evaluate.hpp"
#include "arnn/itemknn.hpp"
#include "arnn/metrics.hpp"
#include "arnn/models.hpp"
#include "support.hpp"

namespace arnn {
namespace {

using Lists = std::vector<std::vector<ItemIndex>>;

TEST(Metrics, OneHitOfTwo) {
  EXPECT_EQ(recall_at_k({{0, 5}, {2, 3}}, {0, 1}, 2), 0.5);
}

TEST(Metrics, AlwaysFirst) {
  const Lists lists = {{3, 1}, {0, 4}, {2}};
  EXPECT_EQ(recall_at_k(lists, {3, 0, 2}, 2), 1.0);
  EXPECT_EQ(mrr_at_k(lists, {3, 0, 2}, 2), 1.0);
}

TEST(Metrics, MrrHandComputation) {
  const Lists lists = {{7, 1, 2}, {1, 7, 2}, {1, 2, 3}};
  EXPECT_EQ(mrr_at_k(lists, {7, 7, 7}, 3), 0.5);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(recall_at_k({}, {}, 20), DataError);
  EXPECT_THROW(mrr_at_k({{1}}, {1, 2}, 20), DataError);
  EXPECT_THROW(recall_at_k({{1, 2, 3}}, {1}, 2), DataError);
}

TEST(Metrics, RandomListsGiveKOverN) {
  Rng rng(131);
  Lists lists;
  std::vector<ItemIndex> targets;
  for (int n = 0; n < 1000; ++n) {
    std::vector<ItemIndex> all(100);
    for (ItemIndex i = 0; i < 100; ++i) all[i] = i;
    shuffle(all, rng);
    lists.emplace_back(all.begin(), all.begin() + 20);
    targets.push_back(static_cast<ItemIndex>(uniform_index(rng, 100)));
  }
  EXPECT_NEAR(recall_at_k(lists, targets, 20), 0.2, 0.04);
}

// The library metrics against the brute-force scorer, via both the list
// path and the rank path used during evaluation.
TEST(MetricsProperty, MatchBruteForceScorer) {
  Rng rng(132);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t items = 1 + uniform_index(rng, 12);
    const std::size_t k = 1 + uniform_index(rng, items + 2);
    const std::size_t n = 1 + uniform_index(rng, 8);
    Lists lists;
    std::vector<ItemIndex> targets;
    MetricAccumulator acc;
    acc.k = k;
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<double> scores(items);
      // Coarse scores so ties are common.
      for (auto& v : scores) v = static_cast<double>(uniform_index(rng, 4));
      const auto target = static_cast<ItemIndex>(uniform_index(rng, items));
      lists.push_back(top_k<double>(scores, k));
      targets.push_back(target);
      const std::size_t brute = testing::brute_rank(scores, target);
      ASSERT_EQ(rank_of<double>(scores, target), brute);
      acc.add_rank(brute);
    }
    const auto oracle = testing::brute_metrics(lists, targets);
    ASSERT_EQ(recall_at_k(lists, targets, k), oracle.recall);
    ASSERT_EQ(mrr_at_k(lists, targets, k), oracle.mrr);
    ASSERT_EQ(acc.recall(), oracle.recall);
    ASSERT_NEAR(acc.mrr(), oracle.mrr, 1e-15);
    ASSERT_LE(oracle.mrr, oracle.recall);
    if (k == 1) ASSERT_EQ(oracle.mrr, oracle.recall);
  }
}

TEST(Metrics, TiesGoToLowerIndex) {
  const std::vector<double> scores = {1.0, 3.0, 3.0, 0.5, 3.0};
  EXPECT_EQ(top_k<double>(scores, 4), (std::vector<ItemIndex>{1, 2, 4, 0}));
  EXPECT_EQ(rank_of<double>(scores, 4), 3u);
  EXPECT_EQ(top_k<double>(scores, 10).size(), 5u);
}

// --- item-knn --------------------------------------------------------------------

SessionDataset corpus(const std::vector<std::vector<ItemIndex>>& sessions, std::size_t items) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < items; ++i) names.push_back("i" + std::to_string(i));
  SessionDataset data{{}, FieldSchema({}, names)};
  for (const auto& s : sessions) {
    Session out;
    for (auto i : s) out.steps.push_back(Step{{}, i});
    data.sessions.push_back(out);
  }
  return data;
}

TEST(ItemKnn, CooccurrenceExtremes) {
  const auto data = corpus({{0, 1}, {1, 0, 0}, {2, 3}}, 4);
  const auto index = build_itemknn(data, 0.0, 10);
  EXPECT_NEAR(index.similarity(0, 1), 1.0, 1e-15);
  EXPECT_EQ(index.similarity(0, 2), 0.0);
  EXPECT_NEAR(index.similarity(2, 3), 1.0, 1e-15);
}

TEST(ItemKnn, NeighborCapKeepsMostSimilar) {
  const auto data = corpus({{0, 1}, {0, 1}, {0, 2}, {0, 3}, {3, 4}}, 5);
  const auto index = build_itemknn(data, 0.0, 1);
  ASSERT_EQ(index.neighbors(0).size(), 1u);
  EXPECT_EQ(index.neighbors(0)[0].item, 1u);
}

TEST(ItemKnnProperty, EqualsDenseCosine) {
  Rng rng(141);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t items = 2 + uniform_index(rng, 49);
    const double lambda = trial % 3 == 0 ? 20.0 : 0.0;
    const auto data = testing::random_dataset(rng, 10 + uniform_index(rng, 40), items, {}, 6);
    const auto index = build_itemknn(data, lambda, items);
    const auto dense = testing::dense_cosine(data, lambda);
    for (ItemIndex i = 0; i < items; ++i) {
      for (ItemIndex j = 0; j < items; ++j) {
        if (i == j) continue;
        ASSERT_NEAR(index.similarity(i, j), dense[i][j], 1e-12) << i << "," << j;
      }
    }
  }
}

TEST(ItemKnn, PredictScoresByPreviousItem) {
  const auto data = corpus({{0, 1}, {0, 2}, {0, 1}}, 3);
  const auto index = build_itemknn(data, 0.0, 10);
  StepInput in{{0}, {0}, {{}}, {true}};
  const auto s = index.predict(in);
  EXPECT_GT(s(0, 1), s(0, 2));
  EXPECT_EQ(s(0, 0), 0.0);
}

// --- evaluation harness -------------------------------------------------------

/// Knows the test set and always ranks the true next item first.
struct Oracle {
  const SessionDataset* data;
  std::vector<std::size_t> lane_session, lane_pos;
  std::size_t next = 0;

  void reset_state(std::size_t) {}
  Tensor<double> predict(const StepInput& in) {
    Tensor<double> out(Shape{in.size(), data->schema.item_count()});
    for (std::size_t r = 0; r < in.size(); ++r) {
      // Follow the harness's lane walk to find the true next item.
      const std::size_t lane = in.lanes[r];
      if (lane >= lane_session.size()) {
        lane_session.resize(lane + 1);
        lane_pos.resize(lane + 1);
      }
      if (in.boundaries[r]) {
        lane_session[lane] = next++;
        lane_pos[lane] = 1;
      } else {
        ++lane_pos[lane];
      }
      out(r, data->sessions[lane_session[lane]].steps[lane_pos[lane]].item) = 1.0;
    }
    return out;
  }
};

/// Records every score matrix handed to the harness.
template <typename Inner>
struct Recorder {
  Inner* inner;
  std::vector<Tensor<double>> seen;
  void reset_state(std::size_t lanes) { inner->reset_state(lanes); }
  Tensor<double> predict(const StepInput& in) {
    seen.push_back(inner->predict(in));
    return seen.back();
  }
};

TEST(Evaluate, PerfectPredictorScoresOne) {
  Rng rng(151);
  const auto data = testing::random_dataset(rng, 30, 12, {2});
  Oracle oracle{&data, {}, {}, 0};
  const auto r = evaluate_system(oracle, data, 20, "oracle", 4);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.mrr, 1.0);
  EXPECT_EQ(r.n_recs, data.transactions() - data.sessions.size());
}

TEST(Evaluate, PredictionsNeverSeeTheFuture) {
  Rng rng(152);
  const auto data = testing::random_dataset(rng, 25, 9, {2, 2});
  GruSessionModel<double> gru(9, 5, 0.0, rng);
  auto changed = data;
  // Rewrite every session's final item: no earlier prediction may change.
  for (auto& s : changed.sessions) s.steps.back().item = (s.steps.back().item + 4) % 9;
  auto run = [&](const SessionDataset& d) {
    GruSessionModel<double> model = gru;
    ModelScorer<double, GruSessionModel<double>> scorer(model);
    Recorder<decltype(scorer)> rec{&scorer, {}};
    evaluate_system(rec, d, 20, "gru", 3);
    return rec.seen;
  };
  const auto a = run(data), b = run(changed);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_TRUE(std::equal(a[k].values().begin(), a[k].values().end(), b[k].values().begin()));
  }
}

TEST(Evaluate, RepeatedRunsAgree) {
  Rng rng(153);
  const auto data = testing::random_dataset(rng, 25, 9, {2});
  const auto index = build_itemknn(data, 20.0, 100);
  auto copy = index;
  const auto a = evaluate_system(copy, data, 5, "itemknn");
  const auto b = evaluate_system(copy, data, 5, "itemknn");
  EXPECT_EQ(format_report_tsv({a}), format_report_tsv({b}));
  EXPECT_EQ(format_report_tsv({a}).substr(0, 7), "system\t");
}

TEST(Evaluate, EmptyTestSetIsAnError) {
  SessionDataset empty{{}, FieldSchema({}, {"a"})};
  auto index = ItemKnnIndex();
  EXPECT_THROW(evaluate_system(index, empty, 20, "x"), DataError);
}

}  // namespace
}  // namespace arnn
