#include <gtest/gtest.h>

#include <random>

#include "crskit/batching/batching.hpp"
#include "crskit/corpus/toy_corpus.hpp"
#include "support/temp_dir.hpp"

using namespace crskit;
using namespace crskit::batching;
using crskit::corpus::kPadId;

namespace {

Utterance utt(Role role, std::vector<int> tokens, std::vector<int> items = {}) {
  Utterance u;
  u.role = role;
  u.token_ids = std::move(tokens);
  u.item_ids = std::move(items);
  return u;
}

// Numbered turns: turn k (1-based) has the single token 10 + k.
Dialog numbered_dialog(int turns) {
  Dialog d;
  d.conv_id = "n";
  for (int k = 1; k <= turns; ++k) d.utterances.push_back(utt(k % 2 ? Role::Seeker : Role::Recommender, {10 + k}));
  return d;
}

}  // namespace

TEST(MakeInstances, OneRecInstancePerMentionedItem) {
  Dialog d;
  d.conv_id = "x";
  d.utterances = {utt(Role::Seeker, {5, 6}), utt(Role::Recommender, {7}), utt(Role::Recommender, {8, 9}, {2, 4})};
  d.utterances[0].entity_ids = {11};
  auto rec = make_rec_instances({d}, {});
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_EQ(rec[0].target_item, 2);
  EXPECT_EQ(rec[1].target_item, 4);
  EXPECT_EQ(rec[0].context_token_ids, rec[1].context_token_ids);
  EXPECT_EQ(rec[0].context_token_ids, (std::vector<int>{5, 6, kSeparatorId, 7}));
  EXPECT_EQ(rec[0].context_entity_ids, (std::vector<int>{11}));
}

TEST(MakeInstances, NoMentionsNoRecInstances) {
  EXPECT_TRUE(make_rec_instances({numbered_dialog(4)}, {}).empty());
}

TEST(MakeInstances, SeekerMentionsOnlyWithSwitch) {
  Dialog d;
  d.conv_id = "s";
  d.utterances = {utt(Role::Seeker, {5}, {3}), utt(Role::Recommender, {6}, {1})};
  EXPECT_EQ(make_rec_instances({d}, {}).size(), 1u);
  InstanceOptions o;
  o.rec_from_seeker = true;
  EXPECT_EQ(make_rec_instances({d}, o).size(), 2u);
}

TEST(MakeInstances, ContextTruncatedToLastTurns) {
  // Response at turn 5 (seeker turns 1,3,5 would not qualify: make turn 5 a recommender turn).
  Dialog d = numbered_dialog(5);
  d.utterances[4].role = Role::Recommender;
  InstanceOptions o;
  o.max_context_turns = 2;
  auto conv = make_conv_instances({d}, o);
  const auto& last = conv.back();
  EXPECT_EQ(last.turn, 4);
  EXPECT_EQ(last.context_token_ids, (std::vector<int>{13, kSeparatorId, 14}));
  EXPECT_EQ(last.response_token_ids, (std::vector<int>{corpus::kStartId, 15, corpus::kEndId}));
}

TEST(MakeInstances, ConvPerRecommenderTurnAndResponseCap) {
  Dialog d;
  d.conv_id = "c";
  d.utterances = {utt(Role::Recommender, {}), utt(Role::Seeker, {4}), utt(Role::Recommender, {5, 6, 7, 8})};
  InstanceOptions o;
  o.max_response_len = 2;
  auto conv = make_conv_instances({d}, o);
  ASSERT_EQ(conv.size(), 2u);
  EXPECT_TRUE(conv[0].context_token_ids.empty());
  EXPECT_EQ(conv[0].response_token_ids.size(), 2u);
  EXPECT_EQ(conv[1].response_token_ids, (std::vector<int>{corpus::kStartId, 5, 6, corpus::kEndId}));
}

TEST(MakeInstances, PolicyPerLabeledTurn) {
  Dialog d = numbered_dialog(4);
  d.utterances[1].policy = corpus::PolicyLabel{"action", 2};
  d.utterances[3].policy = corpus::PolicyLabel{"action", 0};
  d.user_profile = corpus::UserProfile{{1}, {"a", "b"}, {{20}, {21, 22}}};
  auto pol = make_policy_instances({d}, {});
  ASSERT_EQ(pol.size(), 2u);
  EXPECT_EQ(pol[0].target_label, 2);
  EXPECT_TRUE(pol[0].context_labels.empty());
  EXPECT_EQ(pol[1].context_labels, (std::vector<int>{2}));
  EXPECT_EQ(pol[1].profile_token_ids, (std::vector<int>{20, kSeparatorId, 21, 22}));
}

TEST(MakeInstances, BadTurnLimit) {
  EXPECT_THROW(build_context(numbered_dialog(2), 1, 0), BatchError);
}

TEST(PadBatch, Examples) {
  auto f = pad_rows(std::vector<std::vector<int>>{{1, 2}, {3}}, 0, 128);
  EXPECT_EQ(f.ids, (std::vector<int>{1, 2, 3, 0}));
  EXPECT_EQ(f.mask, (std::vector<int>{1, 1, 1, 0}));
  EXPECT_EQ(f.lengths, (std::vector<int>{2, 1}));

  auto t = pad_rows(std::vector<std::vector<int>>{{1, 2, 3, 4}}, 0, 2);
  EXPECT_EQ(t.ids, (std::vector<int>{3, 4}));

  auto s = pad_rows(std::vector<std::vector<int>>{{5, 6, 7}}, 0, 10);
  EXPECT_EQ(s.width, 3);
  EXPECT_EQ(pad_rows(std::vector<std::vector<int>>{{5, 6, 7}}, 0, 2).width, 2);
}

TEST(PadBatch, EmptyListIsAnError) {
  EXPECT_THROW(pad_batch(std::vector<RecInstance>{}, kPadId, 8), BatchError);
}

TEST(PadBatch, NamedFieldsAndTargets) {
  std::vector<RecInstance> rec(2);
  rec[0].context_token_ids = {4, 5};
  rec[0].target_item = 3;
  rec[1].target_item = 1;
  auto b = pad_batch(rec, kPadId, 8);
  EXPECT_EQ(b.task, Task::Rec);
  EXPECT_EQ(b.size(), 2);
  EXPECT_EQ(b.targets, (std::vector<int>{3, 1}));
  EXPECT_EQ(b.field("context_tokens").width, 2);
  EXPECT_EQ(b.field("context_entities").width, 0);
  EXPECT_THROW(b.field("response"), BatchError);
}

TEST(PadBatch, RandomRowsKeepInvariants) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<int>> rows(1 + rng() % 6);
    for (auto& r : rows) {
      r.resize(rng() % 12);
      for (auto& x : r) x = 1 + static_cast<int>(rng() % 50);
    }
    const int max_len = static_cast<int>(rng() % 10);
    auto f = pad_rows(rows, 0, max_len);
    EXPECT_LE(f.width, max_len);
    for (int i = 0; i < f.rows; ++i) {
      int sum = 0;
      for (int j = 0; j < f.width; ++j) {
        EXPECT_EQ(f.mask_at(i, j), j < f.length(i) ? 1 : 0);
        sum += f.mask_at(i, j);
      }
      EXPECT_EQ(sum, f.length(i));
      // Rows are suffixes of their sources.
      const auto& src = rows[static_cast<std::size_t>(i)];
      const auto r = f.row(i);
      ASSERT_LE(r.size(), src.size());
      EXPECT_TRUE(std::equal(r.begin(), r.end(), src.end() - static_cast<std::ptrdiff_t>(r.size())));
      EXPECT_EQ(r.size(), std::min<std::size_t>(src.size(), static_cast<std::size_t>(max_len)));
    }
  }
}

TEST(IterateBatches, SizesAndDeterminism) {
  std::vector<RecInstance> five(5);
  for (int i = 0; i < 5; ++i) five[static_cast<std::size_t>(i)].target_item = i;
  auto batches = iterate_batches(five, 2, false, 0);
  std::vector<int> sizes;
  for (const auto& b : batches) sizes.push_back(b.size());
  EXPECT_EQ(sizes, (std::vector<int>{2, 2, 1}));

  auto a = iterate_batches(five, 2, true, 9);
  auto b = iterate_batches(five, 2, true, 9);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].targets, b[k].targets);
  EXPECT_THROW(iterate_batches(five, 0, false, 0), BatchError);
}

TEST(IterateBatches, SeedsGiveDifferentPermutationsSameMultiset) {
  std::vector<PolicyInstance> items(100);
  for (int i = 0; i < 100; ++i) items[static_cast<std::size_t>(i)].target_label = i;
  const auto flatten = [](const std::vector<TaskBatch>& bs) {
    std::vector<int> out;
    for (const auto& b : bs) out.insert(out.end(), b.targets.begin(), b.targets.end());
    return out;
  };
  auto s1 = flatten(iterate_batches(items, 7, true, 1));
  auto s2 = flatten(iterate_batches(items, 7, true, 2));
  EXPECT_NE(s1, s2);
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  EXPECT_EQ(s1, s2);
}

TEST(IterateBatches, Conservation) {
  std::vector<ConvInstance> items(37);
  for (int bs = 1; bs <= 40; bs += 3)
    for (bool shuffle : {false, true}) {
      int total = 0;
      for (const auto& b : iterate_batches(items, bs, shuffle, 5)) total += b.size();
      EXPECT_EQ(total, 37);
    }
}

TEST(ToyCorpus, InstanceCounts) {
  test::TempDir tmp;
  corpus::make_toy_corpus(tmp.path() / "raw", tmp.path() / "u");
  auto b = corpus::load_unified(tmp.path() / "u", std::nullopt);
  // Independent enumeration over the loaded train split.
  std::size_t rec = 0, conv = 0, pol = 0;
  for (const auto& d : b.train)
    for (const auto& u : d.utterances) {
      if (u.role == Role::Recommender) {
        rec += u.item_ids.size();
        ++conv;
      }
      if (u.policy) ++pol;
    }
  EXPECT_EQ(make_rec_instances(b.train, {}).size(), rec);
  EXPECT_EQ(make_conv_instances(b.train, {}).size(), conv);
  EXPECT_EQ(make_policy_instances(b.train, {}).size(), pol);
  EXPECT_GT(rec, 0u);
  for (const auto& p : make_policy_instances(b.train, {})) EXPECT_FALSE(p.profile_token_ids.empty());
}
