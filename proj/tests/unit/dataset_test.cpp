#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "qgrace/dataset.hpp"
#include "qgrace/error.hpp"
#include "qgrace/synthetic.hpp"
#include "test_support.hpp"

namespace qgrace::data {
namespace {

InteractionDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in);
}

std::set<std::uint64_t> keys(const std::vector<Edge>& edges) {
  std::set<std::uint64_t> out;
  for (const auto& e : edges) out.insert(edge_key(e));
  return out;
}

TEST(ParseInteractions, AssignsIdsInFirstAppearanceOrder) {
  const auto ds = parse("a x\nb x\na y\na x\n");
  EXPECT_EQ(ds.num_users(), 2u);
  EXPECT_EQ(ds.num_items(), 2u);
  const std::vector<Edge> expected = {{0, 0}, {1, 0}, {0, 1}};
  EXPECT_EQ(ds.edges, expected);
}

TEST(ParseInteractions, SkipsCommentsAndExtraFields) {
  const auto ds = parse("# c\nu1 i9 5 1234\n\n");
  EXPECT_EQ(ds.num_users(), 1u);
  EXPECT_EQ(ds.num_items(), 1u);
  EXPECT_EQ(ds.edges, (std::vector<Edge>{{0, 0}}));
}

TEST(ParseInteractions, MalformedLineReportsLineNumber) {
  try {
    parse("a x\nlonely\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseInteractions, EmptyInputIsAnError) {
  EXPECT_THROW(parse("# only a comment\n"), ParseError);
}

TEST(SplitSizes, RatioArithmetic) {
  const auto s = split_sizes(10, {});
  EXPECT_EQ(s.train, 7u);
  EXPECT_EQ(s.validation, 1u);
  EXPECT_EQ(s.test, 2u);
}

TEST(SplitSizes, BeautyScaleMatchesIntegerFloor) {
  // Integer-only oracle: floor(n * 7 / 10) and floor(n / 10).
  const std::size_t n = 198503;
  const auto s = split_sizes(n, {});
  EXPECT_EQ(s.train, n * 7 / 10);
  EXPECT_EQ(s.train, 138952u);
  EXPECT_EQ(s.validation, n / 10);
  EXPECT_EQ(s.train + s.validation + s.test, n);
}

TEST(SplitSizes, RejectsBadRatios) {
  EXPECT_THROW(split_sizes(10, {0.5, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(split_sizes(10, {0.9, 0.1, 0.0}), std::invalid_argument);
}

TEST(SplitDataset, PartitionIsDisjointAndComplete) {
  const auto planted = synth::planted_preference({40, 50, 4, 0.1}, 3);
  const auto split = split_dataset(planted.dataset, {}, 11);
  const auto sizes = split_sizes(planted.dataset.edges.size(), {});
  EXPECT_EQ(split.train().size(), sizes.train);
  EXPECT_EQ(split.validation().size(), sizes.validation);
  EXPECT_EQ(split.test().size(), sizes.test);

  std::set<std::uint64_t> all;
  for (const auto* part : {&split.train(), &split.validation(), &split.test()}) {
    for (const auto& e : *part) EXPECT_TRUE(all.insert(edge_key(e)).second);
  }
  EXPECT_EQ(all, keys(planted.dataset.edges));
  for (const auto& e : split.train()) EXPECT_TRUE(split.in_train(e.user, e.item));
}

TEST(SplitDataset, SameSeedSamePartition) {
  const auto planted = synth::planted_preference({30, 30, 4, 0.1}, 1);
  EXPECT_EQ(split_dataset(planted.dataset, {}, 5), split_dataset(planted.dataset, {}, 5));
  EXPECT_NE(split_dataset(planted.dataset, {}, 5).train(),
            split_dataset(planted.dataset, {}, 6).train());
}

TEST(SplitDataset, UsersWithoutTrainEdgesAreListed) {
  auto split = testing::split_from_edges(3, 2, {{0, 0}, {2, 1}}, {{1, 1}});
  EXPECT_EQ(split.users_without_train(), (std::vector<Index>{1}));
}

TEST(InjectNoise, ZeroRatioLeavesSplitUnchanged) {
  const auto planted = synth::planted_preference({30, 40, 4, 0.1}, 2);
  const auto split = split_dataset(planted.dataset, {}, 2);
  auto rng = make_stream(1, streams::kNoise);
  EXPECT_EQ(inject_noise(split, 0.0, rng), split);
}

TEST(InjectNoise, AddsFlaggedUnseenEdgesAndKeepsTestUntouched) {
  std::vector<Edge> train;
  for (Index u = 0; u < 20; ++u) {
    for (Index i = 0; i < 5; ++i) train.push_back({u, (u + i) % 30});
  }
  const auto split = testing::split_from_edges(20, 30, train, {{0, 29}, {3, 20}});
  ASSERT_EQ(split.train().size(), 100u);
  auto rng = make_stream(4, streams::kNoise);
  const auto noisy = inject_noise(split, 0.1, rng);

  EXPECT_EQ(noisy.noise().size(), 10u);
  EXPECT_EQ(noisy.train().size(), 110u);
  EXPECT_EQ(noisy.test(), split.test());
  EXPECT_EQ(noisy.validation(), split.validation());
  const auto before = keys(split.train());
  const auto test = keys(split.test());
  for (const auto& e : noisy.noise()) {
    EXPECT_FALSE(before.contains(edge_key(e)));
    EXPECT_FALSE(test.contains(edge_key(e)));
    EXPECT_TRUE(noisy.is_noise(e.user, e.item));
    EXPECT_TRUE(noisy.in_train(e.user, e.item));
  }
  for (const auto& e : split.train()) EXPECT_FALSE(noisy.is_noise(e.user, e.item));
}

TEST(InjectNoise, SyntheticTestSetIdenticalBeforeAndAfter) {
  const auto planted = synth::planted_preference({}, 7);
  const auto split = split_dataset(planted.dataset, {}, 7);
  auto rng = make_stream(7, streams::kNoise);
  const auto noisy = inject_noise(split, 0.2, rng);
  std::ostringstream a, b;
  write_edges(a, split.test(), split.users(), split.items());
  write_edges(b, noisy.test(), noisy.users(), noisy.items());
  EXPECT_EQ(a.str(), b.str());
}

TEST(InjectNoise, TooDenseGraphIsASamplingError) {
  const auto split = testing::split_from_edges(1, 2, {{0, 0}}, {{0, 1}});
  auto rng = make_stream(1, streams::kNoise);
  EXPECT_THROW(inject_noise(split, 1.0, rng), SamplingError);
}

TEST(SampleBatch, OnlyCandidateNegative) {
  const auto split = testing::split_from_edges(1, 2, {{0, 0}});
  auto rng = make_stream(3, streams::kBatches);
  for (int t = 0; t < 20; ++t) {
    const auto b = sample_batch(split, 4, 1, rng);
    for (const auto& e : b.negatives) EXPECT_EQ(e, (Edge{0, 1}));
  }
}

TEST(SampleBatch, NoNegativeIsATrainEdge) {
  const auto planted = synth::planted_preference({}, 5);
  const auto split = split_dataset(planted.dataset, {}, 5);
  auto rng = make_stream(5, streams::kBatches);
  const auto b = sample_batch(split, 128, 1, rng);
  EXPECT_EQ(b.positives.size(), 128u);
  EXPECT_EQ(b.negatives.size(), 128u);
  for (std::size_t j = 0; j < b.negatives.size(); ++j) {
    EXPECT_FALSE(split.in_train(b.negatives[j].user, b.negatives[j].item));
    EXPECT_EQ(b.negatives[j].user, b.positives[j].user);
  }
  for (const auto& e : b.positives) EXPECT_TRUE(split.in_train(e.user, e.item));
}

TEST(SampleBatch, WithoutNegativesUniqueListsCoverPositives) {
  const auto planted = synth::planted_preference({30, 40, 4, 0.1}, 5);
  const auto split = split_dataset(planted.dataset, {}, 5);
  auto rng = make_stream(5, streams::kBatches);
  const auto b = sample_batch(split, 16, 0, rng);
  EXPECT_TRUE(b.negatives.empty());
  std::set<Index> users;
  for (const auto& e : b.positives) users.insert(e.user);
  EXPECT_EQ(std::vector<Index>(users.begin(), users.end()), b.users_unique);
}

TEST(SampleBatch, UserAdjacentToEveryItemFailsNamingTheUser) {
  const auto split = testing::split_from_edges(1, 2, {{0, 0}, {0, 1}});
  auto rng = make_stream(3, streams::kBatches);
  try {
    sample_batch(split, 1, 1, rng);
    FAIL() << "expected SamplingError";
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("'u0'"), std::string::npos);
  }
}

TEST(MakeBatch, SlotsPointIntoUniqueLists) {
  const auto b = make_batch({{3, 1}, {1, 4}}, {{3, 2}, {3, 4}, {1, 1}, {1, 0}}, 2);
  EXPECT_EQ(b.users_unique, (std::vector<Index>{1, 3}));
  EXPECT_EQ(b.items_unique, (std::vector<Index>{0, 1, 2, 4}));
  for (std::size_t p = 0; p < b.num_pairs(); ++p) {
    EXPECT_EQ(b.users_unique[b.user_slot[p]], b.pair(p).user);
    EXPECT_EQ(b.items_unique[b.item_slot[p]], b.pair(p).item);
  }
  EXPECT_THROW(make_batch({{0, 0}}, {}, 1), std::invalid_argument);
}

TEST(FileFormats, IdMapAndEdgeDumpRoundTrip) {
  const auto ds = parse("alice book\nbob book\nalice pen\ncarol lamp\n");
  std::stringstream users, items, edges;
  write_id_map(users, ds.users);
  write_id_map(items, ds.items);
  write_edges(edges, ds.edges, ds.users, ds.items);
  InteractionDataset back;
  back.users = read_id_map(users);
  back.items = read_id_map(items);
  back.edges = read_edges(edges, back.users, back.items);
  EXPECT_EQ(back, ds);
}

TEST(FileFormats, IdMapMustBeABijection) {
  std::istringstream gap("a\t0\nb\t2\n");
  EXPECT_THROW(read_id_map(gap), ParseError);
}

TEST(FileFormats, SplitDirectoryRoundTrip) {
  const auto planted = synth::planted_preference({30, 40, 4, 0.1}, 8);
  auto split = split_dataset(planted.dataset, {}, 8);
  auto rng = make_stream(8, streams::kNoise);
  split = inject_noise(split, 0.1, rng);
  const auto dir = std::filesystem::temp_directory_path() / "qgrace_split_roundtrip";
  std::filesystem::remove_all(dir);
  save_split(dir, split);
  EXPECT_EQ(load_split(dir), split);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace qgrace::data
