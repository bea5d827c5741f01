#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "citeie/errors.hpp"
#include "citeie/linkage.hpp"
#include "support.hpp"

using namespace citeie;

namespace {

MetaRecord rec(std::string id, std::string title, std::optional<std::string> doi = {},
               std::optional<std::string> arxiv = {}, std::optional<std::string> s2 = {}) {
  MetaRecord r;
  r.record_id = std::move(id);
  r.title = std::move(title);
  r.doi = std::move(doi);
  r.arxiv_id = std::move(arxiv);
  r.s2_id = std::move(s2);
  return r;
}

}  // namespace

TEST(Normalize, TitleRules) {
  EXPECT_EQ(normalize_title("  Deep   Learning:\tA Survey!! "), "deep learning a survey");
  // decomposed and composed forms agree
  EXPECT_EQ(normalize_title("\u00c9tude"), normalize_title("E\u0301tude"));
  EXPECT_EQ(normalize_title("E\u0301TUDE"), "\u00e9tude");
  // full case folding: sharp s folds to "ss"
  EXPECT_EQ(normalize_title("Straße"), "strasse");
  // non-ASCII punctuation is kept
  EXPECT_EQ(normalize_title("a–b"), "a–b");
}

TEST(Linkage, FixtureCounts) {
  auto f = fixture::linkage_fixture();
  MetaStore store(f.records);
  auto map = link_records(f.docs, store);
  EXPECT_EQ(map.pairs.size(), 433u);
  EXPECT_EQ(map.unmatched.size(), 5u);
  EXPECT_EQ(map.pairs, f.expected);
  EXPECT_TRUE(link_is_sound(map, f.docs, store));
}

TEST(Linkage, OrderIndependent) {
  auto f = fixture::linkage_fixture();
  auto base = link_records(f.docs, MetaStore(f.records));
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto docs = f.docs;
    auto records = f.records;
    std::mt19937_64 rng(s);
    std::shuffle(docs.begin(), docs.end(), rng);
    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(link_records(docs, MetaStore(records)), base);
  }
}

TEST(Linkage, NoIdentifiersUnmatched) {
  MetaStore store({rec("r1", "Some Title", "10.1/x")});
  std::vector<DocIdentifiers> docs = {{"d", {}, {}, {}, {}}};
  auto map = link_records(docs, store);
  EXPECT_TRUE(map.pairs.empty());
  EXPECT_EQ(map.unmatched, std::vector<std::string>{"d"});
}

TEST(Linkage, AgreementIsSinglePair) {
  MetaStore store({rec("r1", "Some Title", "10.1/x")});
  std::vector<DocIdentifiers> docs = {{"d", "some  TITLE", "10.1/x", {}, {}}};
  auto map = link_records(docs, store);
  EXPECT_EQ(map.pairs.size(), 1u);
  EXPECT_EQ(map.record_for("d"), "r1");
}

TEST(Linkage, AmbiguityNamesBoth) {
  MetaStore store({rec("r1", "Title One", "10.1/x"), rec("r2", "Title Two", "10.1/y")});
  std::vector<DocIdentifiers> docs = {{"d", "Title Two", "10.1/x", {}, {}}};
  try {
    link_records(docs, store);
    FAIL();
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("r1"), std::string::npos);
    EXPECT_NE(msg.find("r2"), std::string::npos);
  }
}

TEST(Linkage, DuplicateDoiIsIntegrityError) {
  EXPECT_THROW(MetaStore({rec("r1", "A", "10.1/x"), rec("r2", "B", "10.1/x")}), ValidationError);
  EXPECT_THROW(MetaStore({rec("r1", "A"), rec("r1", "B")}), ValidationError);
}

TEST(Linkage, TwoDocsOneRecordRejected) {
  MetaStore store({rec("r1", "A", "10.1/x")});
  std::vector<DocIdentifiers> docs = {{"d1", {}, "10.1/x", {}, {}}, {"d2", "A", {}, {}, {}}};
  EXPECT_THROW(link_records(docs, store), ValidationError);
}

TEST(Linkage, NoFuzzyTitles) {
  MetaStore store({rec("r1", "Graph Neural Networks")});
  std::vector<DocIdentifiers> docs = {{"d", "Graph Neural Network", {}, {}, {}}};
  EXPECT_EQ(link_records(docs, store).unmatched.size(), 1u);
}

TEST(Linkage, MapFileRoundTrip) {
  auto f = fixture::linkage_fixture();
  auto map = link_records(f.docs, MetaStore(f.records));
  std::ostringstream out;
  write_link_map(out, map);
  std::istringstream in(out.str());
  EXPECT_EQ(read_link_map(in), map);
  // unmatched documents have an empty second column
  EXPECT_NE(out.str().find("doc-435\t\n"), std::string::npos);
}

TEST(Linkage, StoreFileRoundTrip) {
  auto f = fixture::linkage_fixture();
  MetaStore store(f.records);
  std::ostringstream out;
  write_store(out, store);
  std::istringstream in(out.str());
  auto again = read_store(in);
  ASSERT_EQ(again.size(), store.size());
  EXPECT_EQ(link_records(f.docs, again), link_records(f.docs, store));
}
