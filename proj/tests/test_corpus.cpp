#include <gtest/gtest.h>

#include <sstream>

#include "citeie/corpus.hpp"
#include "citeie/errors.hpp"
#include "citeie/rng.hpp"
#include "support.hpp"

using namespace citeie;
using fixture::body;
using fixture::make_doc;

namespace {

std::vector<Document> five_docs() { return load_corpus(std::string(CITEIE_TEST_DATA) + "/five_docs.jsonl"); }

Tag T(const char* name) { return parse_tag(name); }

}  // namespace

TEST(Corpus, OneLineEmptyAnnotations) {
  std::istringstream in(R"({"doc_id":"x","sections":[{"tokens":["a","b"],"kind":"body"}]})");
  auto docs = read_corpus(in);
  ASSERT_EQ(docs.size(), 1u);
  EXPECT_TRUE(docs[0].mentions.empty());
  EXPECT_TRUE(docs[0].clusters.empty());
  EXPECT_TRUE(docs[0].salient.empty());
  EXPECT_TRUE(docs[0].relations.empty());
  EXPECT_EQ(docs[0].token_count(), 2u);
}

TEST(Corpus, FiveDocTokenCounts) {
  auto docs = five_docs();
  ASSERT_EQ(docs.size(), 5u);
  // counted by hand from the fixture file
  std::vector<std::size_t> expect = {14, 11, 11, 3, 12};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(docs[i].token_count(), expect[i]) << docs[i].doc_id;
  EXPECT_EQ(docs[4].body_token_count(), 9u);
  EXPECT_EQ(docs[2].section_offsets(), (std::vector<std::size_t>{0, 3, 9, 11}));
}

TEST(Corpus, ClusterIndexOutOfRange) {
  std::istringstream in(
      R"({"doc_id":"bad","sections":[{"tokens":["a","b","c"]}],)"
      R"("mentions":[{"start":0,"end":1,"type":"Task"},{"start":1,"end":2,"type":"Task"},{"start":2,"end":3,"type":"Task"}],)"
      R"("clusters":{"c":[99]}})");
  try {
    read_corpus(in);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("bad"), std::string::npos);
    EXPECT_NE(msg.find("clusters"), std::string::npos);
  }
}

TEST(Corpus, MalformedLineCarriesLineNumber) {
  std::istringstream in("{\"doc_id\":\"a\",\"sections\":[{\"tokens\":[\"x\"]}]}\n{not json\n");
  try {
    read_corpus(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Corpus, OverlappingMentionsRejected) {
  auto d = make_doc("o", {body("a b c d")}, {{0, 2, EntityType::Task}, {1, 3, EntityType::Method}});
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Corpus, MentionAcrossSectionsRejected) {
  auto d = make_doc("o", {body("a b"), body("c d")}, {{1, 3, EntityType::Task}});
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Corpus, BodyAfterCitanceRejected) {
  auto d = make_doc("o", {fixture::citance("a", "c"), body("b")});
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Corpus, RoundTripIsIdentity) {
  auto docs = five_docs();
  std::ostringstream out;
  write_corpus(out, docs);
  std::istringstream in(out.str());
  auto again = read_corpus(in);
  EXPECT_EQ(again, docs);
  std::ostringstream out2;
  write_corpus(out2, again);
  EXPECT_EQ(out2.str(), out.str());
}

TEST(Iobes, SingleTokenIsS) {
  auto d = make_doc("x", {body("a b c")}, {{1, 2, EntityType::Method}});
  auto tags = encode_iobes(d);
  EXPECT_EQ(tags[0], (TagSequence{0, T("S-Method"), 0}));
}

TEST(Iobes, SpanIsBIE) {
  auto d = make_doc("x", {body("a b c d e f g")}, {{3, 6, EntityType::Task}});
  auto tags = encode_iobes(d);
  EXPECT_EQ(tags[0], (TagSequence{0, 0, 0, T("B-Task"), T("I-Task"), T("E-Task"), 0}));
}

TEST(Iobes, CitanceSectionsAllO) {
  auto docs = five_docs();
  auto tags = encode_iobes(docs[4]);
  ASSERT_EQ(tags.size(), 2u);
  EXPECT_EQ(tags[1], TagSequence(3, 0));
}

TEST(Iobes, RoundTripFiveDocs) {
  for (const auto& d : five_docs()) {
    auto tags = encode_iobes(d);
    std::vector<SectionKind> kinds;
    for (const auto& s : d.sections) kinds.push_back(s.kind);
    EXPECT_EQ(decode_iobes(tags, kinds), d.mentions) << d.doc_id;
  }
}

TEST(Iobes, RoundTripRandomDocs) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Section> secs;
    std::vector<Mention> ms;
    std::size_t offset = 0;
    std::size_t n_sec = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < n_sec; ++s) {
      std::size_t len = 1 + uniform_index(rng, 12);
      Section sec;
      for (std::size_t i = 0; i < len; ++i) sec.tokens.push_back("t");
      std::size_t i = 0;
      while (i < len) {
        if (uniform01(rng) < 0.4) {
          std::size_t l = 1 + uniform_index(rng, std::min<std::size_t>(4, len - i));
          ms.push_back({offset + i, offset + i + l, kEntityTypes[uniform_index(rng, 4)]});
          i += l;
        } else {
          ++i;
        }
      }
      offset += len;
      secs.push_back(sec);
    }
    auto d = make_doc("r", secs, ms);
    EXPECT_EQ(decode_iobes(encode_iobes(d)), ms);
  }
}

TEST(Iobes, DecodeAllO) { EXPECT_TRUE(decode_section(TagSequence(6, 0), 0).empty()); }

TEST(Iobes, DecodeSMetric) {
  TagSequence t(9, 0);
  t[7] = T("S-Metric");
  auto ms = decode_section(t, 0);
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0], (Mention{7, 8, EntityType::Metric}));
}

TEST(Iobes, DanglingIOpensAtRunStart) {
  TagSequence t = {0, T("I-Task"), T("I-Task"), T("E-Task"), 0};
  EXPECT_EQ(decode_section(t, 10), (std::vector<Mention>{{11, 14, EntityType::Task}}));
}

TEST(Iobes, RepairMatchesOracleExhaustively) {
  std::size_t checked = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    fixture::for_each_tag_string(n, [&](const std::vector<Tag>& tags) {
      auto got = decode_section(tags, 3);
      auto want = fixture::repair_oracle(tags, 3);
      if (got != want) ADD_FAILURE() << "mismatch at length " << n;
      for (const auto& m : got) {
        ASSERT_LT(m.start, m.end);
        ASSERT_LE(m.end, 3 + n);
      }
      ++checked;
    });
  }
  EXPECT_EQ(checked, 17u + 289u + 4913u + 83521u + 1419857u);
}

TEST(Iobes, LegalityMatchesOracle) {
  for (Tag a = 0; a < kNumTags; ++a) {
    EXPECT_EQ(legal_start(a), fixture::oracle_legal_first(a));
    EXPECT_EQ(legal_end(a), fixture::oracle_legal_last(a));
    for (Tag b = 0; b < kNumTags; ++b) EXPECT_EQ(legal_transition(a, b), fixture::oracle_legal_pair(a, b));
  }
}

TEST(Iobes, DecodeNeverInCitance) {
  std::vector<TagSequence> tags = {{T("S-Task")}, {T("S-Task"), T("B-Method"), T("E-Method")}};
  std::vector<SectionKind> kinds = {SectionKind::body, SectionKind::citance};
  EXPECT_EQ(decode_iobes(tags, kinds), (std::vector<Mention>{{0, 1, EntityType::Task}}));
}

TEST(Flatten, Empty) { EXPECT_TRUE(flatten_relations({}).empty()); }

TEST(Flatten, OneRelationSixPairs) {
  std::vector<Relation4> r = {{"t", "d", "m", "x"}};
  EXPECT_EQ(flatten_relations(r).size(), 6u);
}

TEST(Flatten, SharedTaskDatasetGivesEleven) {
  std::vector<Relation4> r = {{"t", "d", "m1", "x1"}, {"t", "d", "m2", "x2"}};
  EXPECT_EQ(flatten_relations(r).size(), 11u);
  EXPECT_EQ(fixture::flatten_oracle(r).size(), 11u);
}

TEST(Flatten, BoundAndEquality) {
  Rng rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Relation4> rels;
    std::size_t n = uniform_index(rng, 5);
    for (std::size_t i = 0; i < n; ++i)
      rels.push_back({"t" + std::to_string(uniform_index(rng, 2)), "d" + std::to_string(uniform_index(rng, 2)),
                      "m" + std::to_string(uniform_index(rng, 3)), "x" + std::to_string(uniform_index(rng, 3))});
    auto got = flatten_relations(rels);
    auto want = fixture::flatten_oracle(rels);
    EXPECT_EQ(got.size(), want.size());
    EXPECT_LE(got.size(), 6 * rels.size());
    std::set<Relation4> uniq(rels.begin(), rels.end());
    if (got.size() == 6 * rels.size()) EXPECT_EQ(uniq.size(), rels.size());
  }
}
