#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../tools/commands.hpp"
#include "citeie/citation_graph.hpp"
#include "citeie/corpus.hpp"
#include "citeie/linkage.hpp"
#include "citeie/pipeline.hpp"
#include "support.hpp"

using namespace citeie;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("citeie-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "citeie");
    return cli::run(args);
  }

  void write_store_file(const std::string& name, std::vector<MetaRecord> recs) {
    for (auto& r : recs) r.s2_id = r.record_id;
    std::ofstream out(path(name));
    write_store(out, MetaStore(std::move(recs)));
  }

  void write_docs(const std::string& name, const std::vector<Document>& docs) {
    std::ofstream out(path(name));
    write_corpus(out, docs);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

std::vector<Document> stub_docs(const std::vector<std::string>& ids) {
  std::vector<Document> out;
  for (const auto& id : ids) out.push_back(fixture::make_doc(id, {fixture::body("a b")}));
  return out;
}

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"no-such-command"}), 1);
  EXPECT_EQ(run({"--set", "not_a_key=1", "build-graph"}), 1);
  EXPECT_EQ(run({"--set", "noequals", "build-graph"}), 1);
  EXPECT_EQ(run({"significance"}), 1);  // --a and --b required
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Cli, MissingStoreIsNonZero) {
  int rc = run({"--set", "store=" + path("absent.jsonl"), "--set", "graph=" + path("g"), "build-graph"});
  EXPECT_NE(rc, 0);
  EXPECT_FALSE(fs::exists(path("g.edges")));
}

TEST_F(Cli, MalformedCorpusIsDataError) {
  write_store_file("store.jsonl", {});
  std::ofstream(path("bad.jsonl")) << "{broken\n";
  int rc = run({"--set", "store=" + path("store.jsonl"), "--set", "graph=" + path("g"), "--set",
                "train_corpus=" + path("bad.jsonl"), "build-graph"});
  EXPECT_EQ(rc, 2);
}

TEST_F(Cli, EmptyStoreWarnsAndSucceeds) {
  std::ofstream(path("store.jsonl")).close();
  write_docs("train.jsonl", stub_docs({"x", "y"}));
  ::testing::internal::CaptureStderr();
  int rc = run({"--set", "store=" + path("store.jsonl"), "--set", "graph=" + path("g"), "--set",
                "train_corpus=" + path("train.jsonl"), "--set", "reports=" + path("reports"), "build-graph"});
  std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, 0);
  EXPECT_NE(err.find("empty"), std::string::npos);
  auto g = load_graph(path("g.nodes"), path("g.edges"));
  EXPECT_EQ(g.num_nodes(), 0u);
  auto links = load_link_map(path("g.links.tsv"));
  EXPECT_EQ(links.unmatched, (std::vector<std::string>{"x", "y"}));

  // embedding an empty graph yields an empty table
  ::testing::internal::CaptureStderr();
  rc = run({"--set", "graph=" + path("g"), "--set", "embeddings=" + path("e.txt"), "embed"});
  ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(rc, 0);
  EXPECT_EQ(load_embeddings(path("e.txt")).size(), 0u);
}

TEST_F(Cli, BuildGraphMatchesBfs) {
  auto recs = fixture::random_store(300, 2, 17);
  write_store_file("store.jsonl", recs);
  write_docs("train.jsonl", stub_docs({"r3", "r150", "nolink"}));
  write_docs("test.jsonl", stub_docs({"r42"}));
  int rc = run({"--quiet", "--set", "store=" + path("store.jsonl"), "--set", "graph=" + path("g"), "--set",
                "train_corpus=" + path("train.jsonl"), "--set", "test_corpus=" + path("test.jsonl"), "--set",
                "reports=" + path("reports"), "build-graph"});
  ASSERT_EQ(rc, 0);
  auto g = load_graph(path("g.nodes"), path("g.edges"));
  auto want = fixture::bfs_oracle(recs, {"r3", "r150", "r42"}, 2);
  std::set<std::string> got(g.node_ids().begin(), g.node_ids().end());
  EXPECT_EQ(got, want);
  auto links = load_link_map(path("g.links.tsv"));
  EXPECT_EQ(links.pairs.size(), 3u);
  EXPECT_EQ(links.unmatched, (std::vector<std::string>{"nolink"}));
  EXPECT_TRUE(fs::exists(path("reports/degree.jsonl")));
}

TEST_F(Cli, EmbedHeaderAndReproducible) {
  auto recs = fixture::random_store(40, 3, 2);
  write_store_file("store.jsonl", recs);
  write_docs("train.jsonl", stub_docs({"r0", "r1"}));
  ASSERT_EQ(run({"-q", "--set", "store=" + path("store.jsonl"), "--set", "graph=" + path("g"), "--set",
                 "train_corpus=" + path("train.jsonl"), "--set", "reports=" + path("r"), "build-graph"}),
            0);
  auto g = load_graph(path("g.nodes"), path("g.edges"));
  std::vector<std::string> common = {"--set", "graph=" + path("g"), "--set", "walks_per_node=3", "--set",
                                     "walk_length=10", "--set", "embed_epochs=2", "--seed", "5", "--deterministic",
                                     "embed", "--dim", "16"};
  auto first = common;
  first.insert(first.begin(), {"--set", "embeddings=" + path("a.txt")});
  auto second = common;
  second.insert(second.begin(), {"--set", "embeddings=" + path("b.txt")});
  ASSERT_EQ(run(first), 0);
  ASSERT_EQ(run(second), 0);
  std::string a = slurp(path("a.txt"));
  EXPECT_EQ(a, slurp(path("b.txt")));
  std::string head = a.substr(0, a.find('\n'));
  EXPECT_EQ(head, std::to_string(g.num_nodes()) + " 16");
  EXPECT_EQ(load_embeddings(path("a.txt")).dim(), 16u);
}

TEST_F(Cli, EmbedWithoutGraphIsUsageError) {
  EXPECT_EQ(run({"--set", "graph=" + path("none"), "--set", "embeddings=" + path("e.txt"), "embed"}), 1);
}

TEST_F(Cli, PipelineCheckpointsAndSignificance) {
  auto pc = fixture::planted_saliency_corpus(16, 3);
  // give clusters c0..c3 one type each so salient documents carry a relation
  for (auto& d : pc.docs) {
    for (std::size_t k = 0; k < 4; ++k) {
      auto it = d.clusters.find("c" + std::to_string(k));
      if (it == d.clusters.end()) continue;
      for (std::size_t m : it->second) d.mentions[m].type = kEntityTypes[k];
    }
    if (d.clusters.size() >= 4 && d.salient.size() >= 4) d.relations = {{"c0", "c1", "c2", "c3"}};
    validate(d);
  }
  std::vector<Document> train(pc.docs.begin(), pc.docs.begin() + 10), dev(pc.docs.begin() + 10, pc.docs.begin() + 13),
      test(pc.docs.begin() + 13, pc.docs.end());
  write_docs("train.jsonl", train);
  write_docs("dev.jsonl", dev);
  write_docs("test.jsonl", test);
  write_store_file("store.jsonl", pc.store);
  std::vector<std::string> base = {"-q",
                                   "--set", "store=" + path("store.jsonl"),
                                   "--set", "graph=" + path("g"),
                                   "--set", "train_corpus=" + path("train.jsonl"),
                                   "--set", "dev_corpus=" + path("dev.jsonl"),
                                   "--set", "test_corpus=" + path("test.jsonl"),
                                   "--set", "embeddings=" + path("emb.txt"),
                                   "--set", "checkpoints=" + path("ckpt"),
                                   "--set", "reports=" + path("reports"),
                                   "--set", "embed_dim=8",
                                   "--set", "walks_per_node=2",
                                   "--set", "walk_length=8",
                                   "--set", "embed_epochs=1",
                                   "--set", "d_tok=8",
                                   "--set", "d_ctx=8",
                                   "--set", "hidden=8",
                                   "--set", "d_span=8",
                                   "--set", "d_rel=8",
                                   "--set", "epochs=2",
                                   "--set", "use_graph=true",
                                   "--set", "seeds=1,2,3",
                                   "--set", "n_resamples=1000"};
  auto with = [&](std::vector<std::string> tail) {
    auto a = base;
    a.insert(a.end(), tail.begin(), tail.end());
    return a;
  };
  ASSERT_EQ(run(with({"build-graph"})), 0);
  ASSERT_EQ(run(with({"embed"})), 0);
  ASSERT_EQ(run(with({"pipeline"})), 0);
  for (const char* t : {"mention", "saliency", "relation"})
    for (int s : {1, 2, 3}) EXPECT_TRUE(fs::exists(path("ckpt/" + std::string(t) + "-seed" + std::to_string(s) + ".ckpt")));

  std::ifstream summary(path("reports/summary.jsonl"));
  std::string line, last;
  std::size_t n = 0;
  while (std::getline(summary, line)) {
    last = line;
    ++n;
  }
  EXPECT_EQ(n, 5u);  // header, 3 seeds, aggregate
  auto agg = nlohmann::json::parse(last);
  EXPECT_EQ(agg.at("aggregate"), "mean over seeds");
  EXPECT_EQ(agg.at("seeds").size(), 3u);

  std::string o1 = path("reports/outcomes-seed1.jsonl"), o2 = path("reports/outcomes-seed2.jsonl");
  EXPECT_EQ(load_outcomes(o1).size(), 3u);
  ASSERT_EQ(run(with({"significance", "--a", o1, "--b", o1, "--metric", "saliency", "--out", path("sig.json")})), 0);
  auto sig = nlohmann::json::parse(slurp(path("sig.json")));
  EXPECT_EQ(sig.at("p_value"), 1.0);
  EXPECT_FALSE(sig.at("hierarchical").get<bool>());
  ASSERT_EQ(run(with({"significance", "--a", o1, o2, "--b", o2, o1, "--out", path("h.json")})), 0);
  EXPECT_TRUE(nlohmann::json::parse(slurp(path("h.json"))).at("hierarchical").get<bool>());

  // drop one document from a copy: test sets no longer align
  auto os = load_outcomes(o1);
  os.pop_back();
  {
    std::ofstream out(path("short.jsonl"));
    write_outcomes(out, os);
  }
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run(with({"significance", "--a", o1, "--b", path("short.jsonl")})), 2);
  std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("mismatched"), std::string::npos);
  EXPECT_EQ(run(with({"significance", "--a", o1, "--b", o1, "--metric", "bogus"})), 1);
}
