#include "commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <algorithm>

#include "CLI11.hpp"
#include "citeie/checkpoint.hpp"
#include "citeie/citation_graph.hpp"
#include "citeie/citation_text.hpp"
#include "citeie/config.hpp"
#include "citeie/corpus.hpp"
#include "citeie/errors.hpp"
#include "citeie/evaluation.hpp"
#include "citeie/graph_embed.hpp"
#include "citeie/linkage.hpp"
#include "citeie/log.hpp"
#include "citeie/pipeline.hpp"
#include "citeie/training.hpp"

namespace citeie::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string node_path(const RunConfig& c) { return c.resolve(c.graph) + ".nodes"; }
std::string edge_path(const RunConfig& c) { return c.resolve(c.graph) + ".edges"; }

std::string links_path(const RunConfig& c) {
  if (!c.links.empty()) return c.resolve(c.links);
  if (!c.graph.empty()) return c.resolve(c.graph) + ".links.tsv";
  throw UsageError("config: 'links' (or 'graph') is required");
}

std::string out_dir(const RunConfig& c, const std::string& dir, const char* fallback) {
  std::string d = c.resolve(dir.empty() ? fallback : dir);
  fs::create_directories(d);
  return d;
}

std::string checkpoint_path(const RunConfig& c, Task t, std::uint64_t seed) {
  return (fs::path(out_dir(c, c.checkpoints, "checkpoints")) /
          (std::string(to_string(t)) + "-seed" + std::to_string(seed) + ".ckpt"))
      .string();
}

std::vector<Task> selected_tasks(const RunConfig& c) {
  if (c.task == "all") return {Task::mention, Task::saliency, Task::relation};
  return {parse_task(c.task)};
}

std::vector<Document> load_split(const RunConfig& c, const std::string& path, const char* key) {
  if (path.empty()) throw UsageError(std::string("config: '") + key + "' is required");
  return load_corpus(c.resolve(path));
}

void header(std::ostream& out, const RunConfig& c, const char* command) {
  out << json{{"command", command}, {"config", c.to_map()}}.dump() << '\n';
}

// --- build-graph -------------------------------------------------------------

int cmd_build_graph(const RunConfig& c) {
  validate_inputs(c, {"store"});
  if (c.graph.empty()) throw UsageError("config: 'graph' output prefix is required");
  MetaStore store = load_store(c.resolve(c.store));
  if (store.size() == 0) log::warn("metadata store is empty; the graph will be empty");

  std::vector<DocIdentifiers> ids;
  if (!c.doc_ids.empty()) {
    validate_inputs(c, {"doc_ids"});
    ids = load_doc_identifiers(c.resolve(c.doc_ids));
  } else {
    for (const std::string* p : {&c.train_corpus, &c.dev_corpus, &c.test_corpus}) {
      if (p->empty()) continue;
      for (const auto& d : load_corpus(c.resolve(*p))) ids.push_back({d.doc_id, {}, {}, {}, d.doc_id});
    }
  }
  LinkMap links = link_records(ids, store);
  save_link_map(links_path(c), links);
  log::info("linked " + std::to_string(links.pairs.size()) + " documents, " +
            std::to_string(links.unmatched.size()) + " unmatched");

  std::set<std::string> seeds;
  for (const auto& [doc, rec] : links.pairs) seeds.insert(rec);
  GraphBuildResult built = build_graph(seeds, store);
  if (built.dropped_edges)
    log::warn("dropped " + std::to_string(built.dropped_edges) + " edges to records absent from the store");
  save_graph(node_path(c), edge_path(c), built.graph);

  std::set<std::string> report_ids = seeds;
  for (const auto& d : links.unmatched) report_ids.insert(d);
  DegreeReport deg = degree_stats(built.graph, report_ids);
  std::ofstream out(fs::path(out_dir(c, c.reports, "reports")) / "degree.jsonl");
  header(out, c, "build-graph");
  out << json{{"nodes", built.graph.num_nodes()},
              {"edges", built.graph.num_edges()},
              {"linked", links.pairs.size()},
              {"unmatched", links.unmatched.size()},
              {"dropped_edges", built.dropped_edges}}
             .dump()
      << '\n';
  for (const auto& d : deg.docs)
    out << json{{"id", d.id}, {"citations", d.citations}, {"references", d.references}, {"in_graph", d.in_graph}}.dump()
        << '\n';
  std::vector<std::vector<std::string>> rows;
  for (std::size_t b = 0; b < deg.citations.edges.size(); ++b) {
    std::string label = b + 1 < deg.citations.edges.size()
                            ? "[" + std::to_string(deg.citations.edges[b]) + "," + std::to_string(deg.citations.edges[b + 1]) + ")"
                            : "[" + std::to_string(deg.citations.edges[b]) + ",inf)";
    rows.push_back({label, std::to_string(deg.citations.counts[b]), std::to_string(deg.references.counts[b])});
    out << json{{"bucket", label}, {"citations", deg.citations.counts[b]}, {"references", deg.references.counts[b]}}.dump()
        << '\n';
  }
  std::cout << "nodes " << built.graph.num_nodes() << ", edges " << built.graph.num_edges() << ", linked "
            << links.pairs.size() << ", unmatched " << links.unmatched.size() << ", not in graph " << deg.missing
            << "\n"
            << format_table({"degree bucket", "citations", "references"}, rows);
  return 0;
}

// --- embed ---------------------------------------------------------------------

int cmd_embed(const RunConfig& c) {
  if (c.graph.empty()) throw UsageError("config: 'graph' is required");
  if (c.embeddings.empty()) throw UsageError("config: 'embeddings' output path is required");
  if (!fs::exists(edge_path(c))) throw UsageError("graph edge list does not exist: " + edge_path(c));
  CitationGraph g = load_graph(fs::exists(node_path(c)) ? node_path(c) : "", edge_path(c));
  WalkParams wp;
  wp.walks_per_node = c.walks_per_node;
  wp.walk_length = c.walk_length;
  wp.seed = c.seed;
  wp.jobs = c.jobs;
  WalkCorpus walks = generate_walks(g, wp);
  EmbeddingTable table(c.embed_dim, {}, {});
  if (walks.walks.empty()) {
    log::warn("graph is empty; writing an empty embedding table");
  } else {
    SkipGramParams sp;
    sp.dim = c.embed_dim;
    sp.window = c.window;
    sp.negatives = c.sgns_negatives;
    sp.epochs = c.embed_epochs;
    sp.lr = c.embed_lr;
    sp.seed = c.seed;
    sp.mode = c.deterministic ? TrainMode::deterministic : TrainMode::hogwild;
    sp.jobs = c.jobs;
    table = train_skipgram(walks, sp);
  }
  fs::path out = c.resolve(c.embeddings);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_embeddings(out.string(), table);
  std::cout << "embedded " << table.size() << " nodes, dim " << table.dim() << "\n";
  return 0;
}

// --- citances ------------------------------------------------------------------

int cmd_citances(const RunConfig& c) {
  validate_inputs(c, {"citing_docs"});
  if (c.citances.empty()) throw UsageError("config: 'citances' output path is required");
  std::string lp = links_path(c);
  if (!fs::exists(lp)) throw UsageError("link map does not exist: " + lp);
  LinkMap links = load_link_map(lp);
  auto citing = load_citing_docs(c.resolve(c.citing_docs));

  std::vector<Citance> all, train_only;
  std::set<std::string> train_docs;
  if (!c.train_corpus.empty())
    for (const auto& d : load_corpus(c.resolve(c.train_corpus))) train_docs.insert(d.doc_id);
  std::set<std::string> done;
  for (const std::string* p : {&c.train_corpus, &c.dev_corpus, &c.test_corpus}) {
    if (p->empty()) continue;
    for (const auto& d : load_corpus(c.resolve(*p))) {
      auto rec = links.record_for(d.doc_id);
      if (!rec || !done.insert(*rec).second) continue;
      auto cs = extract_citances(*rec, citing, c.max_citing, c.seed);
      if (train_docs.count(d.doc_id)) train_only.insert(train_only.end(), cs.begin(), cs.end());
      all.insert(all.end(), cs.begin(), cs.end());
    }
  }
  save_citances(c.resolve(c.citances), all);
  if (!c.idf.empty()) save_idf(c.resolve(c.idf), build_idf(train_only));
  std::cout << "extracted " << all.size() << " citances for " << done.size() << " cited documents\n";
  return 0;
}

// --- training / evaluation -------------------------------------------------------

struct Features {
  std::optional<LinkMap> links;
  std::optional<EmbeddingTable> embeddings;
  std::map<std::string, std::vector<Citance>> citances;
  std::optional<IdfTable> idf;

  FeatureSources sources(const RunConfig& c) const {
    FeatureSources s;
    s.links = links ? &*links : nullptr;
    s.embeddings = embeddings ? &*embeddings : nullptr;
    s.citances = &citances;
    s.idf = idf ? &*idf : nullptr;
    s.append_citances = c.use_citances;
    s.tfidf = c.use_tfidf;
    return s;
  }
};

Features load_features(const RunConfig& c) {
  Features f;
  bool fused = c.fusion_for(Task::saliency) != Fusion::none || c.fusion_for(Task::relation) != Fusion::none;
  if (fused || c.use_citances || c.use_tfidf) {
    std::string lp = links_path(c);
    if (!fs::exists(lp)) throw UsageError("link map does not exist: " + lp);
    f.links = load_link_map(lp);
  }
  if (fused) {
    validate_inputs(c, {"embeddings"});
    f.embeddings = load_embeddings(c.resolve(c.embeddings));
    if (f.embeddings->dim() != c.embed_dim)
      throw ValidationError("embeddings have dim " + std::to_string(f.embeddings->dim()) + ", config expects " +
                            std::to_string(c.embed_dim));
  }
  if (c.use_citances || c.use_tfidf) {
    validate_inputs(c, {"citances"});
    auto all = load_citances(c.resolve(c.citances));
    f.citances = group_by_target(all);
  }
  if (c.use_tfidf) {
    validate_inputs(c, {"idf"});
    f.idf = load_idf(c.resolve(c.idf));
  }
  return f;
}

int fan_out(const RunConfig& c, const std::vector<std::string>& args) {
  std::vector<pid_t> running;
  int worst = 0;
  auto reap = [&]() {
    int status = 0;
    pid_t pid = ::wait(&status);
    if (pid <= 0) return;
    std::erase(running, pid);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : 3;
    worst = std::max(worst, code);
  };
  for (std::uint64_t seed : c.seeds) {
    while (running.size() >= c.jobs) reap();
    std::vector<std::string> child = args;
    if (auto it = std::find(child.begin() + 1, child.end(), "pipeline"); it != child.end()) *it = "train";
    child.insert(child.end(), {"--set", "seeds=" + std::to_string(seed), "--jobs", "1"});
    pid_t pid = ::fork();
    if (pid < 0) throw UsageError("fork failed");
    if (pid == 0) {
      std::vector<char*> argv;
      for (auto& a : child) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv("/proc/self/exe", argv.data());
      std::_Exit(1);
    }
    running.push_back(pid);
  }
  while (!running.empty()) reap();
  return worst;
}

int cmd_train(const RunConfig& c, const std::vector<std::string>& args) {
  validate_inputs(c, {"train_corpus", "dev_corpus"});
  if (c.jobs > 1 && c.seeds.size() > 1) return fan_out(c, args);
  Features f = load_features(c);
  PreparedDocs train = prepare_inputs(load_split(c, c.train_corpus, "train_corpus"), f.sources(c));
  PreparedDocs dev = prepare_inputs(load_split(c, c.dev_corpus, "dev_corpus"), f.sources(c));
  Vocab vocab = Vocab::build(train.docs);
  for (std::uint64_t seed : c.seeds) {
    TrainConfig tc = c.train;
    tc.seed = seed;
    for (Task t : selected_tasks(c)) {
      ModelConfig mc = c.model_config(t, seed);
      TrainHistory h;
      std::string path = checkpoint_path(c, t, seed);
      if (t == Task::mention) {
        MentionModel m(mc, vocab);
        h = train_mention(m, train.inputs, dev.inputs, tc);
        save_checkpoint(path, m, 0.5);
      } else if (t == Task::saliency) {
        SaliencyModel m(mc, vocab);
        h = train_saliency(m, train.inputs, dev.inputs, tc);
        save_checkpoint(path, m, m.threshold());
      } else {
        RelationModel m(mc, vocab);
        h = train_relation(m, train.inputs, dev.inputs, tc);
        save_checkpoint(path, m, m.threshold());
      }
      json hist = json::array();
      for (const auto& e : h.epochs)
        hist.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"val_f1", e.val_f1}, {"score", e.score}});
      std::ofstream(path + ".history.json")
          << json{{"task", to_string(t)},
                  {"seed", seed},
                  {"best_epoch", h.best_epoch},
                  {"stopped_early", h.stopped_early},
                  {"threshold", h.threshold.theta},
                  {"epochs", hist},
                  {"config", c.to_map()}}
                 .dump(2)
          << '\n';
      std::cout << to_string(t) << " seed " << seed << ": " << h.epochs.size() << " epochs, best " << h.best_epoch
                << ", threshold " << h.threshold.theta << " -> " << path << "\n";
    }
  }
  return 0;
}

int cmd_eval(const RunConfig& c) {
  validate_inputs(c, {"test_corpus"});
  Features f = load_features(c);
  PreparedDocs test = prepare_inputs(load_split(c, c.test_corpus, "test_corpus"), f.sources(c));
  std::string reports = out_dir(c, c.reports, "reports");

  std::optional<CitationGraph> graph;
  if (!c.graph.empty() && fs::exists(edge_path(c)) && f.links)
    graph = load_graph(fs::exists(node_path(c)) ? node_path(c) : "", edge_path(c));

  std::ofstream summary(fs::path(reports) / "summary.jsonl");
  header(summary, c, "eval");
  const std::vector<std::string> names = {"mention", "salient clusters", "salient mentions (gold input)",
                                          "relation doc 4-ary", "relation doc binary", "relation corpus 4-ary",
                                          "relation corpus binary"};
  std::vector<std::vector<double>> per_seed;
  for (std::uint64_t seed : c.seeds) {
    auto mention = load_model<MentionModel>(checkpoint_path(c, Task::mention, seed));
    auto saliency = load_model<SaliencyModel>(checkpoint_path(c, Task::saliency, seed));
    auto relation = load_model<RelationModel>(checkpoint_path(c, Task::relation, seed));
    Pipeline pipe{&mention, &saliency, &relation, surface_coref};
    std::vector<DocOutcome> outcomes;
    for (std::size_t i = 0; i < test.inputs.size(); ++i) {
      DocPrediction p = pipe.predict(test.inputs[i]);
      if (grounded_in_citance(p, test.docs[i]))
        throw ValidationError("document '" + p.doc_id + "': prediction grounded in a citance section");
      outcomes.push_back(score_document(p, test.docs[i]));
    }
    std::ofstream(fs::path(reports) / ("outcomes-seed" + std::to_string(seed) + ".jsonl"))
        << [&] {
             std::ostringstream o;
             write_outcomes(o, outcomes);
             return o.str();
           }();
    EvalSummary s = summarize(outcomes);
    PRF gold_sal = saliency_mention_prf(saliency, test.inputs);
    json rec = {{"seed", seed}, {"summary", to_json(s)}, {"salient_mentions_gold_input", to_json(gold_sal)}};
    if (graph) {
      DocRelations pred, gold;
      for (const auto& o : outcomes) {
        pred[o.doc_id] = o.pred_relations;
        gold[o.doc_id] = o.gold_relations;
      }
      rec["citation_buckets"] = to_json(bucket_by_citations(pred, gold, *graph, *f.links, 4));
    }
    summary << rec.dump() << '\n';
    per_seed.push_back({s.mention.macro.f1, s.saliency.f1, gold_sal.f1, s.relation4.f1, s.relation2.f1,
                        s.corpus4.macro_f1, s.corpus2.macro_f1});
  }
  std::vector<double> mean(names.size(), 0.0);
  for (const auto& r : per_seed)
    for (std::size_t k = 0; k < r.size(); ++k) mean[k] += r[k] / static_cast<double>(per_seed.size());
  json agg = json::object();
  for (std::size_t k = 0; k < names.size(); ++k) agg[names[k]] = mean[k];
  summary << json{{"aggregate", "mean over seeds"}, {"seeds", c.seeds}, {"f1", agg}}.dump() << '\n';

  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<std::string> row{names[k]};
    for (const auto& r : per_seed) row.push_back(fmt_score(r[k]));
    row.push_back(fmt_score(mean[k]));
    rows.push_back(row);
  }
  std::vector<std::string> head{"F1"};
  for (auto s : c.seeds) head.push_back("seed " + std::to_string(s));
  head.push_back("mean");
  std::string table = "# empty gold and prediction scores (1, 1, 1)\n" + format_table(head, rows);
  std::ofstream(fs::path(reports) / "summary.txt") << c.to_text() << "\n" << table;
  std::cout << table;
  return 0;
}

// --- significance ----------------------------------------------------------------

int cmd_significance(const RunConfig& c, const std::vector<std::string>& a_paths,
                     const std::vector<std::string>& b_paths, const std::string& metric_name,
                     const std::string& out_path) {
  if (a_paths.empty() || b_paths.empty()) throw UsageError("significance needs --a and --b outcome files");
  Metric metric = parse_metric(metric_name);
  auto load_sorted = [&](const std::string& p) {
    auto os = load_outcomes(c.resolve(p));
    std::sort(os.begin(), os.end(), [](const auto& x, const auto& y) { return x.doc_id < y.doc_id; });
    return os;
  };
  std::vector<std::vector<DocOutcome>> a, b;
  for (const auto& p : a_paths) a.push_back(load_sorted(p));
  for (const auto& p : b_paths) b.push_back(load_sorted(p));
  auto ids = [](const std::vector<DocOutcome>& os) {
    std::vector<std::string> v;
    for (const auto& o : os) v.push_back(o.doc_id);
    return v;
  };
  const auto ref = ids(a.front());
  if (std::adjacent_find(ref.begin(), ref.end()) != ref.end())
    throw ValidationError("outcome file " + a_paths.front() + " repeats a doc_id");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (ids(a[i]) != ref) throw ValidationError("mismatched test sets: " + a_paths[i] + " vs " + a_paths.front());
  for (std::size_t i = 0; i < b.size(); ++i)
    if (ids(b[i]) != ref) throw ValidationError("mismatched test sets: " + b_paths[i] + " vs " + a_paths.front());

  BootstrapOptions opts;
  opts.n_resamples = c.n_resamples;
  opts.seed = c.seed;
  opts.two_sided = c.two_sided;
  opts.jobs = c.jobs;
  auto fn = [metric](const std::vector<DocOutcome>& items) { return metric_value(metric, items); };
  BootstrapResult r = (a.size() == 1 && b.size() == 1) ? paired_bootstrap(a[0], b[0], fn, opts)
                                                       : hierarchical_bootstrap(a, b, fn, opts);
  json j = to_json(r);
  j["metric"] = to_string(metric);
  j["a"] = a_paths;
  j["b"] = b_paths;
  if (!out_path.empty()) std::ofstream(c.resolve(out_path)) << j.dump() << '\n';
  std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"citation-aware scientific information extraction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool deterministic = false, hogwild = false, verbose = false, quiet = false;
  app.add_option("--config", config_path, "key = value configuration file");
  auto* set_opt = app.add_option("--set", sets, "override one setting, key=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", seed, "seed for walks, sampling and bootstrap")
                       ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads or per-seed processes")
                       ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_flag("--deterministic", deterministic, "single-threaded reproducible embedding training");
  app.add_flag("--hogwild", hogwild, "lock-free parallel embedding training");
  app.add_flag("-v,--verbose", verbose, "log progress");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");
  (void)set_opt;

  auto* build = app.add_subcommand("build-graph", "link the corpus to the store and build the radius-2 graph");
  auto* embed = app.add_subcommand("embed", "DeepWalk embeddings of the graph");
  std::size_t dim = 0;
  embed->add_option("--dim", dim, "embedding dimension");
  auto* cit = app.add_subcommand("citances", "extract citances and the training-split IDF table");
  auto* train = app.add_subcommand("train", "train task models on gold inputs, one checkpoint per seed");
  std::string task;
  train->add_option("--task", task, "mention | saliency | relation | all");
  auto* eval = app.add_subcommand("eval", "end-to-end evaluation of trained checkpoints");
  auto* pipe = app.add_subcommand("pipeline", "train then eval");
  pipe->add_option("--task", task, "mention | saliency | relation | all");
  auto* sig = app.add_subcommand("significance", "paired or hierarchical bootstrap over outcome files");
  std::vector<std::string> a_paths, b_paths;
  std::string metric = "relation4", sig_out;
  sig->add_option("--a", a_paths, "outcome files of system A (proposed), one per seed")->required();
  sig->add_option("--b", b_paths, "outcome files of system B, one per seed")->required();
  sig->add_option("--metric", metric, "mention | saliency | relation4 | relation2 | corpus4 | corpus2");
  sig->add_option("--out", sig_out, "write the result record here");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    log::level() = quiet ? log::Level::quiet : verbose ? log::Level::info : log::Level::warn;
    RunConfig cfg = config_path.empty() ? default_run_config() : load_run_config(config_path);
    for (const auto& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_opt->count()) cfg.seed = seed;
    if (jobs_opt->count()) cfg.jobs = std::max(1u, jobs);
    if (deterministic && hogwild) throw UsageError("--deterministic and --hogwild are exclusive");
    if (deterministic) cfg.deterministic = true;
    if (hogwild) cfg.deterministic = false;
    if (dim) cfg.embed_dim = dim;
    if (!task.empty()) cfg.set("task", task);
    if (cfg.seeds.empty()) throw UsageError("config: seed list is empty");

    if (*build) return cmd_build_graph(cfg);
    if (*embed) return cmd_embed(cfg);
    if (*cit) return cmd_citances(cfg);
    if (*train) return cmd_train(cfg, args);
    if (*eval) return cmd_eval(cfg);
    if (*pipe) {
      int rc = cmd_train(cfg, args);
      return rc ? rc : cmd_eval(cfg);
    }
    if (*sig) return cmd_significance(cfg, a_paths, b_paths, metric, sig_out);
    return static_cast<int>(ErrorKind::usage);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::validation);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::usage);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::validation);
  }
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace citeie::cli
