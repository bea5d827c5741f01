#include "citeie/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "citeie/errors.hpp"

namespace citeie {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config: bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("config: bad boolean '" + v + "' for " + key);
}

std::string fmt_double(double d) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field size_field(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_num<T>(k, v); },
          [m](const RunConfig& c) { return std::to_string(c.*m); }};
}
Field str_field(std::string RunConfig::*m) {
  return {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const RunConfig& c) { return c.*m; }};
}
Field bool_field(bool RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}
Field double_field(double RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_num<double>(k, v); },
          [m](const RunConfig& c) { return fmt_double(c.*m); }};
}
template <class T>
Field train_field(T TrainConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.train.*m = parse_num<T>(k, v); },
          [m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.train.*m);
            else return std::to_string(c.train.*m);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"train_corpus", str_field(&RunConfig::train_corpus)},
      {"dev_corpus", str_field(&RunConfig::dev_corpus)},
      {"test_corpus", str_field(&RunConfig::test_corpus)},
      {"doc_ids", str_field(&RunConfig::doc_ids)},
      {"store", str_field(&RunConfig::store)},
      {"citing_docs", str_field(&RunConfig::citing_docs)},
      {"graph", str_field(&RunConfig::graph)},
      {"links", str_field(&RunConfig::links)},
      {"embeddings", str_field(&RunConfig::embeddings)},
      {"citances", str_field(&RunConfig::citances)},
      {"idf", str_field(&RunConfig::idf)},
      {"checkpoints", str_field(&RunConfig::checkpoints)},
      {"reports", str_field(&RunConfig::reports)},
      {"task",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v != "all") parse_task(v);
          c.task = v;
        },
        [](const RunConfig& c) { return c.task; }}},
      {"fusion",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          if (v == "default") c.fusion.reset();
          else c.fusion = parse_fusion(v);
        },
        [](const RunConfig& c) { return c.fusion ? std::string(to_string(*c.fusion)) : std::string("default"); }}},
      {"use_citances", bool_field(&RunConfig::use_citances)},
      {"use_tfidf", bool_field(&RunConfig::use_tfidf)},
      {"use_graph", bool_field(&RunConfig::use_graph)},
      {"seeds",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seeds.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ','))
            if (!trim(item).empty()) c.seeds.push_back(parse_num<std::uint64_t>(k, trim(item)));
        },
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
          return s;
        }}},
      {"d_tok", size_field(&RunConfig::d_tok)},
      {"d_ctx", size_field(&RunConfig::d_ctx)},
      {"hidden", size_field(&RunConfig::hidden)},
      {"d_span", size_field(&RunConfig::d_span)},
      {"d_rel", size_field(&RunConfig::d_rel)},
      {"max_section_len", size_field(&RunConfig::max_section_len)},
      {"epochs", train_field(&TrainConfig::max_epochs)},
      {"patience", train_field(&TrainConfig::patience)},
      {"batch_size", train_field(&TrainConfig::batch_size)},
      {"lr", train_field(&TrainConfig::lr)},
      {"clip_norm", train_field(&TrainConfig::clip_norm)},
      {"neg_ratio", train_field(&TrainConfig::neg_ratio)},
      {"embed_dim", size_field(&RunConfig::embed_dim)},
      {"walks_per_node", size_field(&RunConfig::walks_per_node)},
      {"walk_length", size_field(&RunConfig::walk_length)},
      {"window", size_field(&RunConfig::window)},
      {"sgns_negatives", size_field(&RunConfig::sgns_negatives)},
      {"embed_epochs", size_field(&RunConfig::embed_epochs)},
      {"embed_lr", double_field(&RunConfig::embed_lr)},
      {"max_citing", size_field(&RunConfig::max_citing)},
      {"n_resamples", size_field(&RunConfig::n_resamples)},
      {"two_sided", bool_field(&RunConfig::two_sided)},
      {"seed", size_field(&RunConfig::seed)},
      {"jobs", size_field(&RunConfig::jobs)},
      {"deterministic", bool_field(&RunConfig::deterministic)},
  };
  return f;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  out["data_root"] = data_root;
  return out;
}

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : to_map()) s += k + " = " + v + "\n";
  return s;
}

std::string RunConfig::resolve(const std::string& path) const {
  if (path.empty() || data_root.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(data_root) / path).string();
}

Fusion RunConfig::fusion_for(Task t) const {
  if (fusion) return *fusion;
  if (!use_graph) return Fusion::none;
  return t == Task::relation ? Fusion::stage1 : Fusion::stage2;
}

ModelConfig RunConfig::model_config(Task t, std::uint64_t s) const {
  ModelConfig m;
  m.task = t;
  m.encoder = {d_tok, d_ctx, max_section_len};
  m.hidden = hidden;
  m.d_span = d_span;
  m.d_rel = d_rel;
  m.graph_dim = embed_dim;
  m.fusion = t == Task::mention ? Fusion::none : fusion_for(t);
  m.use_tfidf = t == Task::saliency && use_tfidf;
  m.seed = s;
  return m;
}

RunConfig default_run_config() {
  RunConfig c;
  if (const char* root = std::getenv(kDataRootEnv)) c.data_root = root;
  return c;
}

RunConfig read_run_config(std::istream& in, const std::string& data_root) {
  RunConfig c = default_run_config();
  if (!data_root.empty()) c.data_root = data_root;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "data_root") {
      c.data_root = value;
      continue;
    }
    try {
      c.set(key, value);
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  return read_run_config(in, "");
}

void validate_inputs(const RunConfig& cfg, const std::vector<std::string>& required) {
  auto values = cfg.to_map();
  for (const auto& key : required) {
    auto it = values.find(key);
    if (it == values.end() || it->second.empty()) throw UsageError("config: '" + key + "' is required");
    std::string path = cfg.resolve(it->second);
    if (!fs::exists(path)) throw UsageError("config: " + key + " path does not exist: " + path);
  }
  if (cfg.seeds.empty()) throw UsageError("config: seed list is empty");
  bool fused = cfg.fusion_for(Task::saliency) != Fusion::none || cfg.fusion_for(Task::relation) != Fusion::none;
  if (fused && cfg.embeddings.empty())
    throw UsageError("config: graph fusion requires an embeddings path");
}

}  // namespace citeie
