#include "citeie/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "citeie/errors.hpp"

namespace citeie {

namespace {

constexpr char kMagic[12] = {'C', 'I', 'T', 'E', 'I', 'E', '-', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ValidationError("checkpoint: truncated file");
  return v;
}

std::string get_str(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  if (n > (1ULL << 32)) throw ValidationError("checkpoint: corrupt string length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ValidationError("checkpoint: truncated file");
  return s;
}

}  // namespace

std::string model_config_to_text(const ModelConfig& c) {
  std::ostringstream o;
  o << "task=" << to_string(c.task) << '\n'
    << "d_tok=" << c.encoder.d_tok << '\n'
    << "d_ctx=" << c.encoder.d_ctx << '\n'
    << "max_section_len=" << c.encoder.max_section_len << '\n'
    << "hidden=" << c.hidden << '\n'
    << "d_span=" << c.d_span << '\n'
    << "d_rel=" << c.d_rel << '\n'
    << "graph_dim=" << c.graph_dim << '\n'
    << "fusion=" << to_string(c.fusion) << '\n'
    << "use_tfidf=" << (c.use_tfidf ? 1 : 0) << '\n'
    << "seed=" << c.seed << '\n';
  return o.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ValidationError(std::string("checkpoint config: missing key ") + k);
    return it->second;
  };
  auto num = [&](const char* k) { return static_cast<std::size_t>(std::stoull(need(k))); };
  ModelConfig c;
  c.task = parse_task(need("task"));
  c.encoder.d_tok = num("d_tok");
  c.encoder.d_ctx = num("d_ctx");
  c.encoder.max_section_len = num("max_section_len");
  c.hidden = num("hidden");
  c.d_span = num("d_span");
  c.d_rel = num("d_rel");
  c.graph_dim = num("graph_dim");
  c.fusion = parse_fusion(need("fusion"));
  c.use_tfidf = need("use_tfidf") == "1";
  c.seed = std::stoull(need("seed"));
  return c;
}

void write_checkpoint(std::ostream& out, TaskModel& model, double threshold) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, model_config_to_text(model.config()));
  const auto& toks = model.encoder().vocab().tokens();
  put<std::uint64_t>(out, toks.size());
  for (const auto& t : toks) put_str(out, t);
  put<double>(out, threshold);
  auto params = model.params();
  put<std::uint64_t>(out, params.size());
  for (const nn::Param* p : params) {
    put_str(out, p->name);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ValidationError("checkpoint: bad magic");
  auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config = model_config_from_text(get_str(in));
  auto nv = get<std::uint64_t>(in);
  ck.vocab.reserve(nv);
  for (std::uint64_t i = 0; i < nv; ++i) ck.vocab.push_back(get_str(in));
  ck.threshold = get<double>(in);
  auto np = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < np; ++i) {
    std::string name = get_str(in);
    auto rows = get<std::uint64_t>(in);
    auto cols = get<std::uint64_t>(in);
    if (rows * cols > (1ULL << 31)) throw ValidationError("checkpoint: corrupt tensor shape for " + name);
    nn::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() && !in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
      throw ValidationError("checkpoint: truncated tensor " + name);
    ck.params.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

void save_checkpoint(const std::string& path, TaskModel& model, double threshold) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write checkpoint " + path);
  write_checkpoint(out, model, threshold);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

void apply_checkpoint(TaskModel& model, const Checkpoint& ck) {
  auto params = model.params();
  if (params.size() != ck.params.size())
    throw ValidationError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                          std::to_string(ck.params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = ck.params[i];
    if (name != params[i]->name || value.rows() != params[i]->value.rows() ||
        value.cols() != params[i]->value.cols())
      throw ValidationError("checkpoint: tensor " + std::to_string(i) + " ('" + name +
                            "') does not match model tensor '" + params[i]->name + "'");
    params[i]->value = value;
  }
}

}  // namespace citeie
