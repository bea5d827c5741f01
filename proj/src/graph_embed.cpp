#include "citeie/graph_embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "citeie/errors.hpp"
#include "citeie/log.hpp"
#include "citeie/rng.hpp"

namespace citeie {

std::size_t WalkCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& w : walks) n += w.size();
  return n;
}

WalkCorpus generate_walks(const CitationGraph& g, const WalkParams& p) {
  if (p.walks_per_node < 1) throw UsageError("generate_walks: walks_per_node must be >= 1");
  if (p.walk_length < 2) throw UsageError("generate_walks: walk_length must be >= 2");
  WalkCorpus corpus;
  corpus.params = p;
  corpus.node_ids = g.node_ids();
  const std::size_t n = g.num_nodes();
  corpus.walks.resize(n * p.walks_per_node);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      std::size_t round = k / n;
      NodeIndex v = static_cast<NodeIndex>(k % n);
      Rng rng = stream(p.seed, v, round);
      auto& walk = corpus.walks[k];
      walk.reserve(p.walk_length);
      walk.push_back(v);
      while (walk.size() < p.walk_length) {
        auto nb = g.neighbors(walk.back());
        if (nb.empty()) break;
        walk.push_back(nb[uniform_index(rng, nb.size())]);
      }
    }
  };

  const std::size_t total = corpus.walks.size();
  const unsigned jobs = std::max(1u, p.jobs);
  if (jobs == 1 || total < 1024) {
    run(0, total);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back(run, total * t / jobs, total * (t + 1) / jobs);
    for (auto& th : pool) th.join();
  }
  return corpus;
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<std::string> ids,
                               std::vector<double> data)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
  if (data_.size() != dim_ * ids_.size())
    throw ValidationError("embedding table: data size does not match rows x dim");
  for (double x : data_)
    if (!std::isfinite(x)) throw ValidationError("embedding table: non-finite entry");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], i).second)
      throw ValidationError("embedding table: duplicate id '" + ids_[i] + "'");
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

std::vector<double> EmbeddingTable::lookup(std::string_view id) const {
  if (auto r = find(id)) return {r->begin(), r->end()};
  ++misses_;
  log::info("embedding lookup miss for '" + std::string(id) + "'");
  return std::vector<double>(dim_, 0.0);
}

// ---------------------------------------------------------------------------

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Cumulative unigram^0.75 table for negative draws.
class NegativeSampler {
public:
  explicit NegativeSampler(const std::vector<double>& counts) : cdf_(counts.size()) {
    double acc = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      acc += std::pow(counts[i], 0.75);
      cdf_[i] = acc;
    }
  }
  NodeIndex draw(Rng& rng) const {
    double u = uniform01(rng) * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<NodeIndex>(it - cdf_.begin());
  }

private:
  std::vector<double> cdf_;
};

struct Trainer {
  const WalkCorpus& corpus;
  const SkipGramParams& p;
  std::vector<double>& in;
  std::vector<double>& out;
  const NegativeSampler& sampler;
  double total_work;

  // One pass over walks[begin, end) in `order`; returns (loss sum, pairs).
  std::pair<double, std::size_t> pass(const std::vector<std::size_t>& order, std::size_t begin,
                                      std::size_t end, Rng& rng, std::atomic<std::size_t>& done) {
    const std::size_t dim = p.dim;
    std::vector<double> grad(dim);
    double loss = 0;
    std::size_t pairs = 0;
    for (std::size_t w = begin; w < end; ++w) {
      const auto& walk = corpus.walks[order[w]];
      std::size_t processed = done.fetch_add(walk.size());
      double lr = p.lr * std::max(1e-4, 1.0 - static_cast<double>(processed) / total_work);
      for (std::size_t i = 0; i < walk.size(); ++i) {
        std::size_t lo = i >= p.window ? i - p.window : 0;
        std::size_t hi = std::min(walk.size(), i + p.window + 1);
        double* u = &in[static_cast<std::size_t>(walk[i]) * dim];
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          NodeIndex ctx = walk[j];
          std::fill(grad.begin(), grad.end(), 0.0);
          auto step = [&](NodeIndex target, double label) {
            double* v = &out[static_cast<std::size_t>(target) * dim];
            double s = dot(u, v, dim);
            loss -= label > 0 ? log_sigmoid(s) : log_sigmoid(-s);
            double g = lr * (label - sigmoid(s));
            for (std::size_t d = 0; d < dim; ++d) {
              grad[d] += g * v[d];
              v[d] += g * u[d];
            }
          };
          step(ctx, 1.0);
          for (std::size_t k = 0; k < p.negatives; ++k) {
            NodeIndex neg = sampler.draw(rng);
            if (neg == ctx) continue;
            step(neg, 0.0);
          }
          for (std::size_t d = 0; d < dim; ++d) u[d] += grad[d];
          ++pairs;
        }
      }
    }
    return {loss, pairs};
  }
};

}  // namespace

SkipGramModel train_skipgram_model(const WalkCorpus& corpus, const SkipGramParams& p,
                                   const EpochCallback& on_epoch) {
  const std::size_t n = corpus.node_ids.size();
  const std::size_t tokens = corpus.token_count();
  if (n == 0 || tokens == 0) throw UsageError("train_skipgram: empty walk corpus");
  if (p.dim == 0 || p.epochs == 0) throw UsageError("train_skipgram: dim and epochs must be positive");

  std::vector<double> in(n * p.dim), out(n * p.dim, 0.0);
  Rng init = stream(p.seed, 1);
  for (double& x : in) x = uniform(init, -0.5, 0.5) / static_cast<double>(p.dim);

  std::vector<double> counts(n, 0.0);
  for (const auto& w : corpus.walks)
    for (NodeIndex v : w) counts[v] += 1.0;
  NegativeSampler sampler(counts);

  Trainer trainer{corpus, p, in, out, sampler, static_cast<double>(tokens * p.epochs)};
  std::atomic<std::size_t> done{0};
  SkipGramModel model;

  auto snapshot = [&] {
    model.input = EmbeddingTable(p.dim, corpus.node_ids, in);
    model.context = EmbeddingTable(p.dim, corpus.node_ids, out);
  };

  for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
    std::vector<std::size_t> order(corpus.walks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffler = stream(p.seed, 2, epoch);
    shuffle(order, shuffler);

    double loss = 0;
    std::size_t pairs = 0;
    const unsigned jobs = std::max(1u, p.jobs);
    if (p.mode == TrainMode::deterministic || jobs == 1) {
      Rng rng = stream(p.seed, 3, epoch);
      std::tie(loss, pairs) = trainer.pass(order, 0, order.size(), rng, done);
    } else {
      // Lock-free racy updates on the shared tables, as in word2vec.
      std::vector<std::pair<double, std::size_t>> partial(jobs);
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&, t] {
          Rng rng = stream(p.seed, 3, epoch * 1024 + t);
          partial[t] = trainer.pass(order, order.size() * t / jobs, order.size() * (t + 1) / jobs,
                                    rng, done);
        });
      }
      for (auto& th : pool) th.join();
      for (auto [l, c] : partial) {
        loss += l;
        pairs += c;
      }
    }
    double mean = pairs ? loss / static_cast<double>(pairs) : 0.0;
    if (!std::isfinite(mean))
      throw NumericalError("train_skipgram: non-finite loss at epoch " + std::to_string(epoch) +
                           " (lr " + std::to_string(p.lr) + " too high?)");
    for (double x : in)
      if (!std::isfinite(x)) throw NumericalError("train_skipgram: non-finite parameters");
    model.epoch_loss.push_back(mean);
    if (on_epoch) {
      snapshot();
      on_epoch(epoch, model);
    }
  }
  snapshot();
  return model;
}

EmbeddingTable train_skipgram(const WalkCorpus& corpus, const SkipGramParams& params) {
  return std::move(train_skipgram_model(corpus, params).input);
}

double sgns_pair_loss(std::span<const double> u, std::span<const double> v,
                      std::span<const std::span<const double>> negs) {
  double loss = -log_sigmoid(dot(u.data(), v.data(), u.size()));
  for (auto n : negs) loss -= log_sigmoid(-dot(u.data(), n.data(), u.size()));
  return loss;
}

void sgns_pair_grad(std::span<const double> u, std::span<const double> v,
                    std::span<const std::span<const double>> negs, std::span<double> gu,
                    std::span<double> gv, std::span<const std::span<double>> gn) {
  const std::size_t d = u.size();
  std::fill(gu.begin(), gu.end(), 0.0);
  // d/ds [-log s(s)] = s(s) - 1
  double a = sigmoid(dot(u.data(), v.data(), d)) - 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    gu[i] += a * v[i];
    gv[i] = a * u[i];
  }
  for (std::size_t k = 0; k < negs.size(); ++k) {
    // d/ds [-log s(-s)] = s(s)
    double b = sigmoid(dot(u.data(), negs[k].data(), d));
    for (std::size_t i = 0; i < d; ++i) {
      gu[i] += b * negs[k][i];
      gn[k][i] = b * u[i];
    }
  }
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = dot(a.data(), b.data(), a.size());
  double aa = dot(a.data(), a.data(), a.size());
  double bb = dot(b.data(), b.data(), b.size());
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[16] = {'C', 'I', 'T', 'E', 'I', 'E', '-', 'E', 'M', 'B', '-', 'v', '1', 0, 0, 0};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ValidationError("embedding file: truncated binary data");
  return v;
}

}  // namespace

void write_embeddings_text(std::ostream& out, const EmbeddingTable& t) {
  out << t.size() << ' ' << t.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.ids()[i];
    for (double x : t.row(i)) {
      auto r = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
}

EmbeddingTable read_embeddings_text(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing `N dim` header", 1);
  std::size_t n = 0, dim = 0;
  {
    std::istringstream hdr(line);
    if (!(hdr >> n >> dim) || dim == 0) throw ParseError("malformed `N dim` header", 1);
  }
  std::vector<std::string> ids;
  std::vector<double> data;
  ids.reserve(n);
  data.reserve(n * dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    const char* sp = std::find(p, end, ' ');
    ids.emplace_back(p, sp);
    p = sp;
    for (std::size_t d = 0; d < dim; ++d) {
      while (p < end && *p == ' ') ++p;
      double x;
      auto r = std::from_chars(p, end, x);
      if (r.ec != std::errc()) throw ParseError("expected " + std::to_string(dim) + " values", lineno);
      data.push_back(x);
      p = r.ptr;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) throw ParseError("trailing data after " + std::to_string(dim) + " values", lineno);
  }
  if (ids.size() != n)
    throw ValidationError("embedding file: header promises " + std::to_string(n) + " rows, found " +
                          std::to_string(ids.size()));
  return EmbeddingTable(dim, std::move(ids), std::move(data));
}

void write_embeddings_binary(std::ostream& out, const EmbeddingTable& t) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, t.size());
  put<std::uint64_t>(out, t.dim());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& id = t.ids()[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    auto r = t.row(i);
    out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size_bytes()));
  }
}

EmbeddingTable read_embeddings_binary(std::istream& in) {
  char magic[16];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw ValidationError("embedding file: bad binary magic");
  auto n = get<std::uint64_t>(in);
  auto dim = get<std::uint64_t>(in);
  std::vector<std::string> ids(n);
  std::vector<double> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto len = get<std::uint32_t>(in);
    ids[i].resize(len);
    in.read(ids[i].data(), len);
    in.read(reinterpret_cast<char*>(data.data() + i * dim),
            static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) throw ValidationError("embedding file: truncated binary data");
  }
  return EmbeddingTable(dim, std::move(ids), std::move(data));
}

void save_embeddings(const std::string& path, const EmbeddingTable& t) {
  bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw UsageError("cannot write embeddings '" + path + "'");
  if (binary) write_embeddings_binary(out, t);
  else write_embeddings_text(out, t);
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open embeddings '" + path + "'");
  char magic[16] = {};
  in.read(magic, sizeof magic);
  bool binary = in.gcount() == 16 && std::memcmp(magic, kMagic, sizeof magic) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_embeddings_binary(in) : read_embeddings_text(in);
}

}  // namespace citeie
