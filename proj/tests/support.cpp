#include "support.hpp"

#include "pdgkit/parser.hpp"
#include "pdgkit/verifier.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pdgkit::testing {

namespace fs = std::filesystem;

std::string readText(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Module parseChecked(std::string_view text) {
  Module m = parseModule(text);
  auto diags = verifyModule(m);
  if (!diags.empty()) throw std::runtime_error("invalid test module: " + formatDiagnostic(diags.front()));
  return m;
}

namespace {

std::vector<int64_t> parseInts(const std::string &s) {
  std::istringstream is(s);
  std::vector<int64_t> out;
  int64_t v;
  while (is >> v) out.push_back(v);
  return out;
}

std::vector<CorpusProgram> loadCorpus() {
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(PDGKIT_CORPUS_DIR))
    if (e.path().extension() == ".ir") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<CorpusProgram> out;
  for (const auto &f : files) {
    CorpusProgram p;
    p.name = f.stem().string();
    p.path = f.string();
    p.text = readText(p.path);
    p.module = parseChecked(p.text);
    std::istringstream is(p.text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.rfind("# input:", 0) == 0) p.inputs.push_back(parseInts(line.substr(8)));
      if (line.rfind("# random-args:", 0) == 0) {
        auto v = parseInts(line.substr(14));
        for (size_t k = 0; k + 1 < v.size(); k += 2) p.ranges.emplace_back(v[k], v[k + 1]);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

} // namespace

std::vector<std::vector<int64_t>> CorpusProgram::randomInputs(size_t n, uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int64_t>> out;
  for (size_t k = 0; k < n; ++k) {
    std::vector<int64_t> in;
    for (auto [lo, hi] : ranges) in.push_back(std::uniform_int_distribution<int64_t>(lo, hi)(rng));
    out.push_back(std::move(in));
  }
  return out;
}

std::vector<std::vector<int64_t>> CorpusProgram::allInputs(size_t extra, uint64_t seed) const {
  auto out = inputs;
  for (auto &v : randomInputs(extra, seed)) out.push_back(std::move(v));
  return out;
}

const std::vector<CorpusProgram> &corpus() {
  static const std::vector<CorpusProgram> c = loadCorpus();
  return c;
}

const CorpusProgram &corpusProgram(std::string_view name) {
  for (const auto &p : corpus())
    if (p.name == name) return p;
  throw std::runtime_error("no corpus program " + std::string(name));
}

std::string randomCfgText(std::mt19937_64 &rng, size_t blocks, bool mustReachExit) {
  while (true) {
    std::vector<std::vector<uint32_t>> succ(blocks);
    // Spanning tree: block k-1 always has room, so every block gets a parent.
    for (uint32_t k = 1; k < blocks; ++k) {
      std::vector<uint32_t> room;
      for (uint32_t q = 0; q < k; ++q)
        if (succ[q].size() < 2) room.push_back(q);
      succ[room[rng() % room.size()]].push_back(k);
    }
    std::uniform_real_distribution<double> coin(0, 1);
    for (uint32_t b = 0; b < blocks; ++b) {
      while (succ[b].size() < 2 && coin(rng) < 0.45 && blocks > 1) {
        uint32_t t = std::uniform_int_distribution<uint32_t>(1, static_cast<uint32_t>(blocks - 1))(rng);
        if (std::find(succ[b].begin(), succ[b].end(), t) == succ[b].end()) succ[b].push_back(t);
        else break;
      }
    }
    if (mustReachExit) {
      std::vector<char> reach(blocks, 0);
      bool changed = true;
      while (changed) {
        changed = false;
        for (uint32_t b = 0; b < blocks; ++b) {
          if (reach[b]) continue;
          bool r = succ[b].empty();
          for (uint32_t s : succ[b]) r = r || reach[s];
          if (r) reach[b] = 1, changed = true;
        }
      }
      if (std::find(reach.begin(), reach.end(), 0) != reach.end()) continue;
    }
    std::ostringstream os;
    os << "func @main(%x: i64) -> i64 {\n";
    for (uint32_t b = 0; b < blocks; ++b) {
      os << "b" << b << ":\n";
      if (b == 0) os << "  %c = slt %x, 0\n";
      os << "  %v" << b << " = add %x, " << b << "\n";
      if (succ[b].empty()) os << "  ret %v" << b << "\n";
      else if (succ[b].size() == 1) os << "  br b" << succ[b][0] << "\n";
      else os << "  brcond %c, b" << succ[b][0] << ", b" << succ[b][1] << "\n";
    }
    os << "}\n";
    return os.str();
  }
}

Adjacency randomDigraph(std::mt19937_64 &rng, size_t nodes, double density) {
  Adjacency g(nodes);
  std::uniform_real_distribution<double> coin(0, 1);
  for (uint32_t a = 0; a < nodes; ++a)
    for (uint32_t b = 0; b < nodes; ++b)
      if (coin(rng) < density) g[a].push_back(b);
  return g;
}

namespace {

std::vector<char> reachableFrom(const Adjacency &succs, uint32_t root, int removed) {
  std::vector<char> seen(succs.size(), 0);
  if (static_cast<int>(root) == removed) return seen;
  std::vector<uint32_t> stack{root};
  seen[root] = 1;
  while (!stack.empty()) {
    uint32_t v = stack.back();
    stack.pop_back();
    for (uint32_t s : succs[v])
      if (!seen[s] && static_cast<int>(s) != removed) seen[s] = 1, stack.push_back(s);
  }
  return seen;
}

} // namespace

std::vector<std::vector<char>> naiveDominance(const Adjacency &succs, uint32_t root) {
  const size_t n = succs.size();
  auto base = reachableFrom(succs, root, -1);
  std::vector<std::vector<char>> dom(n, std::vector<char>(n, 0));
  for (uint32_t a = 0; a < n; ++a) {
    auto without = reachableFrom(succs, root, static_cast<int>(a));
    for (uint32_t b = 0; b < n; ++b)
      dom[a][b] = base[b] && (a == b || !without[b]);
  }
  return dom;
}

std::vector<std::vector<uint32_t>> bruteForceScc(const Adjacency &succs) {
  const size_t n = succs.size();
  std::vector<std::vector<char>> reach(n);
  for (uint32_t v = 0; v < n; ++v) {
    reach[v] = reachableFrom(succs, v, -1);
    reach[v][v] = 1;
  }
  std::vector<char> placed(n, 0);
  std::vector<std::vector<uint32_t>> out;
  for (uint32_t v = 0; v < n; ++v) {
    if (placed[v]) continue;
    std::vector<uint32_t> cls;
    for (uint32_t w = v; w < n; ++w)
      if (reach[v][w] && reach[w][v]) cls.push_back(w), placed[w] = 1;
    out.push_back(std::move(cls));
  }
  return out;
}

std::vector<std::vector<uint32_t>> unionFindComponents(size_t n,
                                                       const std::vector<std::pair<uint32_t, uint32_t>> &edges) {
  std::vector<uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<uint32_t(uint32_t)> find = [&](uint32_t v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
  for (auto [a, b] : edges) parent[find(a)] = find(b);
  std::map<uint32_t, std::vector<uint32_t>> groups;
  for (uint32_t v = 0; v < n; ++v) groups[find(v)].push_back(v);
  std::vector<std::vector<uint32_t>> out;
  for (auto &[_, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end());
  return out;
}

DataFlowResult chaoticIteration(const DataFlowProblem &p, const Function &f) {
  FunctionIndex idx(f);
  const bool fwd = p.direction == FlowDirection::Forward;
  std::vector<size_t> first(f.blocks.size() + 1, 0);
  for (size_t b = 0; b < f.blocks.size(); ++b) first[b + 1] = first[b] + f.blocks[b].insts.size();
  const size_t n = first.back();
  const BitSet init = p.meet == Meet::Union ? BitSet(p.universe) : ~BitSet(p.universe);
  DataFlowResult r;
  r.in.assign(n, init);
  r.out.assign(n, init);
  bool changed = true;
  while (changed) {
    changed = false;
    for (uint32_t b = 0; b < f.blocks.size(); ++b) {
      const size_t cnt = f.blocks[b].insts.size();
      for (size_t s = 0; s < cnt; ++s) {
        const size_t k = first[b] + s;
        if (fwd) {
          BitSet in = init;
          if (s > 0) {
            in = r.out[k - 1];
          } else if (b == 0) {
            in = p.boundary;
          } else {
            bool firstPred = true;
            for (uint32_t q : idx.preds(b)) {
              const BitSet &o = r.out[first[q + 1] - 1];
              if (firstPred) in = o;
              else if (p.meet == Meet::Union) in |= o;
              else in &= o;
              firstPred = false;
            }
          }
          BitSet out = p.gen[k] | (in - p.kill[k]);
          if (in != r.in[k] || out != r.out[k]) changed = true;
          r.in[k] = std::move(in);
          r.out[k] = std::move(out);
        } else {
          BitSet out = init;
          if (s + 1 < cnt) {
            out = r.in[k + 1];
          } else if (idx.succs(b).empty()) {
            out = p.boundary;
          } else {
            bool firstSucc = true;
            for (uint32_t q : idx.succs(b)) {
              const BitSet &i = r.in[first[q]];
              if (firstSucc) out = i;
              else if (p.meet == Meet::Union) out |= i;
              else out &= i;
              firstSucc = false;
            }
          }
          BitSet in = p.gen[k] | (out - p.kill[k]);
          if (in != r.in[k] || out != r.out[k]) changed = true;
          r.in[k] = std::move(in);
          r.out[k] = std::move(out);
        }
      }
    }
  }
  return r;
}

DataFlowProblem randomProblem(std::mt19937_64 &rng, const Function &f, size_t universe) {
  DataFlowProblem p;
  p.direction = rng() % 2 ? FlowDirection::Forward : FlowDirection::Backward;
  p.meet = rng() % 2 ? Meet::Union : Meet::Intersection;
  p.universe = universe;
  size_t n = 0;
  for (const auto &b : f.blocks) n += b.insts.size();
  std::uniform_int_distribution<int> pick(0, 5);
  for (size_t k = 0; k < n; ++k) {
    BitSet g(universe), kl(universe);
    for (size_t u = 0; u < universe; ++u) {
      int c = pick(rng);
      if (c == 0) g.set(u);
      else if (c == 1) kl.set(u);
    }
    p.gen.push_back(g);
    p.kill.push_back(kl);
  }
  p.boundary = BitSet(universe);
  for (size_t u = 0; u < universe; ++u)
    if (rng() % 3 == 0) p.boundary.set(u);
  return p;
}

std::vector<std::pair<uint32_t, std::set<uint32_t>>> naiveNaturalLoops(const FunctionIndex &f) {
  Adjacency g(f.numBlocks());
  for (uint32_t b = 0; b < f.numBlocks(); ++b) g[b] = f.succs(b);
  auto dom = naiveDominance(g, 0);
  std::map<uint32_t, std::set<uint32_t>> loops;
  for (uint32_t t = 0; t < f.numBlocks(); ++t) {
    for (uint32_t h : f.succs(t)) {
      if (!dom[h][t]) continue;
      auto &body = loops[h];
      body.insert(h);
      std::vector<uint32_t> stack;
      if (body.insert(t).second) stack.push_back(t);
      while (!stack.empty()) {
        uint32_t v = stack.back();
        stack.pop_back();
        for (uint32_t p : f.preds(v))
          if (body.insert(p).second) stack.push_back(p);
      }
    }
  }
  return {loops.begin(), loops.end()};
}

} // namespace pdgkit::testing
