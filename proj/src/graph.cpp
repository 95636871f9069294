#include "pdgkit/graph.hpp"

#include <algorithm>
#include <numeric>

namespace pdgkit {

SccPartition stronglyConnectedComponents(const Adjacency &succs) {
  const uint32_t n = static_cast<uint32_t>(succs.size());
  constexpr uint32_t kUnvisited = UINT32_MAX;
  std::vector<uint32_t> index(n, kUnvisited), low(n, 0);
  std::vector<char> onStack(n, 0);
  std::vector<uint32_t> stack;
  SccPartition out;
  out.component.assign(n, 0);
  uint32_t counter = 0;

  // Explicit call stack: (node, next successor position).
  std::vector<std::pair<uint32_t, size_t>> work;
  for (uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    work.emplace_back(root, 0);
    index[root] = low[root] = counter++;
    stack.push_back(root);
    onStack[root] = 1;
    while (!work.empty()) {
      auto &[v, pos] = work.back();
      if (pos < succs[v].size()) {
        uint32_t w = succs[v][pos++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          onStack[w] = 1;
          work.emplace_back(w, 0);
        } else if (onStack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::vector<uint32_t> comp;
        uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          onStack[w] = 0;
          out.component[w] = static_cast<uint32_t>(out.members.size());
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        out.members.push_back(std::move(comp));
      }
      uint32_t finished = v;
      work.pop_back();
      if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[finished]);
    }
  }
  return out;
}

std::vector<uint32_t> weakComponents(const Adjacency &succs) {
  const uint32_t n = static_cast<uint32_t>(succs.size());
  std::vector<uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (uint32_t v = 0; v < n; ++v)
    for (uint32_t w : succs[v]) {
      uint32_t a = find(v), b = find(w);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<uint32_t> comp(n);
  for (uint32_t v = 0; v < n; ++v) comp[v] = find(v);
  return comp;
}

} // namespace pdgkit
