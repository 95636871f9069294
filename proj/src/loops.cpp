#include "pdgkit/loops.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace pdgkit {

std::optional<LoopId> LoopInfo::innermost(uint32_t func, uint32_t block) const {
  std::optional<LoopId> best;
  uint32_t bestDepth = 0;
  for (const auto &l : loops)
    if (l.func == func && l.containsBlock(block) && l.depth > bestDepth) {
      best = l.id;
      bestDepth = l.depth;
    }
  return best;
}

std::vector<LoopId> LoopInfo::loopsOf(uint32_t func) const {
  std::vector<LoopId> out;
  for (const auto &l : loops)
    if (l.func == func) out.push_back(l.id);
  return out;
}

std::vector<LoopStructure> detectLoops(const FunctionIndex &f, const DominatorInfo &dom, uint32_t funcIndex,
                                       std::vector<std::string> *diagnostics) {
  const uint32_t n = static_cast<uint32_t>(f.numBlocks());
  std::map<uint32_t, std::vector<uint32_t>> latchesOf;
  for (uint32_t t = 0; t < n; ++t) {
    if (!f.reachable(t)) continue;
    for (uint32_t h : f.succs(t)) {
      if (f.rpoIndex(h) > f.rpoIndex(t)) continue; // forward edge
      if (!dom.dominates(h, t)) {
        if (diagnostics)
          diagnostics->push_back("irreducible control flow in @" + f.function().name + ": edge " +
                                 f.function().blocks[t].label + " -> " + f.function().blocks[h].label);
        return {};
      }
      latchesOf[h].push_back(t);
    }
  }
  std::vector<LoopStructure> out;
  for (auto &[h, latches] : latchesOf) {
    LoopStructure l;
    l.func = funcIndex;
    l.header = h;
    l.contains.assign(n, 0);
    l.contains[h] = 1;
    std::vector<uint32_t> work;
    for (uint32_t t : latches)
      if (!l.contains[t]) {
        l.contains[t] = 1;
        work.push_back(t);
      }
    while (!work.empty()) {
      uint32_t b = work.back();
      work.pop_back();
      for (uint32_t p : f.preds(b))
        if (!l.contains[p]) {
          l.contains[p] = 1;
          work.push_back(p);
        }
    }
    for (uint32_t b = 0; b < n; ++b)
      if (l.contains[b]) l.blocks.push_back(b);
    std::sort(latches.begin(), latches.end());
    latches.erase(std::unique(latches.begin(), latches.end()), latches.end());
    l.latches = latches;
    for (uint32_t b : l.blocks)
      for (uint32_t s : f.succs(b))
        if (!l.contains[s]) l.exits.push_back({b, s});
    std::vector<uint32_t> outside;
    for (uint32_t p : f.preds(h))
      if (!l.contains[p]) outside.push_back(p);
    if (outside.size() == 1 && f.succs(outside[0]).size() == 1) l.preheader = outside[0];
    out.push_back(std::move(l));
  }
  return out;
}

LoopInfo detectLoops(const Module &m) {
  LoopInfo info;
  info.irreducible.assign(m.functions.size(), 0);
  for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
    const auto &fn = m.functions[fi];
    if (fn.blocks.empty()) continue;
    FunctionIndex idx(fn);
    auto dom = computeDominators(idx, DomDirection::Forward);
    size_t before = info.diagnostics.size();
    auto loops = detectLoops(idx, dom, fi, &info.diagnostics);
    if (info.diagnostics.size() != before) info.irreducible[fi] = 1;
    for (auto &l : loops) {
      for (const auto &other : loops) {
        if (&other == &l || !other.containsBlock(l.header) || other.blocks.size() <= l.blocks.size()) continue;
        ++l.depth;
      }
    }
    for (auto &l : loops) info.loops.push_back(std::move(l));
  }
  std::stable_sort(info.loops.begin(), info.loops.end(), [&](const LoopStructure &a, const LoopStructure &b) {
    return m.functions[a.func].blocks[a.header].id < m.functions[b.func].blocks[b.header].id;
  });
  for (uint32_t i = 0; i < info.loops.size(); ++i) info.loops[i].id = LoopId(i);
  for (auto &l : info.loops) {
    const LoopStructure *best = nullptr;
    for (const auto &o : info.loops) {
      if (o.id == l.id || o.func != l.func || !o.containsBlock(l.header) || o.blocks.size() <= l.blocks.size())
        continue;
      if (!best || o.blocks.size() < best->blocks.size()) best = &o;
    }
    if (best) l.parent = best->id;
  }
  return info;
}

LoopTable buildLoopTable(const Module &m) {
  LoopInfo info = detectLoops(m);
  LoopTable t;
  for (const auto &l : info.loops) t.loops.push_back({l.id, l.func, l.header, l.contains});
  return t;
}

LoopForest::LoopForest(const LoopInfo &info) {
  nodes_.resize(info.loops.size());
  for (const auto &l : info.loops) {
    nodes_[l.id.value].alive = true;
    nodes_[l.id.value].parent = l.parent;
    if (l.parent) nodes_[l.parent->value].children.push_back(l.id);
    else roots_.push_back(l.id);
  }
}

const LoopForest::Node &LoopForest::node(LoopId l) const {
  if (!contains(l)) throw IrError("unknown loop L" + std::to_string(l.value));
  return nodes_[l.value];
}

size_t LoopForest::size() const {
  return static_cast<size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node &n) { return n.alive; }));
}

void LoopForest::remove(LoopId l) {
  Node victim = node(l);
  auto splice = [&](std::vector<LoopId> &siblings) {
    auto it = std::find(siblings.begin(), siblings.end(), l);
    it = siblings.erase(it);
    siblings.insert(it, victim.children.begin(), victim.children.end());
  };
  if (victim.parent) splice(nodes_[victim.parent->value].children);
  else splice(roots_);
  for (LoopId c : victim.children) nodes_[c.value].parent = victim.parent;
  nodes_[l.value] = Node{};
}

std::vector<LoopId> LoopForest::postOrder() const {
  std::vector<LoopId> out;
  std::function<void(LoopId)> visit = [&](LoopId l) {
    for (LoopId c : nodes_[l.value].children) visit(c);
    out.push_back(l);
  };
  for (LoopId r : roots_) visit(r);
  return out;
}

} // namespace pdgkit
