//===- dominators.cpp - Dominator and post-dominator trees -----------------===//
//
// Cooper/Harvey/Kennedy iterative algorithm over reverse post-order.
//
//===----------------------------------------------------------------------===//
#include "pdgkit/dominators.hpp"

#include <algorithm>

namespace pdgkit {

namespace {

std::vector<uint32_t> reversePostOrder(const Adjacency &succs, uint32_t root) {
  std::vector<uint32_t> post;
  std::vector<char> seen(succs.size(), 0);
  std::vector<std::pair<uint32_t, size_t>> stack{{root, 0}};
  seen[root] = 1;
  while (!stack.empty()) {
    auto &[b, next] = stack.back();
    if (next < succs[b].size()) {
      uint32_t s = succs[b][next++];
      if (!seen[s]) {
        seen[s] = 1;
        stack.emplace_back(s, 0);
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  return {post.rbegin(), post.rend()};
}

} // namespace

bool DominatorInfo::dominates(uint32_t a, uint32_t b) const {
  if (a == b) return true;
  if (!reachable(a) || !reachable(b)) return false;
  return preorderIn[a] <= preorderIn[b] && preorderOut[b] <= preorderOut[a];
}

DominatorInfo computeDominators(const Adjacency &succs, uint32_t root) {
  const uint32_t n = static_cast<uint32_t>(succs.size());
  DominatorInfo info;
  info.idom.assign(n, -1);
  info.children.assign(n, {});
  info.frontier.assign(n, {});

  Adjacency preds(n);
  for (uint32_t v = 0; v < n; ++v)
    for (uint32_t w : succs[v]) preds[w].push_back(v);

  auto rpo = reversePostOrder(succs, root);
  std::vector<int> order(n, -1);
  for (size_t i = 0; i < rpo.size(); ++i) order[rpo[i]] = static_cast<int>(i);

  std::vector<int> idom(n, -1);
  idom[root] = static_cast<int>(root);
  auto intersect = [&](uint32_t a, uint32_t b) {
    while (a != b) {
      while (order[a] > order[b]) a = static_cast<uint32_t>(idom[a]);
      while (order[b] > order[a]) b = static_cast<uint32_t>(idom[b]);
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < rpo.size(); ++i) {
      uint32_t b = rpo[i];
      int newIdom = -1;
      for (uint32_t p : preds[b]) {
        if (order[p] < 0 || idom[p] < 0) continue;
        newIdom = newIdom < 0 ? static_cast<int>(p) : static_cast<int>(intersect(p, static_cast<uint32_t>(newIdom)));
      }
      if (newIdom != idom[b]) {
        idom[b] = newIdom;
        changed = true;
      }
    }
  }
  for (uint32_t v = 0; v < n; ++v)
    if (v != root && idom[v] >= 0) {
      info.idom[v] = idom[v];
      info.children[idom[v]].push_back(v);
    }

  for (uint32_t b = 0; b < n; ++b) {
    if (order[b] < 0) continue;
    std::vector<uint32_t> reachPreds;
    for (uint32_t p : preds[b])
      if (order[p] >= 0) reachPreds.push_back(p);
    if (reachPreds.size() < 2) continue;
    for (uint32_t p : reachPreds) {
      uint32_t runner = p;
      while (runner != static_cast<uint32_t>(idom[b])) {
        auto &df = info.frontier[runner];
        if (std::find(df.begin(), df.end(), b) == df.end()) df.push_back(b);
        if (runner == root) break;
        runner = static_cast<uint32_t>(idom[runner]);
      }
    }
  }
  for (auto &df : info.frontier) std::sort(df.begin(), df.end());

  info.preorderIn.assign(n, 0);
  info.preorderOut.assign(n, 0);
  uint32_t clock = 0;
  std::vector<std::pair<uint32_t, size_t>> stack{{root, 0}};
  info.preorderIn[root] = clock++;
  while (!stack.empty()) {
    auto &[v, next] = stack.back();
    if (next < info.children[v].size()) {
      uint32_t c = info.children[v][next++];
      info.preorderIn[c] = clock++;
      stack.emplace_back(c, 0);
    } else {
      info.preorderOut[v] = clock++;
      stack.pop_back();
    }
  }
  return info;
}

DominatorInfo computeDominators(const FunctionIndex &f, DomDirection dir) {
  const uint32_t n = static_cast<uint32_t>(f.numBlocks());
  if (dir == DomDirection::Forward) {
    Adjacency succs(n);
    for (uint32_t b = 0; b < n; ++b) succs[b] = f.succs(b);
    auto info = computeDominators(succs, 0);
    info.direction = DomDirection::Forward;
    info.numBlocks = n;
    return info;
  }

  // Reverse CFG plus virtual exit node n.
  const uint32_t exit = n;
  std::vector<uint32_t> exitSources;
  for (uint32_t b = 0; b < n; ++b) {
    const auto &bb = f.function().blocks[b];
    if (!bb.insts.empty() && bb.terminator().op == Opcode::Ret) exitSources.push_back(b);
  }
  auto reachesExit = [&](const std::vector<uint32_t> &sources) {
    std::vector<char> reach(n, 0);
    std::vector<uint32_t> work(sources.begin(), sources.end());
    for (uint32_t s : sources) reach[s] = 1;
    while (!work.empty()) {
      uint32_t b = work.back();
      work.pop_back();
      for (uint32_t p : f.preds(b))
        if (!reach[p]) {
          reach[p] = 1;
          work.push_back(p);
        }
    }
    return reach;
  };
  auto reach = reachesExit(exitSources);
  if (std::count(reach.begin(), reach.end(), 0) > 0) {
    // Sink SCCs of the blocks that never reach a return each get one edge to
    // the virtual exit, from their lowest-numbered block.
    std::vector<uint32_t> stuck;
    std::vector<int> local(n, -1);
    for (uint32_t b = 0; b < n; ++b)
      if (!reach[b]) {
        local[b] = static_cast<int>(stuck.size());
        stuck.push_back(b);
      }
    Adjacency sub(stuck.size());
    for (size_t i = 0; i < stuck.size(); ++i)
      for (uint32_t s : f.succs(stuck[i]))
        if (local[s] >= 0) sub[i].push_back(static_cast<uint32_t>(local[s]));
    auto sccs = stronglyConnectedComponents(sub);
    for (size_t c = 0; c < sccs.members.size(); ++c) {
      bool sink = true;
      for (uint32_t v : sccs.members[c])
        for (uint32_t w : sub[v]) sink &= sccs.component[w] == c;
      if (sink) exitSources.push_back(stuck[sccs.members[c].front()]);
    }
    std::sort(exitSources.begin(), exitSources.end());
  }

  Adjacency rsuccs(n + 1);
  for (uint32_t b = 0; b < n; ++b)
    for (uint32_t s : f.succs(b)) rsuccs[s].push_back(b);
  for (uint32_t b : exitSources) rsuccs[exit].push_back(b);
  auto info = computeDominators(rsuccs, exit);
  info.direction = DomDirection::Post;
  info.numBlocks = n;
  info.exitSources = std::move(exitSources);
  return info;
}

} // namespace pdgkit
