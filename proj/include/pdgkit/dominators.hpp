#pragma once

#include "pdgkit/graph.hpp"
#include "pdgkit/ir.hpp"

namespace pdgkit {

enum class DomDirection : uint8_t { Forward, Post };

/// Dominator (or post-dominator) tree over function-local block indices.
///
/// For the post direction a virtual exit node with index `numBlocks` is
/// appended. It has incoming edges from every `ret` block and from the
/// lowest-numbered block of every cycle that can never reach a `ret`, so
/// post-dominance is total even for functions with infinite loops.
///
/// The result is a plain value owned by the caller; nothing invalidates it.
struct DominatorInfo {
  DomDirection direction = DomDirection::Forward;
  uint32_t numBlocks = 0;
  /// Immediate dominator per node, -1 for the root and for unreachable nodes.
  std::vector<int> idom;
  std::vector<std::vector<uint32_t>> children;
  std::vector<std::vector<uint32_t>> frontier;
  /// Blocks with an edge to the virtual exit: ret blocks and the chosen
  /// block of each cycle that never returns (post only).
  std::vector<uint32_t> exitSources;

  uint32_t root() const { return direction == DomDirection::Forward ? 0 : numBlocks; }
  uint32_t virtualExit() const { return numBlocks; }
  size_t size() const { return idom.size(); }
  bool reachable(uint32_t b) const { return b == root() || idom[b] >= 0; }
  /// Reflexive dominance.
  bool dominates(uint32_t a, uint32_t b) const;
  bool strictlyDominates(uint32_t a, uint32_t b) const { return a != b && dominates(a, b); }

  std::vector<uint32_t> preorderIn, preorderOut;
};

DominatorInfo computeDominators(const FunctionIndex &f, DomDirection dir);

/// Dominators of an arbitrary rooted graph (used by both directions above).
DominatorInfo computeDominators(const Adjacency &succs, uint32_t root);

} // namespace pdgkit
