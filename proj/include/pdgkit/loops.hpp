//===- loops.hpp - Natural loops and the loop forest ------------*- C++ -*-===//
#pragma once

#include "pdgkit/dominators.hpp"
#include "pdgkit/interpreter.hpp"
#include "pdgkit/ir.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdgkit {

struct LoopExit {
  uint32_t from = 0; // exiting block (inside)
  uint32_t to = 0;   // exit target (outside)
  friend bool operator==(const LoopExit &, const LoopExit &) = default;
};

/// Block indices are local to the owning function.
struct LoopStructure {
  LoopId id;
  uint32_t func = 0;
  uint32_t header = 0;
  std::optional<uint32_t> preheader;
  std::vector<uint32_t> latches;
  std::vector<LoopExit> exits;
  std::vector<uint32_t> blocks;
  std::vector<char> contains;
  std::optional<LoopId> parent;
  uint32_t depth = 1;

  bool containsBlock(uint32_t b) const { return b < contains.size() && contains[b]; }
  bool containsInstr(const Module &m, InstrId i) const {
    auto l = m.loc(i);
    return l.func == func && containsBlock(l.block);
  }
};

/// Every loop of a module. Loop ids are assigned in order of their header's
/// block ordinal, so they are stable across print/parse.
struct LoopInfo {
  std::vector<LoopStructure> loops;
  std::vector<std::string> diagnostics;
  std::vector<char> irreducible; // per function

  const LoopStructure &loop(LoopId id) const { return loops.at(id.value); }
  /// Innermost loop containing the block, if any.
  std::optional<LoopId> innermost(uint32_t func, uint32_t block) const;
  std::vector<LoopId> loopsOf(uint32_t func) const;
};

/// Natural loops of one function. Loops sharing a header are merged. Ids,
/// parents and depths are left for detectLoops(Module) to fill in. When the
/// CFG is irreducible a diagnostic is appended and no loops are returned.
std::vector<LoopStructure> detectLoops(const FunctionIndex &f, const DominatorInfo &dom, uint32_t funcIndex,
                                       std::vector<std::string> *diagnostics = nullptr);

LoopInfo detectLoops(const Module &m);

/// Loop nesting forest. Deleting a node reattaches its children to its parent
/// at the deleted node's position.
class LoopForest {
public:
  explicit LoopForest(const LoopInfo &info);

  const std::vector<LoopId> &roots() const { return roots_; }
  const std::vector<LoopId> &children(LoopId l) const { return node(l).children; }
  std::optional<LoopId> parent(LoopId l) const { return node(l).parent; }
  bool contains(LoopId l) const { return l.value < nodes_.size() && nodes_[l.value].alive; }
  size_t size() const;
  void remove(LoopId l);
  /// Children before parents; siblings in order.
  std::vector<LoopId> postOrder() const;

private:
  struct Node {
    std::optional<LoopId> parent;
    std::vector<LoopId> children;
    bool alive = false;
  };
  const Node &node(LoopId l) const;
  std::vector<Node> nodes_;
  std::vector<LoopId> roots_;
};

} // namespace pdgkit
