#pragma once

#include "pdgkit/alias.hpp"
#include "pdgkit/ir.hpp"

#include <set>
#include <string>
#include <vector>

namespace pdgkit {

struct CallEdge {
  uint32_t caller = 0;
  uint32_t callee = 0;
  bool must = false;
  std::vector<InstrId> sites;
};

/// Complete call graph: direct calls plus every arity-compatible function an
/// indirect call's target may point to.
class CallGraph {
public:
  static CallGraph build(const Module &m, const PointsTo &pts);

  size_t numFunctions() const { return numFunctions_; }
  const std::vector<CallEdge> &edges() const { return edges_; }
  bool hasEdge(uint32_t caller, uint32_t callee) const;
  const std::vector<uint32_t> &callees(uint32_t f) const { return succs_[f]; }
  /// icall sites whose target set resolved to nothing.
  const std::vector<InstrId> &unresolvedSites() const { return unresolved_; }

  std::string dump(const Module &m) const;
  std::string dot(const Module &m) const;

private:
  size_t numFunctions_ = 0;
  std::vector<CallEdge> edges_;
  std::vector<std::vector<uint32_t>> succs_;
  std::vector<InstrId> unresolved_;
};

/// Weakly connected components, each sorted by function name, ordered by
/// their smallest name.
std::vector<std::vector<uint32_t>> islands(const Module &m, const CallGraph &cg);

std::set<uint32_t> reachableFunctions(const CallGraph &cg, const std::set<uint32_t> &roots);

/// Functions whose address is taken by a funcptr instruction.
std::set<uint32_t> addressTakenFunctions(const Module &m);

} // namespace pdgkit
