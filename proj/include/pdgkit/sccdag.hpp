#pragma once

#include "pdgkit/pdg.hpp"

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace pdgkit {

enum class SccKind : uint8_t { Independent, Sequential, Reducible };
std::string_view sccKindName(SccKind k);

enum class ReductionOp : uint8_t { Add, Mul, And, Or, Xor, Min, Max };
std::string_view reductionOpName(ReductionOp op);
int64_t reductionIdentity(ReductionOp op);
int64_t applyReduction(ReductionOp op, int64_t a, int64_t b);

struct ReductionInfo {
  InstrId phi;
  InstrId update; // the add/mul/... or, for min/max, the select
  std::optional<InstrId> compare;
  ReductionOp op = ReductionOp::Add;
  int64_t identity = 0;
  /// Uses of the accumulator (phi or update) after the loop.
  std::vector<InstrId> liveOutUses;
};

struct Scc {
  uint32_t id = 0;
  std::vector<InstrId> members; // sorted
  bool hasCarried = false;
  SccKind kind = SccKind::Sequential;
  std::optional<ReductionInfo> reduction;
};

struct SccDag {
  LoopId loop;
  std::vector<Scc> sccs;
  std::set<std::pair<uint32_t, uint32_t>> edges;
  std::unordered_map<uint32_t, uint32_t> sccOf; // instruction ordinal -> scc id

  const Scc &sccContaining(InstrId i) const { return sccs.at(sccOf.at(i.value)); }
  bool acyclic() const;
  std::string dump(const Module &m) const;
  std::string dot(const Module &m) const;
};

/// Partition of the loop DG's internal nodes into SCCs (control and data
/// edges), ordered by smallest member. Kinds are left unset.
SccDag buildSccDag(const DependenceGraph &ldg, LoopId loop);

std::optional<ReductionInfo> detectReduction(const Module &m, const DependenceGraph &ldg, const LoopStructure &l,
                                             const Scc &s);

SccKind classifyScc(const Module &m, const DependenceGraph &ldg, const LoopStructure &l, Scc &s);

/// build + classify every SCC.
SccDag buildClassifiedSccDag(const Module &m, const DependenceGraph &ldg, const LoopStructure &l);

} // namespace pdgkit
