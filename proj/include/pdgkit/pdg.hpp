//===- pdg.hpp - Program, function and loop dependence graphs ---*- C++ -*-===//
#pragma once

#include "pdgkit/alias.hpp"
#include "pdgkit/dominators.hpp"
#include "pdgkit/loops.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pdgkit {

enum class DepClass : uint8_t { Control, Data };
enum class Medium : uint8_t { Register, Memory };
enum class Carried : uint8_t { False, True, Unknown };

std::string_view carriedName(Carried c);

struct DepEdge {
  InstrId src;
  InstrId dst;
  DepClass cls = DepClass::Data;
  DepKind kind = DepKind::RAW;
  Medium medium = Medium::Register;
  bool must = true;
  /// Successor index of the controlling branch (control edges only).
  int label = -1;
  std::map<LoopId, Carried> carried;

  bool isControl() const { return cls == DepClass::Control; }
  bool isMemory() const { return cls == DepClass::Data && medium == Medium::Memory; }
  bool isRegister() const { return cls == DepClass::Data && medium == Medium::Register; }
  /// Carried-ness for loop `l`; edges without a flag report Unknown.
  Carried carriedFor(LoopId l) const;
};

class DependenceGraph {
public:
  std::vector<InstrId> internal; // sorted
  std::vector<InstrId> external; // sorted
  std::vector<DepEdge> edges;
  /// For derived graphs: index of each edge in the graph it was cut from.
  std::vector<size_t> origin;

  bool isInternal(InstrId i) const;
  bool isExternal(InstrId i) const;
  /// Rebuild the per-node edge lists after editing `edges`.
  void index();
  const std::vector<size_t> &incoming(InstrId i) const;
  const std::vector<size_t> &outgoing(InstrId i) const;

  size_t countMemoryEdges(bool mayOnly) const;

  std::string dot(const Module &m) const;
  /// One "src dst class kind medium certainty carried-bits" line per edge.
  std::vector<std::string> metadataLines() const;

private:
  std::unordered_map<uint32_t, std::vector<size_t>> in_, out_;
};

struct PdgOptions {
  /// Replace points-to answers with the operand-syntax baseline, which
  /// treats every pair of memory accesses (calls included) as conflicting.
  bool syntacticBaseline = false;
};

/// (branch instruction, successor index) pairs that control each block.
struct ControlDependenceInfo {
  std::vector<std::vector<std::pair<InstrId, int>>> blockDeps;
};

ControlDependenceInfo controlDependences(const FunctionIndex &f, const DominatorInfo &postdom);
ControlDependenceInfo controlDependences(const FunctionIndex &f);

DependenceGraph buildPdg(const Module &m, const PointsTo &pts, const PdgOptions &opts = {});

DependenceGraph functionDg(const Module &m, const DependenceGraph &pdg, uint32_t func);

/// Loop dependence graph with loop-carried flags for `l` resolved.
DependenceGraph loopDg(const Module &m, const DependenceGraph &pdg, const LoopStructure &l);

/// Copy every loop's carried flags back onto the whole-program graph.
void annotateCarried(const Module &m, DependenceGraph &pdg, const LoopInfo &loops);

/// Basic induction variable recognised from syntax alone: a header phi whose
/// latch arms are all `%u = add %phi, k` (or `sub`) with a literal k != 0.
struct SyntacticIv {
  std::string phi;
  InstrId phiId;
  InstrId update;
  int64_t step = 0;
};

std::vector<SyntacticIv> syntacticIvs(const Module &m, const LoopStructure &l);

/// Address of the form base + coef * iv + constant + sum(invariant terms).
struct AffineAddress {
  std::string base;
  std::string iv;
  int64_t coef = 0;
  int64_t constant = 0;
  std::map<std::string, int64_t> terms;
  friend bool operator==(const AffineAddress &, const AffineAddress &) = default;
};

std::optional<AffineAddress> affineAddress(const Module &m, const LoopStructure &l, const Operand &ptr);

} // namespace pdgkit
