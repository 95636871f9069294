//===- loop_analysis.hpp - Invariants and induction variables ---*- C++ -*-===//
#pragma once

#include "pdgkit/alias.hpp"
#include "pdgkit/callgraph.hpp"
#include "pdgkit/loops.hpp"
#include "pdgkit/pdg.hpp"
#include "pdgkit/sccdag.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pdgkit {

/// Dependence-graph based invariance: every in-loop dependence source of `i`
/// must itself be invariant, and an instruction met again while its own
/// query is in progress is not. Header phis, terminators and allocas never
/// qualify.
bool isInvariant(const Module &m, const LoopStructure &l, const DependenceGraph &ldg, InstrId i);
std::set<InstrId> invariantsOfLoop(const Module &m, const LoopStructure &l, const DependenceGraph &ldg);

/// Operand/alias based invariance in the style of classic LICM.
bool naiveIsInvariant(const Module &m, const LoopInfo &loops, const LoopStructure &l, const PointsTo &pts,
                      InstrId i);
std::set<InstrId> naiveInvariantsOfLoop(const Module &m, const LoopInfo &loops, const LoopStructure &l,
                                        const PointsTo &pts);

/// Instructions of the loop that either algorithm could report.
std::vector<InstrId> invariantCandidates(const Module &m, const LoopStructure &l);

enum class ContinuePredicate : uint8_t { Lt, Le, Gt, Ge, Ne, Eq };

struct GoverningInfo {
  InstrId compare;
  InstrId branch;
  Operand bound;
  /// The compare tests the phi (while shape) rather than the update.
  bool testsPhi = true;
  /// Loop keeps running while `iv <pred> bound` holds.
  ContinuePredicate predicate = ContinuePredicate::Lt;
  std::optional<int64_t> tripCount;
};

struct InductionVariable {
  InstrId phi;
  InstrId update;
  uint32_t scc = 0;
  Operand start;
  Operand step;
  std::optional<int64_t> literalStep;
  std::optional<GoverningInfo> governing;
};

struct DerivedIv {
  InstrId inst;
  InstrId basePhi;
  /// value = scale * base + offset when both are literal.
  std::optional<int64_t> scale;
  std::optional<int64_t> offset;
};

struct LoopIvs {
  std::vector<InductionVariable> basic;
  std::vector<DerivedIv> derived;
  /// Index into `basic` of the governing IV, if exactly one qualifies.
  std::optional<size_t> governing;
};

LoopIvs detectIvs(const Module &m, const LoopStructure &l, const SccDag &dag, const std::set<InstrId> &inv);

/// Trip count of the canonical shapes. `testsPhi` selects between a test
/// before the update (while) and after it (do-while).
std::optional<int64_t> tripCount(int64_t start, int64_t step, ContinuePredicate pred, int64_t bound, bool testsPhi);

/// Governing IV as a detector restricted to do-while loops would find it:
/// the exiting branch must sit in a latch and test the update.
std::optional<size_t> doWhileGoverningIv(const Module &m, const LoopStructure &l, const LoopIvs &ivs);

/// Lazily computed analyses of one module. The module must outlive it and
/// must not change while it is in use.
class ProgramAnalysis {
public:
  explicit ProgramAnalysis(const Module &m);

  const Module &module() const { return *m_; }
  const PointsTo &pointsTo() const { return pts_; }
  const CallGraph &callGraph() const { return cg_; }
  const DependenceGraph &pdg() const { return pdg_; }
  const LoopInfo &loops() const { return loops_; }

  const DependenceGraph &loopDg(LoopId l);
  const SccDag &sccDag(LoopId l);
  const std::set<InstrId> &invariants(LoopId l);
  const LoopIvs &ivs(LoopId l);

private:
  const Module *m_;
  PointsTo pts_;
  CallGraph cg_;
  DependenceGraph pdg_;
  LoopInfo loops_;
  std::map<uint32_t, DependenceGraph> ldgs_;
  std::map<uint32_t, SccDag> dags_;
  std::map<uint32_t, std::set<InstrId>> invs_;
  std::map<uint32_t, LoopIvs> ivs_;
};

/// "loop L<id> fn=@f depth=d hot=h invariants=n/naive=m ivs=k governing=..."
/// per loop; hot is "-" without a profile.
std::vector<std::string> loopReport(ProgramAnalysis &pa, const std::optional<ProfileData> &profile);

} // namespace pdgkit
