//===- parallel.hpp - Environments, tasks and DOALL -------------*- C++ -*-===//
#pragma once

#include "pdgkit/loop_analysis.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdgkit {

enum class SlotRole : uint8_t { LiveIn, LiveOut, Reduction };
std::string_view slotRoleName(SlotRole r);

struct EnvSlot {
  uint32_t index = 0;
  SlotRole role = SlotRole::LiveIn;
  std::string name;
  /// Defining instruction; empty for function parameters.
  std::optional<InstrId> source;
};

/// Live-ins come first and occupy one cell each. Live-out and reduction
/// slots are privatized: N consecutive cells, one per task.
struct Environment {
  std::vector<EnvSlot> slots;

  size_t count(SlotRole r) const;
  int64_t cells(int64_t tasks) const;
  std::string dump() const;
};

/// Live-ins: values defined outside `l` and used by its instructions.
/// Live-outs: values defined inside and used outside; header phis that
/// `dag` classifies as reductions get the Reduction role.
Environment computeLiveInOut(const Module &m, const LoopStructure &l, const SccDag *dag = nullptr);

struct ParallelPlan {
  LoopId loop;
  uint32_t func = 0;
  int64_t numTasks = 1;
  bool applicable = false;
  std::string rejected;
  Environment env;
  std::vector<ReductionInfo> reductions;
  std::optional<InductionVariable> governing;
};

ParallelPlan doallCheck(ProgramAnalysis &pa, LoopId l);

/// Outlines loop `plan.loop` into a task function run as N strided chunks.
/// Throws IrError when the plan is not applicable or no longer matches `m`.
Module doallTransform(const Module &m, const ParallelPlan &plan, int64_t tasks);

enum class ParallelMode : uint8_t { SequentialAnyOrder, Concurrent };

ExecResult runParallel(const Module &m, std::span<const int64_t> args, ParallelMode mode, uint64_t seed = 0);

/// Output, exit value and trap agree (step counts may differ).
bool sameBehavior(const ExecResult &a, const ExecResult &b);

} // namespace pdgkit
