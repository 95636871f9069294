//===- interpreter.hpp - Reference interpreter and profiler ------*- C++ -*-===//
//
// Small-step execution of a verified module. Besides plain runs, the
// interpreter records dynamic memory dependences (the ground truth the
// static dependence graph is checked against), call events, per-entity
// execution counts, and optionally dispatches DOALL task calls out of order
// or on real threads.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "pdgkit/ir.hpp"
#include "pdgkit/objects.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>

namespace pdgkit {

enum class Trap : uint8_t { DivByZero, OutOfBounds, StepBudgetExceeded, BadICall };

std::string_view trapName(Trap t);

/// Runtime value: an integer, a pointer into a dynamic object, or a function.
struct RtValue {
  enum class Kind : uint8_t { Int, Ptr, Fn };
  Kind kind = Kind::Int;
  uint32_t ref = 0; // dynamic object index or function ordinal
  int64_t num = 0;  // integer value or cell offset

  static RtValue integer(int64_t v) { return {Kind::Int, 0, v}; }
  friend bool operator==(const RtValue &, const RtValue &) = default;
};

struct ExecResult {
  std::vector<int64_t> output;
  int64_t exitValue = 0;
  uint64_t steps = 0;
  std::optional<Trap> trap;

  friend bool operator==(const ExecResult &, const ExecResult &) = default;
};

std::string describe(const ExecResult &r);

/// Loop membership as the interpreter needs it (function-local block
/// indices). Built from the loop analysis; see buildLoopTable().
struct LoopTable {
  struct Loop {
    LoopId id;
    uint32_t func = 0;
    uint32_t header = 0;
    std::vector<char> contains;
  };
  std::vector<Loop> loops;
};

LoopTable buildLoopTable(const Module &m);

/// One active loop on the dynamic loop stack.
struct LoopActivation {
  LoopId loop;
  uint64_t invocation = 0;
  uint64_t iteration = 0;
};

struct DynamicDependence {
  InstrId src;
  InstrId dst;
  DepKind kind = DepKind::RAW;
  ObjectRef object;
  /// Loops active, in the same invocation, at both events of some pair.
  std::set<LoopId> commonLoops;
  /// Loops for which some pair crossed iterations of one invocation.
  std::set<LoopId> carriedLoops;

  bool sameIteration(LoopId l) const { return commonLoops.count(l) && !carriedLoops.count(l); }
};

struct CallEvent {
  FuncId caller;
  FuncId callee;
  InstrId site;
  friend auto operator<=>(const CallEvent &, const CallEvent &) = default;
};

struct ProfileData {
  uint64_t fingerprint = 0;
  std::vector<uint64_t> instrCount;
  std::vector<uint64_t> blockCount;
  std::vector<uint64_t> loopInvocations;
  std::vector<uint64_t> loopIterations; // header executions
  std::vector<uint64_t> functionInvocations;

  uint64_t totalSteps() const;
  friend bool operator==(const ProfileData &, const ProfileData &) = default;
};

enum class TaskMode : uint8_t { Inline, SequentialAnyOrder, Concurrent };

using ValueObserver =
    std::function<void(const Instruction &, const RtValue &, std::span<const LoopActivation>)>;

struct RunOptions {
  uint64_t stepBudget = 10'000'000;
  bool traceDependences = false;
  bool recordCalls = false;
  bool profile = false;
  /// Loop table for traces, profiles, and observers; computed when absent.
  const LoopTable *loops = nullptr;
  ValueObserver observer;
  /// How consecutive calls to DOALL task functions are executed.
  TaskMode taskMode = TaskMode::Inline;
  uint64_t seed = 0;
  bool recordTaskWrites = false;
};

struct RunReport {
  ExecResult result;
  std::vector<DynamicDependence> dependences;
  std::set<CallEvent> calls;
  ProfileData profile;
  /// Cells (dynamic object, offset) written by each dispatched task, in
  /// task-ordinal order per dispatch group.
  std::vector<std::set<std::pair<uint32_t, int64_t>>> taskWrites;
};

RunReport execute(const Module &m, std::span<const int64_t> args, const RunOptions &opts);

ExecResult runProgram(const Module &m, std::span<const int64_t> args, uint64_t stepBudget = 10'000'000);

/// Every ordered pair of dynamic accesses to a common cell, collapsed per
/// (src, dst, kind, static object). Throws IrError if the run traps.
std::vector<DynamicDependence> traceDependences(const Module &m, std::span<const int64_t> args,
                                                uint64_t stepBudget = 10'000'000);

/// Counters summed across inputs. Throws IrError if any run traps.
ProfileData collectProfile(const Module &m, const std::vector<std::vector<int64_t>> &inputs,
                           uint64_t stepBudget = 10'000'000);

/// Structural hash of the module body (metadata excluded).
uint64_t moduleFingerprint(const Module &m);

/// Replace any embedded profile with `p`. Throws IrError when `p` was
/// collected on a module with a different shape.
Module embedProfile(const Module &m, const ProfileData &p);

/// Profile embedded in `m`, if any. Throws IrError when stale.
std::optional<ProfileData> readProfile(const Module &m);

/// Profile lines as produced by the `prof` tool ("!prof ..." per line).
std::string profileText(const ProfileData &p);
ProfileData parseProfileText(std::string_view text);

/// Fraction of executed instructions that belong to the loop's blocks.
double loopHotness(const Module &m, const ProfileData &p, const LoopTable::Loop &loop);

/// Name of the metadata key that marks a function as a DOALL task body.
inline constexpr std::string_view kTaskMetaKey = "doall-task";

} // namespace pdgkit
