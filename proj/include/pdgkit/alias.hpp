//===- alias.hpp - Points-to, alias and mod/ref queries ---------*- C++ -*-===//
//
// Inclusion-based (Andersen-style) points-to analysis over static allocation
// sites. Flow- and context-insensitive; offsets are tracked when constant.
// Indirect call targets are resolved jointly with the points-to fixpoint.
//
//===----------------------------------------------------------------------===//
#pragma once

#include "pdgkit/ir.hpp"
#include "pdgkit/objects.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pdgkit {

struct PtsTarget {
  ObjectRef object;
  std::optional<int64_t> offset; // nullopt is "unknown offset"
  friend auto operator<=>(const PtsTarget &, const PtsTarget &) = default;
};

using PtsSet = std::set<PtsTarget>;

enum class AliasAnswer : uint8_t { NoAlias, MayAlias, MustAlias };
std::string_view aliasAnswerName(AliasAnswer a);

enum class ModRef : uint8_t { NoModRef = 0, Ref = 1, Mod = 2, ModRef = 3 };
std::string_view modRefName(ModRef m);

/// Object-level read/write summary of a function, including its callees.
struct ModRefSummary {
  std::set<ObjectRef> mod;
  std::set<ObjectRef> ref;
};

class PointsTo {
public:
  static PointsTo compute(const Module &m);

  const Module &module() const { return *m_; }

  /// Points-to set of a value operand used in function `func`.
  PtsSet operandPts(uint32_t func, const Operand &o) const;
  /// Points-to set of an SSA name (parameter or instruction result).
  const PtsSet &valuePts(uint32_t func, const std::string &name) const;
  const PtsSet &contentPts(const ObjectRef &o) const;

  /// Resolved callees of a call or icall site, by function ordinal.
  const std::set<uint32_t> &callees(InstrId site) const;

  /// True for load, store and print.
  static bool isMemoryAccess(const Instruction &i);
  /// Cells touched by a load/store/print; print touches the io object.
  PtsSet location(InstrId access) const;
  std::set<ObjectRef> objects(InstrId access) const;

  AliasAnswer alias(InstrId a, InstrId b) const;
  static AliasAnswer alias(const PtsSet &a, const PtsSet &b);

  const ModRefSummary &summary(uint32_t func) const { return summaries_.at(func); }
  /// Objects a call site may write / read (union over resolved callees),
  /// minus non-escaping allocas whose activations cannot outlive the call.
  ModRefSummary callEffects(InstrId call) const;
  ModRef modRef(InstrId call, InstrId access) const;

  int64_t objectSize(const ObjectRef &o) const;

  /// "pts %name -> {obj@off, ...}" per pointer value, functions in order.
  std::string dump() const;

private:
  using ValueKey = std::pair<uint32_t, std::string>;
  const Module *m_ = nullptr;
  std::map<ValueKey, PtsSet> values_;
  std::map<ObjectRef, PtsSet> contents_;
  std::map<uint32_t, std::set<uint32_t>> callees_;
  std::vector<ModRefSummary> summaries_;
  std::set<ObjectRef> escaped_;
  std::vector<std::set<uint32_t>> reaches_;
};

std::string targetText(const Module &m, const PtsTarget &t);

/// Alias answer that uses only operand syntax: two accesses through the same
/// SSA pointer (or the same global) must-alias, everything else may-aliases.
AliasAnswer syntacticAlias(const Module &m, InstrId a, InstrId b);

} // namespace pdgkit
