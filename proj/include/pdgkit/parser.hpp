#pragma once

#include "pdgkit/ir.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace pdgkit {

/// Source line of every parsed entity, indexed by ordinal.
struct SourceLines {
  std::vector<int> instructions;
  std::vector<int> blocks;
  std::vector<int> functions;
  /// 0 when unknown (loops, or entities created after parsing).
  int lineOf(const EntityId &e) const;
};

/// Parse textual IR. Entity ordinals are assigned in textual order, so two
/// parses of the same text produce identical ids. Throws IrError carrying the
/// line and column of the first problem.
Module parseModule(std::string_view text, SourceLines *lines = nullptr);

/// Canonical text: one instruction per line, blocks in stored order,
/// metadata last.
std::string printModule(const Module &m);
std::string printInstruction(const Instruction &inst);
std::string printFunction(const Function &f);

} // namespace pdgkit
