//===- transforms.hpp - Code motion, dead functions, linking ----*- C++ -*-===//
#pragma once

#include "pdgkit/pdg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdgkit {

/// Insertion point: before `before`, or before the block's terminator when
/// `before` is empty.
struct MovePoint {
  uint32_t func = 0;
  uint32_t block = 0;
  std::optional<InstrId> before;
};

MovePoint movePointBefore(const Module &m, InstrId anchor);

/// Same-block moves, or moves between control-equivalent blocks of the same
/// loop nest (target dominates and is post-dominated by the source, or the
/// reverse). `why` receives the reason on failure.
bool canMoveBefore(const Module &m, const DependenceGraph &pdg, InstrId i, const MovePoint &p,
                   std::string *why = nullptr);

/// Throws IrError when the move is illegal.
Module moveBefore(const Module &m, InstrId i, const MovePoint &p);

struct DfeResult {
  Module module;
  std::vector<std::string> removed;
  /// Islands of the call graph none of whose functions survive.
  size_t droppedIslands = 0;
  std::string summary() const;
};

DfeResult deadFunctionElimination(const Module &m);

/// Concatenates modules (functions and globals must have distinct names),
/// renumbering entities. Profiles are concatenated per entity and re-keyed
/// to the linked module; embedded PDG lines are shifted to the new ordinals.
Module linkModules(const std::vector<Module> &parts);

} // namespace pdgkit
