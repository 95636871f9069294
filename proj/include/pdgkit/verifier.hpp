#pragma once

#include "pdgkit/ir.hpp"

#include <string>
#include <vector>

namespace pdgkit {

struct Diagnostic {
  EntityId entity;
  std::string rule;
  std::string message;
};

/// Empty iff the module satisfies every structural, typing, and SSA rule.
std::vector<Diagnostic> verifyModule(const Module &m);

std::string formatDiagnostic(const Diagnostic &d);

/// Throws IrError with the first diagnostic when the module is invalid.
void verifyOrThrow(const Module &m, std::string_view context);

} // namespace pdgkit
