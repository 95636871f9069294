//===- loop_transforms.hpp - Preheaders, IV chunking, hoisting, LICM -*- C++ -*-===//
#pragma once

#include "pdgkit/loop_analysis.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdgkit {

/// Returns a copy of `m` in which loop `l` has a dedicated preheader. The
/// module is returned unchanged when one already exists.
Module createPreheader(const Module &m, LoopId l);

/// Rewrites basic IV `ivPhi` of loop `l` to visit start + offset*step,
/// start + (offset+factor)*step, ... Requires a while-shaped governing
/// compare on the phi that keeps running on `<`/`<=` (positive step) or
/// `>`/`>=` (negative step).
Module scaleIvStep(const Module &m, LoopId l, InstrId ivPhi, int64_t factor, int64_t offset);

/// Same rewrite with factor and offset given as values of the loop's function.
Module scaleIvStep(const Module &m, LoopId l, InstrId ivPhi, const Operand &factor, const Operand &offset);

/// Reason `i` may not be hoisted out of `l`, or nullopt when it may. Operands
/// defined inside the loop are accepted only if listed in `alreadyHoisted`.
std::optional<std::string> hoistBlocker(ProgramAnalysis &pa, LoopId l, InstrId i,
                                        const std::set<InstrId> &alreadyHoisted = {});

Module hoistToPreheader(const Module &m, LoopId l, InstrId i);

struct LicmOptions {
  /// Skip loops whose profiled hotness is below this fraction.
  std::optional<double> hotThreshold;
  /// Hoist only what the operand/alias-based test accepts, in one pass.
  bool naive = false;
};

struct LicmResult {
  Module module;
  /// (loop id, instructions hoisted) in processing order.
  std::vector<std::pair<LoopId, size_t>> hoisted;
  size_t total() const;
  std::string summary() const;
};

LicmResult licm(const Module &m, const LicmOptions &opts = {});

} // namespace pdgkit
