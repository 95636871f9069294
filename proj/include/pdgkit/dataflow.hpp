//===- dataflow.hpp - Bit-vector data-flow engine ---------------*- C++ -*-===//
#pragma once

#include "pdgkit/ir.hpp"

#include <boost/dynamic_bitset.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pdgkit {

using BitSet = boost::dynamic_bitset<>;

enum class FlowDirection : uint8_t { Forward, Backward };
enum class Meet : uint8_t { Union, Intersection };

/// gen/kill are indexed by the instruction's position in the function
/// (textual order, 0-based).
struct DataFlowProblem {
  FlowDirection direction = FlowDirection::Forward;
  Meet meet = Meet::Union;
  size_t universe = 0;
  std::vector<BitSet> gen;
  std::vector<BitSet> kill;
  /// IN of the entry (forward) or OUT of every exit block (backward).
  BitSet boundary;
};

struct DataFlowResult {
  std::vector<BitSet> in;
  std::vector<BitSet> out;
  size_t blockVisits = 0;
  friend bool operator==(const DataFlowResult &a, const DataFlowResult &b) { return a.in == b.in && a.out == b.out; }
};

struct SolveOptions {
  /// Replace the loop-depth/RPO priority by a seeded random one.
  std::optional<uint64_t> randomPrioritySeed;
};

/// Instructions of `f` in textual order; position k matches gen[k]/kill[k].
std::vector<const Instruction *> linearize(const Function &f);

/// Checks sizes and gen/kill disjointness; throws IrError on violation.
void validateProblem(const DataFlowProblem &p, const Function &f);

DataFlowResult solve(const DataFlowProblem &p, const Function &f, const SolveOptions &opts = {});

/// Universe = parameters (positions 0..P-1) followed by instructions.
DataFlowProblem livenessProblem(const Function &f);
DataFlowResult liveness(const Function &f);

/// Universe = instructions by position; only value-defining ones are generated.
DataFlowProblem reachingDefinitionsProblem(const Function &f);
DataFlowResult reachingDefinitions(const Function &f);

/// "IN[#k] = {...}" / "OUT[#k] = {...}" lines with sorted element indices.
std::string dumpResult(const Function &f, const DataFlowResult &r);

} // namespace pdgkit
