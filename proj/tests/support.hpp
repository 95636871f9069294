// Helpers shared by the test executables: corpus access, random program
// generators and small reference implementations used as oracles.
#pragma once

#include "pdgkit/dataflow.hpp"
#include "pdgkit/graph.hpp"
#include "pdgkit/interpreter.hpp"
#include "pdgkit/ir.hpp"

#include <random>
#include <set>
#include <string>
#include <vector>

namespace pdgkit::testing {

struct CorpusProgram {
  std::string name;
  std::string path;
  std::string text;
  Module module;
  std::vector<std::vector<int64_t>> inputs;
  std::vector<std::pair<int64_t, int64_t>> ranges;

  std::vector<std::vector<int64_t>> randomInputs(size_t n, uint64_t seed) const;
  /// Listed inputs followed by `extra` random ones.
  std::vector<std::vector<int64_t>> allInputs(size_t extra, uint64_t seed = 1) const;
};

const std::vector<CorpusProgram> &corpus();
const CorpusProgram &corpusProgram(std::string_view name);

/// Parse and verify; fails the calling test on error.
Module parseChecked(std::string_view text);
std::string readText(const std::string &path);

/// Random single-function CFG: blocks b0..b<n-1>, every block reachable from
/// b0, no edge back into b0. With `mustReachExit` every block reaches a ret.
std::string randomCfgText(std::mt19937_64 &rng, size_t blocks, bool mustReachExit);

Adjacency randomDigraph(std::mt19937_64 &rng, size_t nodes, double density);

/// Dominance by definition: a dominates b iff b is unreachable from `root`
/// once a is removed (a == b always dominates).
std::vector<std::vector<char>> naiveDominance(const Adjacency &succs, uint32_t root);

/// Mutual reachability classes, each sorted, ordered by smallest member.
std::vector<std::vector<uint32_t>> bruteForceScc(const Adjacency &succs);

/// Union-find components, each sorted, ordered by smallest member.
std::vector<std::vector<uint32_t>> unionFindComponents(size_t n, const std::vector<std::pair<uint32_t, uint32_t>> &edges);

/// Round-robin iteration of the per-instruction equations until nothing
/// changes. Same boundary convention as the engine.
DataFlowResult chaoticIteration(const DataFlowProblem &p, const Function &f);

DataFlowProblem randomProblem(std::mt19937_64 &rng, const Function &f, size_t universe);

/// Blocks of the natural loop of every back edge, merged per header,
/// computed by backward search from the latch.
std::vector<std::pair<uint32_t, std::set<uint32_t>>> naiveNaturalLoops(const FunctionIndex &f);

} // namespace pdgkit::testing
