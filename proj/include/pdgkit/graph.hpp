#pragma once

#include <cstdint>
#include <vector>

namespace pdgkit {

using Adjacency = std::vector<std::vector<uint32_t>>;

/// Strongly connected components (Tarjan). `component[v]` is the index of
/// v's component; components are numbered in reverse topological order of
/// the condensation (sinks first), as Tarjan's algorithm emits them.
struct SccPartition {
  std::vector<uint32_t> component;
  std::vector<std::vector<uint32_t>> members;
};

SccPartition stronglyConnectedComponents(const Adjacency &succs);

/// Connected components of the undirected view of `succs`.
std::vector<uint32_t> weakComponents(const Adjacency &succs);

} // namespace pdgkit
