#include "pdgkit/callgraph.hpp"

#include "pdgkit/graph.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace pdgkit {

CallGraph CallGraph::build(const Module &m, const PointsTo &pts) {
  CallGraph cg;
  cg.numFunctions_ = m.functions.size();
  cg.succs_.assign(m.functions.size(), {});
  std::map<std::pair<uint32_t, uint32_t>, CallEdge> agg;
  for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
    for (const auto &b : m.functions[fi].blocks)
      for (const auto &i : b.insts) {
        if (!i.isCall()) continue;
        const auto &targets = pts.callees(i.id);
        if (targets.empty()) cg.unresolved_.push_back(i.id);
        bool must = i.op == Opcode::Call || targets.size() == 1;
        for (uint32_t c : targets) {
          auto &e = agg[{fi, c}];
          e.caller = fi;
          e.callee = c;
          e.must |= must;
          e.sites.push_back(i.id);
        }
      }
  }
  for (auto &[key, e] : agg) {
    cg.succs_[e.caller].push_back(e.callee);
    cg.edges_.push_back(std::move(e));
  }
  return cg;
}

bool CallGraph::hasEdge(uint32_t caller, uint32_t callee) const {
  const auto &s = succs_[caller];
  return std::find(s.begin(), s.end(), callee) != s.end();
}

std::string CallGraph::dump(const Module &m) const {
  std::ostringstream os;
  for (const auto &e : edges_) {
    os << '@' << m.functions[e.caller].name << " -> @" << m.functions[e.callee].name << ' '
       << (e.must ? "must" : "may") << " via ";
    for (size_t k = 0; k < e.sites.size(); ++k) os << (k ? "," : "") << '#' << e.sites[k].value;
    os << '\n';
  }
  return os.str();
}

std::string CallGraph::dot(const Module &m) const {
  std::ostringstream os;
  os << "digraph callgraph {\n";
  for (uint32_t f = 0; f < m.functions.size(); ++f)
    os << "  f" << f << " [label=\"@" << m.functions[f].name << "\"];\n";
  for (const auto &e : edges_) {
    os << "  f" << e.caller << " -> f" << e.callee << " [label=\"";
    for (size_t k = 0; k < e.sites.size(); ++k) os << (k ? "," : "") << '#' << e.sites[k].value;
    os << '"' << (e.must ? "" : ", style=dashed") << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<std::vector<uint32_t>> islands(const Module &m, const CallGraph &cg) {
  Adjacency adj(cg.numFunctions());
  for (const auto &e : cg.edges()) adj[e.caller].push_back(e.callee);
  auto comp = weakComponents(adj);
  std::map<uint32_t, std::vector<uint32_t>> groups;
  for (uint32_t f = 0; f < comp.size(); ++f) groups[comp[f]].push_back(f);
  std::vector<std::vector<uint32_t>> out;
  for (auto &[rep, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](uint32_t a, uint32_t b) { return m.functions[a].name < m.functions[b].name; });
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end(), [&](const auto &a, const auto &b) {
    return m.functions[a.front()].name < m.functions[b.front()].name;
  });
  return out;
}

std::set<uint32_t> reachableFunctions(const CallGraph &cg, const std::set<uint32_t> &roots) {
  std::set<uint32_t> seen;
  std::vector<uint32_t> work;
  for (uint32_t r : roots) {
    if (r >= cg.numFunctions()) throw IrError("unknown root function #" + std::to_string(r));
    if (seen.insert(r).second) work.push_back(r);
  }
  while (!work.empty()) {
    uint32_t f = work.back();
    work.pop_back();
    for (uint32_t c : cg.callees(f))
      if (seen.insert(c).second) work.push_back(c);
  }
  return seen;
}

std::set<uint32_t> addressTakenFunctions(const Module &m) {
  std::set<uint32_t> out;
  for (const auto &f : m.functions)
    for (const auto &b : f.blocks)
      for (const auto &i : b.insts)
        if (i.op == Opcode::FuncPtr) out.insert(static_cast<uint32_t>(m.functionIndex(i.operands[0].name)));
  return out;
}

} // namespace pdgkit
