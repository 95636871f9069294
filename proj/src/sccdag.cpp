#include "pdgkit/sccdag.hpp"

#include "pdgkit/graph.hpp"
#include "pdgkit/parser.hpp"

#include <algorithm>
#include <climits>
#include <sstream>

namespace pdgkit {

std::string_view sccKindName(SccKind k) {
  switch (k) {
  case SccKind::Independent: return "Independent";
  case SccKind::Sequential: return "Sequential";
  case SccKind::Reducible: return "Reducible";
  }
  return "?";
}

std::string_view reductionOpName(ReductionOp op) {
  switch (op) {
  case ReductionOp::Add: return "add";
  case ReductionOp::Mul: return "mul";
  case ReductionOp::And: return "and";
  case ReductionOp::Or: return "or";
  case ReductionOp::Xor: return "xor";
  case ReductionOp::Min: return "min";
  case ReductionOp::Max: return "max";
  }
  return "?";
}

int64_t reductionIdentity(ReductionOp op) {
  switch (op) {
  case ReductionOp::Add: return 0;
  case ReductionOp::Mul: return 1;
  case ReductionOp::And: return -1;
  case ReductionOp::Or: return 0;
  case ReductionOp::Xor: return 0;
  case ReductionOp::Min: return INT64_MAX;
  case ReductionOp::Max: return INT64_MIN;
  }
  return 0;
}

int64_t applyReduction(ReductionOp op, int64_t a, int64_t b) {
  auto ua = static_cast<uint64_t>(a), ub = static_cast<uint64_t>(b);
  switch (op) {
  case ReductionOp::Add: return static_cast<int64_t>(ua + ub);
  case ReductionOp::Mul: return static_cast<int64_t>(ua * ub);
  case ReductionOp::And: return a & b;
  case ReductionOp::Or: return a | b;
  case ReductionOp::Xor: return a ^ b;
  case ReductionOp::Min: return std::min(a, b);
  case ReductionOp::Max: return std::max(a, b);
  }
  return 0;
}

bool SccDag::acyclic() const {
  Adjacency adj(sccs.size());
  for (auto [a, b] : edges) adj[a].push_back(b);
  auto part = stronglyConnectedComponents(adj);
  if (part.members.size() != sccs.size()) return false;
  for (auto [a, b] : edges)
    if (a == b) return false;
  return true;
}

std::string SccDag::dump(const Module &m) const {
  std::ostringstream os;
  for (const auto &s : sccs) {
    os << "SCC#" << s.id << ' ' << sccKindName(s.kind);
    if (s.reduction)
      os << '(' << reductionOpName(s.reduction->op) << ", identity " << s.reduction->identity << ')';
    os << " {";
    for (size_t k = 0; k < s.members.size(); ++k) os << (k ? ", " : "") << '#' << s.members[k].value;
    os << "}\n";
    for (InstrId i : s.members) os << "    #" << i.value << ": " << printInstruction(m.instr(i)) << '\n';
  }
  for (auto [a, b] : edges) os << "SCC#" << a << " -> SCC#" << b << '\n';
  return os.str();
}

std::string SccDag::dot(const Module &m) const {
  std::ostringstream os;
  os << "digraph sccdag {\n  compound=true;\n  node [shape=box];\n";
  for (const auto &s : sccs) {
    const char *color = s.kind == SccKind::Independent ? "green" : s.kind == SccKind::Reducible ? "blue" : "red";
    os << "  subgraph cluster_" << s.id << " {\n    label=\"SCC#" << s.id << ' ' << sccKindName(s.kind)
       << "\";\n    color=" << color << ";\n";
    for (InstrId i : s.members) {
      std::string text = printInstruction(m.instr(i));
      std::string esc;
      for (char c : text) {
        if (c == '"' || c == '\\') esc += '\\';
        esc += c;
      }
      os << "    I" << i.value << " [label=\"I" << i.value << ": " << esc << "\"];\n";
    }
    os << "  }\n";
  }
  for (auto [a, b] : edges)
    os << "  I" << sccs[a].members.front().value << " -> I" << sccs[b].members.front().value << " [ltail=cluster_"
       << a << ", lhead=cluster_" << b << "];\n";
  os << "}\n";
  return os.str();
}

SccDag buildSccDag(const DependenceGraph &ldg, LoopId loop) {
  SccDag dag;
  dag.loop = loop;
  std::unordered_map<uint32_t, uint32_t> local;
  for (uint32_t k = 0; k < ldg.internal.size(); ++k) local[ldg.internal[k].value] = k;
  Adjacency adj(ldg.internal.size());
  for (const auto &e : ldg.edges) {
    auto s = local.find(e.src.value), d = local.find(e.dst.value);
    if (s == local.end() || d == local.end()) continue;
    adj[s->second].push_back(d->second);
  }
  auto part = stronglyConnectedComponents(adj);
  std::vector<std::vector<InstrId>> groups;
  for (const auto &mem : part.members) {
    std::vector<InstrId> ids;
    for (uint32_t v : mem) ids.push_back(ldg.internal[v]);
    std::sort(ids.begin(), ids.end());
    groups.push_back(std::move(ids));
  }
  std::sort(groups.begin(), groups.end(), [](const auto &a, const auto &b) { return a.front() < b.front(); });
  for (uint32_t k = 0; k < groups.size(); ++k) {
    Scc s;
    s.id = k;
    s.members = std::move(groups[k]);
    for (InstrId i : s.members) dag.sccOf[i.value] = k;
    dag.sccs.push_back(std::move(s));
  }
  for (const auto &e : ldg.edges) {
    auto s = dag.sccOf.find(e.src.value), d = dag.sccOf.find(e.dst.value);
    if (s == dag.sccOf.end() || d == dag.sccOf.end()) continue;
    if (s->second != d->second) dag.edges.insert({s->second, d->second});
    else if (e.carriedFor(loop) != Carried::False) dag.sccs[s->second].hasCarried = true;
  }
  return dag;
}

std::optional<ReductionInfo> detectReduction(const Module &m, const DependenceGraph &ldg, const LoopStructure &l,
                                             const Scc &s) {
  if (s.members.size() != 2 && s.members.size() != 3) return std::nullopt;
  const auto &fn = m.functions[l.func];
  FunctionIndex idx(fn);
  auto isMember = [&](InstrId i) { return std::binary_search(s.members.begin(), s.members.end(), i); };

  const Instruction *phi = nullptr;
  for (InstrId i : s.members) {
    const auto &inst = m.instr(i);
    if (inst.isPhi()) {
      if (phi || m.loc(i).block != l.header || inst.type != Type::I64) return std::nullopt;
      phi = &inst;
    }
  }
  if (!phi) return std::nullopt;
  for (InstrId i : s.members)
    for (size_t e : ldg.incoming(i))
      if (ldg.edges[e].isMemory()) return std::nullopt;
  for (InstrId i : s.members)
    for (size_t e : ldg.outgoing(i))
      if (ldg.edges[e].isMemory()) return std::nullopt;

  // The latch arms must all carry the same update; entry arms come from outside.
  std::string updateName;
  for (size_t k = 0; k < phi->operands.size(); ++k) {
    int pred = idx.blockIndex(phi->incoming[k]);
    bool latch = std::find(l.latches.begin(), l.latches.end(), static_cast<uint32_t>(pred)) != l.latches.end();
    if (!latch) continue;
    if (!phi->operands[k].isLocal()) return std::nullopt;
    if (!updateName.empty() && updateName != phi->operands[k].name) return std::nullopt;
    updateName = phi->operands[k].name;
  }
  if (updateName.empty()) return std::nullopt;
  const Instruction *u = idx.defInstr(updateName);
  if (!u || !isMember(u->id)) return std::nullopt;

  ReductionInfo info;
  info.phi = phi->id;
  info.update = u->id;
  auto outsideScc = [&](const Operand &o) {
    if (!o.isLocal()) return true;
    const Instruction *d = idx.defInstr(o.name);
    return !d || !isMember(d->id);
  };

  if (s.members.size() == 2) {
    switch (u->op) {
    case Opcode::Add: info.op = ReductionOp::Add; break;
    case Opcode::Mul: info.op = ReductionOp::Mul; break;
    case Opcode::And: info.op = ReductionOp::And; break;
    case Opcode::Or: info.op = ReductionOp::Or; break;
    case Opcode::Xor: info.op = ReductionOp::Xor; break;
    default: return std::nullopt;
    }
    bool shape = (u->operands[0].isLocal(phi->result) && outsideScc(u->operands[1])) ||
                 (u->operands[1].isLocal(phi->result) && outsideScc(u->operands[0]));
    if (!shape) return std::nullopt;
  } else {
    if (u->op != Opcode::Select || !u->operands[0].isLocal()) return std::nullopt;
    const Instruction *c = idx.defInstr(u->operands[0].name);
    if (!c || !isMember(c->id)) return std::nullopt;
    info.compare = c->id;
    const Operand &L = c->operands[0], &R = c->operands[1];
    const Operand &T = u->operands[1], &F = u->operands[2];
    bool lIsPhi = L.isLocal(phi->result), rIsPhi = R.isLocal(phi->result);
    if (lIsPhi == rIsPhi) return std::nullopt;
    const Operand &x = lIsPhi ? R : L;
    if (!outsideScc(x)) return std::nullopt;
    bool pickL;
    if (T == L && F == R) pickL = true;
    else if (T == R && F == L) pickL = false;
    else return std::nullopt;
    bool lessThan;
    switch (c->op) {
    case Opcode::Slt:
    case Opcode::Sle: lessThan = true; break;
    case Opcode::Sgt:
    case Opcode::Sge: lessThan = false; break;
    default: return std::nullopt;
    }
    info.op = (lessThan == pickL) ? ReductionOp::Min : ReductionOp::Max;
  }
  info.identity = reductionIdentity(info.op);

  // Inside the loop the accumulator may only feed SCC members.
  for (const std::string &name : {phi->result, u->result}) {
    for (auto [b, k] : idx.uses(name)) {
      const auto &user = fn.blocks[b].insts[k];
      if (l.containsBlock(b)) {
        if (!isMember(user.id)) return std::nullopt;
      } else {
        info.liveOutUses.push_back(user.id);
      }
    }
  }
  std::sort(info.liveOutUses.begin(), info.liveOutUses.end());
  return info;
}

SccKind classifyScc(const Module &m, const DependenceGraph &ldg, const LoopStructure &l, Scc &s) {
  s.reduction.reset();
  if (!s.hasCarried) {
    s.kind = SccKind::Independent;
  } else if (auto r = detectReduction(m, ldg, l, s)) {
    s.kind = SccKind::Reducible;
    s.reduction = std::move(r);
  } else {
    s.kind = SccKind::Sequential;
  }
  return s.kind;
}

SccDag buildClassifiedSccDag(const Module &m, const DependenceGraph &ldg, const LoopStructure &l) {
  SccDag dag = buildSccDag(ldg, l.id);
  for (auto &s : dag.sccs) classifyScc(m, ldg, l, s);
  return dag;
}

} // namespace pdgkit
