#include "pdgkit/transforms.hpp"

#include "pdgkit/callgraph.hpp"
#include "pdgkit/interpreter.hpp"
#include "pdgkit/verifier.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <sstream>

namespace pdgkit {

MovePoint movePointBefore(const Module &m, InstrId anchor) {
  if (anchor.value >= m.numInstructions()) throw IrError("no instruction #" + std::to_string(anchor.value));
  auto loc = m.loc(anchor);
  return {loc.func, loc.block, anchor};
}

namespace {

bool mayTrap(const Instruction &i) {
  switch (i.op) {
  case Opcode::SDiv:
  case Opcode::SRem: return !(i.operands[1].isLiteral() && i.operands[1].value != 0);
  case Opcode::Load:
  case Opcode::Store:
  case Opcode::Call:
  case Opcode::ICall: return true;
  default: return false;
  }
}

bool observable(const Instruction &i) {
  return i.op == Opcode::Print || i.op == Opcode::Store || i.isCall();
}

/// Blocks strictly between `from` and `to` on some path from -> to.
std::vector<uint32_t> regionBetween(const FunctionIndex &idx, uint32_t from, uint32_t to) {
  const size_t n = idx.numBlocks();
  std::vector<char> fwd(n, 0), bwd(n, 0);
  std::deque<uint32_t> q;
  for (uint32_t s : idx.succs(from))
    if (s != to && s != from && !fwd[s]) fwd[s] = 1, q.push_back(s);
  while (!q.empty()) {
    uint32_t b = q.front();
    q.pop_front();
    for (uint32_t s : idx.succs(b))
      if (s != to && s != from && !fwd[s]) fwd[s] = 1, q.push_back(s);
  }
  for (uint32_t p : idx.preds(to))
    if (p != to && p != from && !bwd[p]) bwd[p] = 1, q.push_back(p);
  while (!q.empty()) {
    uint32_t b = q.front();
    q.pop_front();
    for (uint32_t p : idx.preds(b))
      if (p != to && p != from && !bwd[p]) bwd[p] = 1, q.push_back(p);
  }
  std::vector<uint32_t> out;
  for (uint32_t b = 0; b < n; ++b)
    if (fwd[b] && bwd[b]) out.push_back(b);
  return out;
}

Module applyMove(const Module &m, InstrId i, const MovePoint &p) {
  Module out = m;
  auto loc = m.loc(i);
  auto &fn = out.functions[loc.func];
  Instruction inst = fn.blocks[loc.block].insts[loc.index];
  size_t t = p.before ? m.loc(*p.before).index : fn.blocks[p.block].insts.size() - 1;
  auto &src = fn.blocks[loc.block].insts;
  src.erase(src.begin() + loc.index);
  if (p.block == loc.block && t > loc.index) --t;
  auto &dst = fn.blocks[p.block].insts;
  dst.insert(dst.begin() + static_cast<long>(t), std::move(inst));
  out.eraseMeta("prof");
  out.renumber();
  return out;
}

} // namespace

bool canMoveBefore(const Module &m, const DependenceGraph &pdg, InstrId i, const MovePoint &p, std::string *why) {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  if (i.value >= m.numInstructions()) return fail("no instruction #" + std::to_string(i.value));
  auto li = m.loc(i);
  const auto &inst = m.instr(i);
  if (p.func != li.func) return fail("target is in a different function");
  if (inst.isPhi() || inst.isTerminator()) return fail("phis and terminators cannot be moved");
  const auto &fn = m.functions[li.func];
  if (p.block >= fn.blocks.size()) return fail("no such block");
  const auto &tb = fn.blocks[p.block];
  size_t t = tb.insts.size() - 1;
  if (p.before) {
    if (p.before->value >= m.numInstructions()) return fail("no instruction #" + std::to_string(p.before->value));
    auto bl = m.loc(*p.before);
    if (bl.func != p.func || bl.block != p.block) return fail("anchor is not in the target block");
    t = bl.index;
  }
  if (t < tb.firstNonPhi()) return fail("cannot insert among phis");
  if (p.block == li.block && (t == li.index || t == li.index + 1)) return true;

  FunctionIndex idx(fn);
  std::vector<InstrId> passed;
  auto addRange = [&](uint32_t b, size_t lo, size_t hi) {
    for (size_t k = lo; k < hi; ++k) passed.push_back(fn.blocks[b].insts[k].id);
  };
  if (p.block == li.block) {
    if (t > li.index) addRange(li.block, li.index + 1, t);
    else addRange(li.block, t, li.index);
  } else {
    auto dom = computeDominators(idx, DomDirection::Forward);
    auto post = computeDominators(idx, DomDirection::Post);
    auto loops = detectLoops(m);
    if (loops.innermost(li.func, li.block) != loops.innermost(li.func, p.block))
      return fail("source and target are in different loops");
    bool up = dom.strictlyDominates(p.block, li.block) && post.dominates(li.block, p.block);
    bool down = dom.strictlyDominates(li.block, p.block) && post.dominates(p.block, li.block);
    if (!up && !down) return fail("blocks are not control equivalent");
    if (up) {
      addRange(p.block, t, tb.insts.size());
      for (uint32_t b : regionBetween(idx, p.block, li.block)) addRange(b, 0, fn.blocks[b].insts.size());
      addRange(li.block, 0, li.index);
    } else {
      addRange(li.block, li.index + 1, fn.blocks[li.block].insts.size());
      for (uint32_t b : regionBetween(idx, li.block, p.block)) addRange(b, 0, fn.blocks[b].insts.size());
      addRange(p.block, 0, t);
    }
  }

  std::set<InstrId> partners;
  for (size_t e : pdg.incoming(i)) partners.insert(pdg.edges[e].src);
  for (size_t e : pdg.outgoing(i)) partners.insert(pdg.edges[e].dst);
  for (InstrId j : passed) {
    if (partners.count(j)) return fail("#" + std::to_string(i.value) + " depends on #" + std::to_string(j.value));
    const auto &ji = m.instr(j);
    if ((mayTrap(inst) && observable(ji)) || (mayTrap(ji) && observable(inst)))
      return fail("would reorder #" + std::to_string(i.value) + " with side effects of #" + std::to_string(j.value));
  }
  auto diags = verifyModule(applyMove(m, i, p));
  if (!diags.empty()) return fail("move breaks SSA: " + formatDiagnostic(diags.front()));
  return true;
}

Module moveBefore(const Module &m, InstrId i, const MovePoint &p) {
  auto pts = PointsTo::compute(m);
  auto pdg = buildPdg(m, pts);
  std::string why;
  if (!canMoveBefore(m, pdg, i, p, &why)) throw IrError("illegal move: " + why);
  return applyMove(m, i, p);
}

std::string DfeResult::summary() const {
  std::ostringstream os;
  os << "removed " << removed.size() << " function" << (removed.size() == 1 ? "" : "s");
  if (!removed.empty()) {
    os << ':';
    for (const auto &n : removed) os << " @" << n;
  }
  os << "\ndropped " << droppedIslands << " unreachable island" << (droppedIslands == 1 ? "" : "s") << '\n';
  return os.str();
}

DfeResult deadFunctionElimination(const Module &m) {
  int mainIdx = m.functionIndex("main");
  if (mainIdx < 0) throw IrError("dead function elimination needs @main");
  auto pts = PointsTo::compute(m);
  auto cg = CallGraph::build(m, pts);
  std::set<uint32_t> roots = addressTakenFunctions(m);
  roots.insert(static_cast<uint32_t>(mainIdx));
  auto live = reachableFunctions(cg, roots);

  DfeResult r;
  for (const auto &isl : islands(m, cg))
    if (std::none_of(isl.begin(), isl.end(), [&](uint32_t f) { return live.count(f) > 0; })) ++r.droppedIslands;
  r.module = m;
  std::vector<Function> kept;
  for (uint32_t f = 0; f < m.functions.size(); ++f) {
    if (live.count(f)) kept.push_back(m.functions[f]);
    else r.removed.push_back(m.functions[f].name);
  }
  if (r.removed.empty()) return r;
  r.module.functions = std::move(kept);
  std::set<std::string> gone(r.removed.begin(), r.removed.end());
  std::erase_if(r.module.metadata,
                [&](const MetaEntry &e) { return e.key == kTaskMetaKey && gone.count(e.text); });
  r.module.eraseMeta("prof");
  r.module.eraseMeta("pdg");
  r.module.renumber();
  return r;
}

Module linkModules(const std::vector<Module> &parts) {
  Module out;
  std::set<std::string> fnames, gnames;
  std::vector<uint32_t> instrBase, loopBase;
  uint32_t instrs = 0, loopsSoFar = 0;
  bool anyProfile = false;
  for (const auto &p : parts) {
    for (const auto &g : p.globals)
      if (!gnames.insert(g.name).second) throw IrError("duplicate definition of global @" + g.name);
    for (const auto &f : p.functions)
      if (!fnames.insert(f.name).second) throw IrError("duplicate definition of function @" + f.name);
    instrBase.push_back(instrs);
    loopBase.push_back(loopsSoFar);
    instrs += static_cast<uint32_t>(p.numInstructions());
    loopsSoFar += static_cast<uint32_t>(detectLoops(p).loops.size());
    anyProfile = anyProfile || !p.metaValues("prof").empty();
  }

  ProfileData prof;
  static const std::regex loopRef(R"(L(\d+):)");
  for (size_t k = 0; k < parts.size(); ++k) {
    const auto &p = parts[k];
    out.globals.insert(out.globals.end(), p.globals.begin(), p.globals.end());
    out.functions.insert(out.functions.end(), p.functions.begin(), p.functions.end());
    for (const auto &e : p.metadata) {
      if (e.key == "prof") continue;
      if (e.key != "pdg") {
        out.metadata.push_back(e);
        continue;
      }
      std::istringstream is(e.text);
      uint32_t src = 0, dst = 0;
      is >> src >> dst;
      std::string rest;
      std::getline(is, rest);
      std::string shifted;
      auto it = std::sregex_iterator(rest.begin(), rest.end(), loopRef);
      size_t last = 0;
      for (; it != std::sregex_iterator(); ++it) {
        shifted += rest.substr(last, static_cast<size_t>(it->position()) - last);
        shifted += "L" + std::to_string(std::stoul((*it)[1]) + loopBase[k]) + ":";
        last = static_cast<size_t>(it->position() + it->length());
      }
      shifted += rest.substr(last);
      out.metadata.push_back({"pdg", std::to_string(src + instrBase[k]) + " " + std::to_string(dst + instrBase[k]) + shifted});
    }
    if (!anyProfile) continue;
    auto pp = readProfile(p);
    ProfileData part;
    if (pp) {
      part = *pp;
    } else {
      part.instrCount.assign(p.numInstructions(), 0);
      part.blockCount.assign(p.numBlocks(), 0);
      part.loopInvocations.assign(detectLoops(p).loops.size(), 0);
      part.loopIterations = part.loopInvocations;
      part.functionInvocations.assign(p.functions.size(), 0);
    }
    auto append = [](std::vector<uint64_t> &a, const std::vector<uint64_t> &b) { a.insert(a.end(), b.begin(), b.end()); };
    append(prof.instrCount, part.instrCount);
    append(prof.blockCount, part.blockCount);
    append(prof.loopInvocations, part.loopInvocations);
    append(prof.loopIterations, part.loopIterations);
    append(prof.functionInvocations, part.functionInvocations);
  }
  out.renumber();
  verifyOrThrow(out, "link");
  if (anyProfile) {
    prof.fingerprint = moduleFingerprint(out);
    out = embedProfile(out, prof);
  }
  return out;
}

} // namespace pdgkit
