#include "pdgkit/loop_analysis.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace pdgkit {

namespace {

bool isHeaderPhi(const Module &m, const LoopStructure &l, InstrId i) {
  auto loc = m.loc(i);
  return m.instr(i).isPhi() && loc.func == l.func && loc.block == l.header;
}

bool isExitingBranch(const Module &m, const LoopStructure &l, const FunctionIndex &idx, InstrId i) {
  const auto &inst = m.instr(i);
  if (!inst.isTerminator()) return false;
  auto loc = m.loc(i);
  for (uint32_t s : idx.succs(loc.block))
    if (!l.containsBlock(s)) return true;
  return false;
}

/// Branches inside the loop that pick which arm a non-header phi takes.
std::vector<InstrId> phiDeciders(const Module &m, const LoopStructure &l, const DependenceGraph &ldg,
                                 const FunctionIndex &idx, InstrId phi) {
  const auto &fn = m.functions[l.func];
  std::vector<InstrId> out;
  auto loc = m.loc(phi);
  for (uint32_t p : idx.preds(loc.block)) {
    const auto &term = fn.blocks[p].terminator();
    if (idx.succs(p).size() > 1) out.push_back(term.id);
    for (size_t e : ldg.incoming(term.id))
      if (ldg.edges[e].isControl()) out.push_back(ldg.edges[e].src);
  }
  std::erase_if(out, [&](InstrId b) { return !l.containsInstr(m, b) || isExitingBranch(m, l, idx, b); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

class InvarianceQuery {
public:
  InvarianceQuery(const Module &m, const LoopStructure &l, const DependenceGraph &ldg)
      : m_(m), l_(l), ldg_(ldg), idx_(m.functions[l.func]) {}

  bool query(InstrId i) {
    std::vector<InstrId> stack;
    return visit(i, stack);
  }

private:
  bool visit(InstrId i, std::vector<InstrId> &stack) {
    if (auto it = memo_.find(i.value); it != memo_.end()) return it->second;
    if (std::find(stack.begin(), stack.end(), i) != stack.end()) return false;
    bool r = evaluate(i, stack);
    memo_[i.value] = r;
    return r;
  }

  bool evaluate(InstrId i, std::vector<InstrId> &stack) {
    const auto &inst = m_.instr(i);
    if (inst.isTerminator() || inst.op == Opcode::Alloca || isHeaderPhi(m_, l_, i)) return false;
    std::vector<InstrId> deps;
    for (size_t e : ldg_.incoming(i)) {
      const auto &edge = ldg_.edges[e];
      if (edge.cls == DepClass::Data) deps.push_back(edge.src);
    }
    if (inst.isPhi()) {
      bool same = std::all_of(inst.operands.begin(), inst.operands.end(),
                              [&](const Operand &o) { return o == inst.operands.front(); });
      if (!same)
        for (InstrId b : phiDeciders(m_, l_, ldg_, idx_, i))
          for (size_t e : ldg_.incoming(b))
            if (ldg_.edges[e].cls == DepClass::Data) deps.push_back(ldg_.edges[e].src);
    }
    stack.push_back(i);
    for (InstrId j : deps) {
      if (!l_.containsInstr(m_, j)) continue;
      if (!visit(j, stack)) {
        stack.pop_back();
        return false;
      }
    }
    stack.pop_back();
    return true;
  }

  const Module &m_;
  const LoopStructure &l_;
  const DependenceGraph &ldg_;
  FunctionIndex idx_;
  std::unordered_map<uint32_t, bool> memo_;
};

std::vector<InstrId> loopInstructions(const Module &m, const LoopStructure &l) {
  std::vector<InstrId> out;
  const auto &fn = m.functions[l.func];
  for (uint32_t b : l.blocks)
    for (const auto &i : fn.blocks[b].insts) out.push_back(i.id);
  std::sort(out.begin(), out.end());
  return out;
}

bool writes(const Module &m, const PointsTo &pts, InstrId j, const std::set<ObjectRef> &objs) {
  const auto &inst = m.instr(j);
  std::set<ObjectRef> w;
  if (inst.op == Opcode::Store || inst.op == Opcode::Print) w = pts.objects(j);
  else if (inst.isCall()) w = pts.callEffects(j).mod;
  for (const auto &o : w)
    if (objs.count(o)) return true;
  return false;
}

} // namespace

bool isInvariant(const Module &m, const LoopStructure &l, const DependenceGraph &ldg, InstrId i) {
  return InvarianceQuery(m, l, ldg).query(i);
}

std::vector<InstrId> invariantCandidates(const Module &m, const LoopStructure &l) {
  std::vector<InstrId> out;
  for (InstrId i : loopInstructions(m, l))
    if (!m.instr(i).isTerminator() && !isHeaderPhi(m, l, i)) out.push_back(i);
  return out;
}

std::set<InstrId> invariantsOfLoop(const Module &m, const LoopStructure &l, const DependenceGraph &ldg) {
  InvarianceQuery q(m, l, ldg);
  std::set<InstrId> out;
  for (InstrId i : invariantCandidates(m, l))
    if (q.query(i)) out.insert(i);
  return out;
}

bool naiveIsInvariant(const Module &m, const LoopInfo &loops, const LoopStructure &l, const PointsTo &pts,
                      InstrId i) {
  const auto &inst = m.instr(i);
  if (inst.isTerminator() || inst.isPhi() || inst.op == Opcode::Alloca || inst.op == Opcode::Print) return false;
  const auto &fn = m.functions[l.func];
  FunctionIndex idx(fn);
  for (const Operand *o : inst.valueOperands()) {
    if (!o->isLocal()) continue;
    const Instruction *d = idx.defInstr(o->name);
    if (d && l.containsInstr(m, d->id)) return false;
  }
  auto body = loopInstructions(m, l);

  if (inst.op == Opcode::Load) {
    for (InstrId j : body) {
      const auto &ji = m.instr(j);
      if (ji.op == Opcode::Store && pts.alias(j, i) != AliasAnswer::NoAlias) return false;
      if (ji.isCall() && (static_cast<uint8_t>(pts.modRef(j, i)) & static_cast<uint8_t>(ModRef::Mod))) return false;
    }
    return true;
  }
  if (inst.op == Opcode::Store) {
    auto dom = computeDominators(idx, DomDirection::Forward);
    auto at = m.loc(i);
    for (InstrId j : body) {
      const auto &ji = m.instr(j);
      bool memUse = ji.op == Opcode::Load || (ji.isCall() && !pts.callEffects(j).ref.empty());
      if (!memUse) continue;
      auto jl = m.loc(j);
      bool dominated = at.block == jl.block ? at.index < jl.index : dom.strictlyDominates(at.block, jl.block);
      if (!dominated) return false;
    }
    // The store itself is a definition inside the loop, so the header merges
    // memory states and the nearest dominating access lies in the loop.
    return false;
  }
  if (inst.isCall()) {
    auto eff = pts.callEffects(i);
    if (!eff.mod.empty()) return false;
    std::set<ObjectRef> argObjs;
    for (const auto &a : inst.callArgs())
      for (const auto &t : pts.operandPts(l.func, a)) argObjs.insert(t.object);
    for (const auto &o : eff.ref) {
      bool calleeLocal = o.kind == ObjectRef::Kind::Alloca && m.loc(InstrId(o.index)).func != l.func;
      if (!argObjs.count(o) && !calleeLocal) return false;
    }
    // Argument memory must not be modified anywhere in the loop nest.
    for (const auto &sub : loops.loops) {
      if (sub.func != l.func || !l.containsBlock(sub.header)) continue;
      for (InstrId j : loopInstructions(m, sub))
        if (writes(m, pts, j, eff.ref)) return false;
    }
    return true;
  }
  return true;
}

std::set<InstrId> naiveInvariantsOfLoop(const Module &m, const LoopInfo &loops, const LoopStructure &l,
                                        const PointsTo &pts) {
  std::set<InstrId> out;
  for (InstrId i : invariantCandidates(m, l))
    if (naiveIsInvariant(m, loops, l, pts, i)) out.insert(i);
  return out;
}

std::optional<int64_t> tripCount(int64_t start, int64_t step, ContinuePredicate pred, int64_t bound, bool testsPhi) {
  using W = __int128;
  const W s = step, b = bound, v0 = start;
  const W k0 = testsPhi ? 0 : 1;
  auto value = [&](W k) { return v0 + k * s; };
  auto ceilDiv = [](W x, W d) { return x >= 0 ? (x + d - 1) / d : -((-x) / d); };
  auto cont = [&](W v) {
    switch (pred) {
    case ContinuePredicate::Lt: return v < b;
    case ContinuePredicate::Le: return v <= b;
    case ContinuePredicate::Gt: return v > b;
    case ContinuePredicate::Ge: return v >= b;
    case ContinuePredicate::Ne: return v != b;
    case ContinuePredicate::Eq: return v == b;
    }
    return false;
  };
  std::optional<W> k;
  if (!cont(value(k0))) {
    k = k0;
  } else if (s != 0) {
    switch (pred) {
    case ContinuePredicate::Lt:
    case ContinuePredicate::Le: {
      if (s < 0) break;
      W limit = pred == ContinuePredicate::Lt ? b : b + 1;
      k = std::max(k0, ceilDiv(limit - v0, s));
      break;
    }
    case ContinuePredicate::Gt:
    case ContinuePredicate::Ge: {
      if (s > 0) break;
      W limit = pred == ContinuePredicate::Gt ? b : b - 1;
      k = std::max(k0, ceilDiv(v0 - limit, -s));
      break;
    }
    case ContinuePredicate::Ne:
      if ((b - v0) % s == 0 && (b - v0) / s >= k0) k = (b - v0) / s;
      break;
    case ContinuePredicate::Eq: k = k0 + 1; break;
    }
  }
  if (!k) return std::nullopt;
  W last = value(*k);
  if (last > INT64_MAX || last < INT64_MIN || *k > INT64_MAX) return std::nullopt;
  return static_cast<int64_t>(*k);
}

namespace {

ContinuePredicate fromCompare(Opcode op) {
  switch (op) {
  case Opcode::Slt: return ContinuePredicate::Lt;
  case Opcode::Sle: return ContinuePredicate::Le;
  case Opcode::Sgt: return ContinuePredicate::Gt;
  case Opcode::Sge: return ContinuePredicate::Ge;
  case Opcode::Ne: return ContinuePredicate::Ne;
  default: return ContinuePredicate::Eq;
  }
}

ContinuePredicate swapSides(ContinuePredicate p) {
  switch (p) {
  case ContinuePredicate::Lt: return ContinuePredicate::Gt;
  case ContinuePredicate::Le: return ContinuePredicate::Ge;
  case ContinuePredicate::Gt: return ContinuePredicate::Lt;
  case ContinuePredicate::Ge: return ContinuePredicate::Le;
  default: return p;
  }
}

ContinuePredicate negate(ContinuePredicate p) {
  switch (p) {
  case ContinuePredicate::Lt: return ContinuePredicate::Ge;
  case ContinuePredicate::Le: return ContinuePredicate::Gt;
  case ContinuePredicate::Gt: return ContinuePredicate::Le;
  case ContinuePredicate::Ge: return ContinuePredicate::Lt;
  case ContinuePredicate::Ne: return ContinuePredicate::Eq;
  case ContinuePredicate::Eq: return ContinuePredicate::Ne;
  }
  return p;
}

} // namespace

LoopIvs detectIvs(const Module &m, const LoopStructure &l, const SccDag &dag, const std::set<InstrId> &inv) {
  LoopIvs out;
  const auto &fn = m.functions[l.func];
  FunctionIndex idx(fn);
  auto isLatch = [&](uint32_t b) { return std::find(l.latches.begin(), l.latches.end(), b) != l.latches.end(); };
  auto invariantOperand = [&](const Operand &o) {
    if (!o.isLocal()) return o.isLiteral();
    const Instruction *d = idx.defInstr(o.name);
    if (!d) return true;
    return !l.containsInstr(m, d->id) || inv.count(d->id) > 0;
  };

  const auto &header = fn.blocks[l.header];
  for (size_t k = 0; k < header.firstNonPhi(); ++k) {
    const auto &phi = header.insts[k];
    if (phi.type != Type::I64) continue;
    std::optional<Operand> start;
    std::string updName;
    bool ok = true;
    for (size_t a = 0; a < phi.operands.size() && ok; ++a) {
      int pred = idx.blockIndex(phi.incoming[a]);
      if (isLatch(static_cast<uint32_t>(pred))) {
        if (!phi.operands[a].isLocal() || (!updName.empty() && updName != phi.operands[a].name)) ok = false;
        else updName = phi.operands[a].name;
      } else {
        if (start && !(*start == phi.operands[a])) ok = false;
        start = phi.operands[a];
      }
    }
    if (!ok || updName.empty() || !start) continue;
    const Instruction *u = idx.defInstr(updName);
    if (!u || !l.containsInstr(m, u->id)) continue;
    InductionVariable iv;
    iv.phi = phi.id;
    iv.update = u->id;
    iv.start = *start;
    bool negated = false;
    if (u->op == Opcode::Add && u->operands[0].isLocal(phi.result)) iv.step = u->operands[1];
    else if (u->op == Opcode::Add && u->operands[1].isLocal(phi.result)) iv.step = u->operands[0];
    else if (u->op == Opcode::Sub && u->operands[0].isLocal(phi.result)) {
      iv.step = u->operands[1];
      negated = true;
    } else continue;
    if (iv.step.isLocal(phi.result) || !invariantOperand(iv.step)) continue;
    if (iv.step.isLiteral()) {
      if (iv.step.value == 0) continue;
      iv.literalStep = negated ? -iv.step.value : iv.step.value;
    } else if (negated) {
      continue;
    }
    if (auto it = dag.sccOf.find(phi.id.value); it != dag.sccOf.end()) iv.scc = it->second;
    out.basic.push_back(std::move(iv));
  }

  // Derived IVs: affine functions of a basic IV, to a fixpoint.
  struct Affine {
    InstrId base;
    std::optional<int64_t> scale, offset;
  };
  std::unordered_map<std::string, Affine> aff;
  std::set<uint32_t> updates;
  for (const auto &iv : out.basic) {
    aff[m.instr(iv.phi).result] = {iv.phi, 1, 0};
    updates.insert(iv.update.value);
  }
  auto body = loopInstructions(m, l);
  bool changed = true;
  while (changed) {
    changed = false;
    for (InstrId id : body) {
      const auto &i = m.instr(id);
      if (i.isPhi() || i.type != Type::I64 || updates.count(id.value) || aff.count(i.result)) continue;
      if (i.op != Opcode::Add && i.op != Opcode::Sub && i.op != Opcode::Mul && i.op != Opcode::Shl) continue;
      const Operand &a = i.operands[0], &b = i.operands[1];
      auto ia = a.isLocal() ? aff.find(a.name) : aff.end();
      auto ib = b.isLocal() ? aff.find(b.name) : aff.end();
      if ((ia == aff.end()) == (ib == aff.end())) continue;
      bool ivLeft = ia != aff.end();
      const Affine &src = ivLeft ? ia->second : ib->second;
      const Operand &other = ivLeft ? b : a;
      if (!invariantOperand(other)) continue;
      std::optional<int64_t> lit = other.isLiteral() ? std::optional<int64_t>(other.value) : std::nullopt;
      auto mulOpt = [](std::optional<int64_t> x, std::optional<int64_t> y) -> std::optional<int64_t> {
        if (!x || !y) return std::nullopt;
        return static_cast<int64_t>(static_cast<uint64_t>(*x) * static_cast<uint64_t>(*y));
      };
      auto addOpt = [](std::optional<int64_t> x, std::optional<int64_t> y) -> std::optional<int64_t> {
        if (!x || !y) return std::nullopt;
        return static_cast<int64_t>(static_cast<uint64_t>(*x) + static_cast<uint64_t>(*y));
      };
      Affine r{src.base, std::nullopt, std::nullopt};
      switch (i.op) {
      case Opcode::Add:
        r.scale = src.scale;
        r.offset = addOpt(src.offset, lit);
        break;
      case Opcode::Sub:
        if (ivLeft) {
          r.scale = src.scale;
          r.offset = addOpt(src.offset, lit ? std::optional<int64_t>(-*lit) : std::nullopt);
        } else {
          r.scale = mulOpt(src.scale, -1);
          r.offset = addOpt(lit, mulOpt(src.offset, -1));
        }
        break;
      case Opcode::Mul:
        r.scale = mulOpt(src.scale, lit);
        r.offset = mulOpt(src.offset, lit);
        break;
      default:
        if (!ivLeft || !lit || *lit < 0 || *lit > 62) continue;
        r.scale = mulOpt(src.scale, int64_t{1} << *lit);
        r.offset = mulOpt(src.offset, int64_t{1} << *lit);
        break;
      }
      aff[i.result] = r;
      out.derived.push_back({id, r.base, r.scale, r.offset});
      changed = true;
    }
  }
  std::sort(out.derived.begin(), out.derived.end(), [](const DerivedIv &x, const DerivedIv &y) { return x.inst < y.inst; });

  // Governing IV: the only exiting branch compares one IV against an invariant.
  std::set<uint32_t> exiting;
  for (const auto &e : l.exits) exiting.insert(e.from);
  if (exiting.size() != 1) return out;
  uint32_t eb = *exiting.begin();
  const auto &term = fn.blocks[eb].terminator();
  if (term.op != Opcode::BrCond || !term.operands[0].isLocal()) return out;
  const Instruction *c = idx.defInstr(term.operands[0].name);
  if (!c || !isCompare(c->op) || !l.containsInstr(m, c->id)) return out;

  std::vector<size_t> candidates;
  std::vector<GoverningInfo> infos;
  for (size_t k = 0; k < out.basic.size(); ++k) {
    const auto &iv = out.basic[k];
    const auto &phiName = m.instr(iv.phi).result, &updName = m.instr(iv.update).result;
    for (int side = 0; side < 2; ++side) {
      const Operand &mine = c->operands[side], &other = c->operands[1 - side];
      bool onPhi = mine.isLocal(phiName), onUpd = mine.isLocal(updName);
      if ((!onPhi && !onUpd) || !invariantOperand(other)) continue;
      GoverningInfo g;
      g.compare = c->id;
      g.branch = term.id;
      g.bound = other;
      g.testsPhi = onPhi;
      g.predicate = fromCompare(c->op);
      if (side == 1) g.predicate = swapSides(g.predicate);
      int trueSucc = idx.blockIndex(term.operands[1].name);
      if (!l.containsBlock(static_cast<uint32_t>(trueSucc))) g.predicate = negate(g.predicate);
      bool canonical = onPhi ? eb == l.header : (isLatch(eb) && l.latches.size() == 1);
      if (canonical && iv.start.isLiteral() && iv.literalStep && other.isLiteral())
        g.tripCount = tripCount(iv.start.value, *iv.literalStep, g.predicate, other.value, onPhi);
      candidates.push_back(k);
      infos.push_back(g);
      break;
    }
  }
  if (candidates.size() == 1) {
    out.governing = candidates[0];
    out.basic[candidates[0]].governing = infos[0];
  }
  return out;
}

std::optional<size_t> doWhileGoverningIv(const Module &m, const LoopStructure &l, const LoopIvs &ivs) {
  if (!ivs.governing) return std::nullopt;
  const auto &g = *ivs.basic[*ivs.governing].governing;
  uint32_t eb = m.loc(g.branch).block;
  bool latch = std::find(l.latches.begin(), l.latches.end(), eb) != l.latches.end();
  if (!latch || g.testsPhi) return std::nullopt;
  return ivs.governing;
}

ProgramAnalysis::ProgramAnalysis(const Module &m)
    : m_(&m), pts_(PointsTo::compute(m)), cg_(CallGraph::build(m, pts_)), pdg_(buildPdg(m, pts_)),
      loops_(detectLoops(m)) {}

const DependenceGraph &ProgramAnalysis::loopDg(LoopId l) {
  auto it = ldgs_.find(l.value);
  if (it == ldgs_.end()) it = ldgs_.emplace(l.value, pdgkit::loopDg(*m_, pdg_, loops_.loop(l))).first;
  return it->second;
}

const SccDag &ProgramAnalysis::sccDag(LoopId l) {
  auto it = dags_.find(l.value);
  if (it == dags_.end()) it = dags_.emplace(l.value, buildClassifiedSccDag(*m_, loopDg(l), loops_.loop(l))).first;
  return it->second;
}

const std::set<InstrId> &ProgramAnalysis::invariants(LoopId l) {
  auto it = invs_.find(l.value);
  if (it == invs_.end()) it = invs_.emplace(l.value, invariantsOfLoop(*m_, loops_.loop(l), loopDg(l))).first;
  return it->second;
}

const LoopIvs &ProgramAnalysis::ivs(LoopId l) {
  auto it = ivs_.find(l.value);
  if (it == ivs_.end())
    it = ivs_.emplace(l.value, detectIvs(*m_, loops_.loop(l), sccDag(l), invariants(l))).first;
  return it->second;
}

std::vector<std::string> loopReport(ProgramAnalysis &pa, const std::optional<ProfileData> &profile) {
  const Module &m = pa.module();
  std::vector<std::string> out;
  LoopTable table;
  if (profile) table = buildLoopTable(m);
  for (const auto &l : pa.loops().loops) {
    const auto &ivs = pa.ivs(l.id);
    auto naive = naiveInvariantsOfLoop(m, pa.loops(), l, pa.pointsTo());
    std::ostringstream os;
    os << "loop L" << l.id.value << " fn=@" << m.functions[l.func].name << " depth=" << l.depth << " hot=";
    if (profile) os << std::fixed << std::setprecision(3) << loopHotness(m, *profile, table.loops.at(l.id.value));
    else os << '-';
    os << " invariants=" << pa.invariants(l.id).size() << "/naive=" << naive.size()
       << " ivs=" << ivs.basic.size() + ivs.derived.size() << " governing=";
    if (ivs.governing) {
      const auto &g = *ivs.basic[*ivs.governing].governing;
      os << "yes(trip=" << (g.tripCount ? std::to_string(*g.tripCount) : "?") << ')';
    } else {
      os << "no";
    }
    out.push_back(os.str());
  }
  return out;
}

} // namespace pdgkit
