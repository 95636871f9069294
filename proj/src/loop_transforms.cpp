#include "pdgkit/loop_transforms.hpp"

#include "pdgkit/verifier.hpp"
#include "rewrite.hpp"

#include <algorithm>
#include <sstream>

namespace pdgkit {

using detail::blockPos;
using detail::freshLabel;
using detail::freshName;
using detail::makeInst;

namespace {

const LoopStructure &loopOrThrow(const LoopInfo &info, LoopId l) {
  if (l.value >= info.loops.size()) throw IrError("no loop L" + std::to_string(l.value));
  return info.loops[l.value];
}

std::string instrText(InstrId i) { return "#" + std::to_string(i.value); }

} // namespace

Module createPreheader(const Module &m, LoopId lid) {
  auto info = detectLoops(m);
  const auto &l = loopOrThrow(info, lid);
  Module out = m;
  if (l.preheader) return out;
  Function &fn = out.functions[l.func];
  FunctionIndex idx(m.functions[l.func]);
  const std::string headerLabel = fn.blocks[l.header].label;
  std::vector<uint32_t> outside;
  for (uint32_t p : idx.preds(l.header))
    if (!l.containsBlock(p)) outside.push_back(p);
  std::set<std::string> outsideLabels;
  for (uint32_t p : outside) outsideLabels.insert(fn.blocks[p].label);

  BasicBlock pre;
  pre.label = freshLabel(fn, headerLabel + ".preheader");
  auto names = detail::valueNames(fn);
  for (auto &phi : fn.blocks[l.header].insts) {
    if (!phi.isPhi()) break;
    std::vector<Operand> keepOps, outOps;
    std::vector<std::string> keepIn, outIn;
    for (size_t a = 0; a < phi.operands.size(); ++a) {
      if (outsideLabels.count(phi.incoming[a])) {
        outOps.push_back(phi.operands[a]);
        outIn.push_back(phi.incoming[a]);
      } else {
        keepOps.push_back(phi.operands[a]);
        keepIn.push_back(phi.incoming[a]);
      }
    }
    Operand entry;
    if (outOps.size() == 1) {
      entry = outOps[0];
    } else {
      auto merged = makeInst(Opcode::Phi, freshName(names, phi.result + ".ph"), phi.type, outOps);
      merged.incoming = outIn;
      entry = Operand::local(merged.result);
      pre.insts.push_back(std::move(merged));
    }
    keepOps.push_back(entry);
    keepIn.push_back(pre.label);
    phi.operands = std::move(keepOps);
    phi.incoming = std::move(keepIn);
  }
  pre.insts.push_back(makeInst(Opcode::Br, "", Type::Void, {Operand::label(headerLabel)}));
  for (uint32_t p : outside) detail::retarget(fn.blocks[p].terminator(), headerLabel, pre.label);
  fn.blocks.insert(fn.blocks.begin() + l.header, std::move(pre));
  out.eraseMeta("prof");
  out.renumber();
  return out;
}

Module scaleIvStep(const Module &m, LoopId l, InstrId ivPhi, int64_t factor, int64_t offset) {
  if (factor < 1) throw IrError("scale_iv_step: factor must be at least 1");
  if (offset < 0 || offset >= factor) throw IrError("scale_iv_step: offset must satisfy 0 <= offset < factor");
  return scaleIvStep(m, l, ivPhi, Operand::literal(factor), Operand::literal(offset));
}

Module scaleIvStep(const Module &m, LoopId lid, InstrId ivPhi, const Operand &factor, const Operand &offset) {
  auto info = detectLoops(m);
  loopOrThrow(info, lid);
  if (ivPhi.value >= m.numInstructions()) throw IrError("no instruction " + instrText(ivPhi));
  auto phiLoc = m.loc(ivPhi);
  const std::string phiBlock = m.functions[phiLoc.func].blocks[phiLoc.block].label;
  const size_t phiIndex = phiLoc.index;

  Module cur = createPreheader(m, lid);
  ProgramAnalysis pa(cur);
  const auto &l = pa.loops().loop(lid);
  const Function &cf = cur.functions[l.func];
  int pb = blockPos(cf, phiBlock);
  if (pb < 0 || static_cast<uint32_t>(pb) != l.header || phiLoc.func != l.func)
    throw IrError("scale_iv_step: " + instrText(ivPhi) + " is not a header phi of loop L" + std::to_string(lid.value));
  InstrId phiId = cf.blocks[static_cast<size_t>(pb)].insts[phiIndex].id;
  const auto &ivs = pa.ivs(lid);
  const InductionVariable *iv = nullptr;
  for (const auto &b : ivs.basic)
    if (b.phi == phiId) iv = &b;
  if (!iv) throw IrError("scale_iv_step: " + instrText(ivPhi) + " is not a basic induction variable");
  if (!iv->literalStep) throw IrError("scale_iv_step: unsupported compare/step shape (step is not a literal)");
  if (!iv->governing) throw IrError("scale_iv_step: unsupported compare/step shape (not the governing IV)");
  const auto &g = *iv->governing;
  const int64_t step = *iv->literalStep;
  bool shapeOk = g.testsPhi && cur.loc(g.branch).block == l.header &&
                 ((step > 0 && (g.predicate == ContinuePredicate::Lt || g.predicate == ContinuePredicate::Le)) ||
                  (step < 0 && (g.predicate == ContinuePredicate::Gt || g.predicate == ContinuePredicate::Ge)));
  if (!shapeOk) throw IrError("scale_iv_step: unsupported compare/step shape");

  Module out = cur;
  Function &fn = out.functions[l.func];
  auto names = detail::valueNames(fn);
  const Instruction &phi = cur.instr(phiId);
  const Instruction &upd = cur.instr(iv->update);
  BasicBlock &pre = fn.blocks[*l.preheader];
  std::vector<Instruction> preInsts;

  Operand start = iv->start;
  if (offset.isLiteral() && start.isLiteral()) {
    start = Operand::literal(static_cast<int64_t>(static_cast<uint64_t>(start.value) +
                                                  static_cast<uint64_t>(offset.value) * static_cast<uint64_t>(step)));
  } else if (!(offset.isLiteral() && offset.value == 0)) {
    Operand delta;
    if (offset.isLiteral()) {
      delta = Operand::literal(offset.value * step);
    } else {
      preInsts.push_back(makeInst(Opcode::Mul, freshName(names, phi.result + ".skip"), Type::I64,
                                  {offset, Operand::literal(step)}));
      delta = Operand::local(preInsts.back().result);
    }
    preInsts.push_back(makeInst(Opcode::Add, freshName(names, phi.result + ".start"), Type::I64, {start, delta}));
    start = Operand::local(preInsts.back().result);
  }
  Operand stride;
  if (factor.isLiteral()) {
    stride = Operand::literal(static_cast<int64_t>(static_cast<uint64_t>(factor.value) * static_cast<uint64_t>(step)));
  } else {
    preInsts.push_back(makeInst(Opcode::Mul, freshName(names, phi.result + ".stride"), Type::I64,
                                {factor, Operand::literal(step)}));
    stride = Operand::local(preInsts.back().result);
  }
  pre.insts.insert(pre.insts.end() - 1, preInsts.begin(), preInsts.end());

  const std::string next = freshName(names, phi.result + ".next");
  auto updLoc = cur.loc(iv->update);
  auto &ub = fn.blocks[updLoc.block].insts;
  ub.insert(ub.begin() + updLoc.index + 1,
            makeInst(Opcode::Add, next, Type::I64, {Operand::local(phi.result), stride}));

  Instruction &newPhi = fn.blocks[l.header].insts[phiIndex];
  const std::string preLabel = pre.label;
  for (size_t a = 0; a < newPhi.operands.size(); ++a) {
    if (newPhi.incoming[a] == preLabel) newPhi.operands[a] = start;
    else if (newPhi.operands[a].isLocal(upd.result)) newPhi.operands[a] = Operand::local(next);
  }
  out.eraseMeta("prof");
  out.renumber();
  verifyOrThrow(out, "scale_iv_step");
  return out;
}

namespace {

bool speculatable(ProgramAnalysis &pa, const LoopStructure &l, const Instruction &i) {
  const Module &m = pa.module();
  switch (i.op) {
  case Opcode::SDiv:
  case Opcode::SRem: return i.operands[1].isLiteral() && i.operands[1].value != 0;
  case Opcode::Load: {
    auto loc = pa.pointsTo().location(i.id);
    if (loc.empty()) return false;
    for (const auto &t : loc) {
      if (!t.offset || *t.offset < 0 || *t.offset >= pa.pointsTo().objectSize(t.object)) return false;
      if (t.object.kind == ObjectRef::Kind::Global) continue;
      if (t.object.kind != ObjectRef::Kind::Alloca) return false;
      auto aloc = m.loc(InstrId(t.object.index));
      if (aloc.func != l.func || l.containsBlock(aloc.block)) return false;
    }
    return true;
  }
  default:
    return isBinaryArith(i.op) || isCompare(i.op) || i.op == Opcode::Select || i.op == Opcode::Gep ||
           i.op == Opcode::FuncPtr;
  }
}

} // namespace

std::optional<std::string> hoistBlocker(ProgramAnalysis &pa, LoopId lid, InstrId i,
                                        const std::set<InstrId> &alreadyHoisted) {
  const Module &m = pa.module();
  const auto &l = loopOrThrow(pa.loops(), lid);
  if (i.value >= m.numInstructions() || !l.containsInstr(m, i))
    return instrText(i) + " is not in loop L" + std::to_string(lid.value);
  if (!pa.invariants(lid).count(i)) return instrText(i) + " is not invariant in loop L" + std::to_string(lid.value);
  const auto &inst = m.instr(i);
  if (inst.op == Opcode::Store || inst.op == Opcode::Print) return instrText(i) + " writes memory";
  if (inst.isPhi()) return instrText(i) + " is a phi";
  if (inst.isCall()) {
    for (const auto &o : pa.pointsTo().callEffects(i).mod) {
      bool local = o.kind == ObjectRef::Kind::Alloca && m.loc(InstrId(o.index)).func != l.func;
      if (!local) return instrText(i) + " is a call that may write memory visible to the loop";
    }
  }
  FunctionIndex idx(m.functions[l.func]);
  for (const Operand *o : inst.valueOperands()) {
    if (!o->isLocal()) continue;
    const Instruction *d = idx.defInstr(o->name);
    if (d && l.containsInstr(m, d->id) && !alreadyHoisted.count(d->id))
      return "operand %" + o->name + " of " + instrText(i) + " is defined inside the loop";
  }
  auto dom = computeDominators(idx, DomDirection::Forward);
  uint32_t b = m.loc(i).block;
  bool domExits = std::all_of(l.exits.begin(), l.exits.end(), [&](const LoopExit &e) { return dom.dominates(b, e.from); });
  if (!domExits && !speculatable(pa, l, inst))
    return instrText(i) + " is neither speculatable nor executed on every path to a loop exit";
  return std::nullopt;
}

namespace {

struct Position {
  uint32_t func;
  std::string block;
  uint32_t index;
};

/// Moves the instructions at `positions` (already checked, in dominance
/// order) to the end of the loop's preheader.
Module moveToPreheader(const Module &m, LoopId lid, const std::vector<Position> &positions) {
  Module out = createPreheader(m, lid);
  auto info = detectLoops(out);
  const auto &l = info.loop(lid);
  Function &fn = out.functions[l.func];
  std::vector<Instruction> moved;
  for (const auto &p : positions) moved.push_back(fn.blocks[static_cast<size_t>(blockPos(fn, p.block))].insts[p.index]);
  // Erase back to front within each block so indices stay valid.
  auto order = positions;
  std::sort(order.begin(), order.end(), [](const Position &a, const Position &b) {
    return a.block != b.block ? a.block < b.block : a.index > b.index;
  });
  for (const auto &p : order) {
    auto &insts = fn.blocks[static_cast<size_t>(blockPos(fn, p.block))].insts;
    insts.erase(insts.begin() + p.index);
  }
  auto &pre = fn.blocks[*l.preheader].insts;
  pre.insert(pre.end() - 1, moved.begin(), moved.end());
  out.eraseMeta("prof");
  out.renumber();
  return out;
}

Position positionOf(const Module &m, InstrId i) {
  auto loc = m.loc(i);
  return {loc.func, m.functions[loc.func].blocks[loc.block].label, loc.index};
}

} // namespace

Module hoistToPreheader(const Module &m, LoopId lid, InstrId i) {
  ProgramAnalysis pa(m);
  if (auto why = hoistBlocker(pa, lid, i)) throw IrError("cannot hoist: " + *why);
  Module out = moveToPreheader(m, lid, {positionOf(m, i)});
  verifyOrThrow(out, "hoist_to_preheader");
  return out;
}

size_t LicmResult::total() const {
  size_t n = 0;
  for (const auto &h : hoisted) n += h.second;
  return n;
}

std::string LicmResult::summary() const {
  std::ostringstream os;
  for (const auto &[l, n] : hoisted)
    if (n) os << "hoisted " << n << " instruction" << (n == 1 ? "" : "s") << " from loop L" << l.value << '\n';
  os << "hoisted " << total() << " instruction" << (total() == 1 ? "" : "s") << " in total\n";
  return os.str();
}

LicmResult licm(const Module &m, const LicmOptions &opts) {
  LicmResult r;
  r.module = m;
  auto info = detectLoops(m);
  std::vector<char> hot(info.loops.size(), 1);
  if (opts.hotThreshold) {
    auto prof = readProfile(m);
    if (!prof) throw IrError("--hot-threshold needs an embedded profile");
    auto table = buildLoopTable(m);
    for (const auto &tl : table.loops) hot[tl.id.value] = loopHotness(m, *prof, tl) >= *opts.hotThreshold;
  }
  LoopForest forest(info);
  for (LoopId lid : forest.postOrder()) {
    if (!hot[lid.value]) continue;
    size_t count = 0;
    while (true) {
      ProgramAnalysis pa(r.module);
      const auto &l = pa.loops().loop(lid);
      const Module &cur = r.module;
      std::set<InstrId> pool = opts.naive ? naiveInvariantsOfLoop(cur, pa.loops(), l, pa.pointsTo()) : pa.invariants(lid);
      FunctionIndex idx(cur.functions[l.func]);
      std::vector<InstrId> ordered(pool.begin(), pool.end());
      std::sort(ordered.begin(), ordered.end(), [&](InstrId a, InstrId b) {
        auto la = cur.loc(a), lb = cur.loc(b);
        if (la.block != lb.block) return idx.rpoIndex(la.block) < idx.rpoIndex(lb.block);
        return la.index < lb.index;
      });
      std::set<InstrId> batch;
      std::vector<Position> positions;
      for (InstrId i : ordered) {
        if (hoistBlocker(pa, lid, i, batch)) continue;
        batch.insert(i);
        positions.push_back(positionOf(cur, i));
      }
      if (positions.empty()) break;
      r.module = moveToPreheader(cur, lid, positions);
      count += positions.size();
      if (opts.naive) break;
    }
    r.hoisted.emplace_back(lid, count);
  }
  verifyOrThrow(r.module, "licm");
  return r;
}

} // namespace pdgkit
