#include "pdgkit/parallel.hpp"

#include "pdgkit/loop_transforms.hpp"
#include "pdgkit/parser.hpp"
#include "pdgkit/verifier.hpp"
#include "rewrite.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace pdgkit {

using detail::freshName;
using detail::makeInst;

std::string_view slotRoleName(SlotRole r) {
  switch (r) {
  case SlotRole::LiveIn: return "live-in";
  case SlotRole::LiveOut: return "live-out";
  case SlotRole::Reduction: return "reduction";
  }
  return "?";
}

size_t Environment::count(SlotRole r) const {
  return static_cast<size_t>(std::count_if(slots.begin(), slots.end(), [&](const EnvSlot &s) { return s.role == r; }));
}

int64_t Environment::cells(int64_t tasks) const {
  int64_t in = static_cast<int64_t>(count(SlotRole::LiveIn));
  return in + static_cast<int64_t>(slots.size() - static_cast<size_t>(in)) * tasks;
}

std::string Environment::dump() const {
  std::ostringstream os;
  for (const auto &s : slots) {
    os << "slot " << s.index << ' ' << slotRoleName(s.role) << " %" << s.name;
    if (s.source) os << " #" << s.source->value;
    os << '\n';
  }
  return os.str();
}

Environment computeLiveInOut(const Module &m, const LoopStructure &l, const SccDag *dag) {
  const auto &fn = m.functions[l.func];
  FunctionIndex idx(fn);
  struct Key {
    int kind; // 0 param, 1 instruction
    uint32_t order;
    std::string name;
    std::optional<InstrId> source;
    SlotRole role;
  };
  std::map<std::string, Key> ins, outs;
  for (uint32_t b : l.blocks) {
    for (const auto &i : fn.blocks[b].insts) {
      for (const Operand *o : i.valueOperands()) {
        if (!o->isLocal() || ins.count(o->name)) continue;
        const ValueDef *d = idx.def(o->name);
        if (!d) continue;
        if (d->kind == ValueDef::Kind::Param) {
          ins[o->name] = {0, d->param, o->name, std::nullopt, SlotRole::LiveIn};
        } else if (!l.containsBlock(d->block)) {
          InstrId id = fn.blocks[d->block].insts[d->index].id;
          ins[o->name] = {1, id.value, o->name, id, SlotRole::LiveIn};
        }
      }
      if (!i.hasResult()) continue;
      for (auto [ub, uk] : idx.uses(i.result)) {
        if (l.containsBlock(ub)) continue;
        SlotRole role = SlotRole::LiveOut;
        if (dag) {
          if (auto it = dag->sccOf.find(i.id.value); it != dag->sccOf.end()) {
            const auto &s = dag->sccs[it->second];
            if (s.reduction && s.reduction->phi == i.id) role = SlotRole::Reduction;
          }
        }
        outs[i.result] = {1, i.id.value, i.result, i.id, role};
        (void)uk;
        break;
      }
    }
  }
  auto sorted = [](const std::map<std::string, Key> &src) {
    std::vector<Key> v;
    for (const auto &[n, k] : src) v.push_back(k);
    std::sort(v.begin(), v.end(), [](const Key &a, const Key &b) { return std::tie(a.kind, a.order) < std::tie(b.kind, b.order); });
    return v;
  };
  Environment env;
  for (const auto &group : {sorted(ins), sorted(outs)})
    for (const auto &k : group)
      env.slots.push_back({static_cast<uint32_t>(env.slots.size()), k.role, k.name, k.source});
  return env;
}

namespace {

std::string describeInstr(const Module &m, InstrId i) {
  return "instr #" + std::to_string(i.value) + ": " + printInstruction(m.instr(i));
}

} // namespace

ParallelPlan doallCheck(ProgramAnalysis &pa, LoopId lid) {
  const Module &m = pa.module();
  ParallelPlan plan;
  plan.loop = lid;
  if (lid.value >= pa.loops().loops.size()) {
    plan.rejected = "DOALL rejected: no loop L" + std::to_string(lid.value);
    return plan;
  }
  const auto &l = pa.loops().loop(lid);
  plan.func = l.func;
  const auto &dag = pa.sccDag(lid);
  const auto &ivs = pa.ivs(lid);
  plan.env = computeLiveInOut(m, l, &dag);
  auto reject = [&](std::string why) {
    plan.rejected = "DOALL rejected: " + std::move(why);
    return plan;
  };

  if (!ivs.governing) return reject("no governing induction variable");
  const auto &iv = ivs.basic[*ivs.governing];
  const auto &g = *iv.governing;
  if (!iv.literalStep) return reject("governing induction variable has a non-literal step");
  const int64_t step = *iv.literalStep;
  bool shapeOk = g.testsPhi && m.loc(g.branch).block == l.header &&
                 ((step > 0 && (g.predicate == ContinuePredicate::Lt || g.predicate == ContinuePredicate::Le)) ||
                  (step < 0 && (g.predicate == ContinuePredicate::Gt || g.predicate == ContinuePredicate::Ge)));
  if (!shapeOk) return reject("loop is not while-shaped with an ordered exit compare");
  std::set<uint32_t> exitTargets;
  for (const auto &e : l.exits) exitTargets.insert(e.to);
  if (exitTargets.size() != 1) return reject("loop has more than one exit target");

  std::set<InstrId> reductionPhis;
  std::vector<ReductionInfo> reductions;
  const uint32_t ivScc = dag.sccOf.at(iv.phi.value);
  for (const auto &s : dag.sccs) {
    if (s.id == ivScc) {
      for (InstrId i : s.members)
        if (i != iv.phi && i != iv.update && i != g.compare && i != g.branch)
          return reject("SCC#" + std::to_string(s.id) + " Sequential (" + describeInstr(m, i) + ")");
      continue;
    }
    if (s.kind == SccKind::Sequential)
      return reject("SCC#" + std::to_string(s.id) + " Sequential (" + describeInstr(m, s.members.front()) + ")");
    if (s.kind == SccKind::Reducible) {
      reductionPhis.insert(s.reduction->phi);
      reductions.push_back(*s.reduction);
    }
  }
  const auto &header = m.functions[l.func].blocks[l.header];
  for (size_t k = 0; k < header.firstNonPhi(); ++k) {
    InstrId p = header.insts[k].id;
    if (p != iv.phi && !reductionPhis.count(p))
      return reject("SCC#" + std::to_string(dag.sccOf.at(p.value)) + " Sequential (" + describeInstr(m, p) + ")");
  }
  for (const auto &s : plan.env.slots) {
    if (s.role == SlotRole::LiveIn || s.role == SlotRole::Reduction) continue;
    if (s.source != iv.phi) return reject("live-out %" + s.name + " is not a reduction or the governing IV");
  }
  std::sort(reductions.begin(), reductions.end(), [](const ReductionInfo &a, const ReductionInfo &b) { return a.phi < b.phi; });
  plan.reductions = std::move(reductions);
  plan.governing = iv;
  plan.applicable = true;
  return plan;
}

namespace {

struct Folder {
  std::set<std::string> &names;
  std::vector<Instruction> &out;

  Operand fold(ReductionOp op, const Operand &a, const Operand &b, const std::string &base) {
    Opcode code;
    switch (op) {
    case ReductionOp::Add: code = Opcode::Add; break;
    case ReductionOp::Mul: code = Opcode::Mul; break;
    case ReductionOp::And: code = Opcode::And; break;
    case ReductionOp::Or: code = Opcode::Or; break;
    case ReductionOp::Xor: code = Opcode::Xor; break;
    default: {
      auto c = makeInst(op == ReductionOp::Min ? Opcode::Slt : Opcode::Sgt, freshName(names, base + ".cmp"), Type::I1,
                        {a, b});
      Operand cv = Operand::local(c.result);
      out.push_back(std::move(c));
      out.push_back(makeInst(Opcode::Select, freshName(names, base + ".acc"), Type::I64, {cv, a, b}));
      return Operand::local(out.back().result);
    }
    }
    out.push_back(makeInst(code, freshName(names, base + ".acc"), Type::I64, {a, b}));
    return Operand::local(out.back().result);
  }
};

std::string freshFunctionName(const Module &m, const std::string &base) {
  std::set<std::string> taken;
  for (const auto &f : m.functions) taken.insert(f.name);
  return freshName(taken, base);
}

} // namespace

Module doallTransform(const Module &m, const ParallelPlan &plan, int64_t tasks) {
  if (tasks < 1) throw IrError("doall: number of tasks must be at least 1");
  if (!plan.applicable) throw IrError(plan.rejected.empty() ? "doall: plan is not applicable" : plan.rejected);
  Module cur = createPreheader(m, plan.loop);
  ProgramAnalysis pa(cur);
  ParallelPlan p = doallCheck(pa, plan.loop);
  auto signature = [](const Module &mod, const ParallelPlan &pl) {
    std::vector<std::string> sig;
    auto known = [&](InstrId i) { return i.value < mod.numInstructions(); };
    if (pl.governing && !known(pl.governing->phi)) return std::vector<std::string>{"?"};
    for (const auto &r : pl.reductions)
      if (!known(r.phi)) return std::vector<std::string>{"?"};
    if (pl.governing) sig.push_back(mod.instr(pl.governing->phi).result);
    for (const auto &s : pl.env.slots) sig.push_back(std::string(slotRoleName(s.role)) + " " + s.name);
    for (const auto &r : pl.reductions) sig.push_back(mod.instr(r.phi).result);
    return sig;
  };
  if (!p.applicable || p.func != plan.func || plan.func >= m.functions.size() ||
      m.functions[plan.func].name != cur.functions[p.func].name || signature(cur, p) != signature(m, plan))
    throw IrError("doall: plan does not match the module");
  const auto &l = pa.loops().loop(plan.loop);
  const Function &src = cur.functions[l.func];
  FunctionIndex idx(src);
  const auto &iv = *p.governing;
  const std::string headerLabel = src.blocks[l.header].label;
  const std::string preLabel = src.blocks[*l.preheader].label;
  const std::string exitLabel = src.blocks[l.exits.front().to].label;

  std::vector<const EnvSlot *> liveIns, perTask;
  for (const auto &s : p.env.slots) (s.role == SlotRole::LiveIn ? liveIns : perTask).push_back(&s);
  const int64_t nIn = static_cast<int64_t>(liveIns.size());
  std::map<uint32_t, const ReductionInfo *> redOf;
  for (const auto &r : p.reductions) redOf[r.phi.value] = &r;

  // Task function.
  Function task;
  task.name = freshFunctionName(cur, src.name + ".L" + std::to_string(plan.loop.value) + ".task");
  task.returnType = Type::Void;
  std::set<std::string> taskNames;
  for (uint32_t b : l.blocks)
    for (const auto &i : src.blocks[b].insts)
      if (i.hasResult()) taskNames.insert(i.result);
  for (const auto *s : liveIns) taskNames.insert(s->name);
  const std::string envName = freshName(taskNames, "env");
  const std::string offName = freshName(taskNames, "off");
  const std::string factorName = freshName(taskNames, "factor");
  task.params = {{envName, Type::Ptr}, {offName, Type::I64}, {factorName, Type::I64}};

  std::set<std::string> labels;
  for (uint32_t b : l.blocks) labels.insert(src.blocks[b].label);
  BasicBlock entry;
  entry.label = freshName(labels, "task.entry");
  for (int64_t k = 0; k < nIn; ++k) {
    const auto *s = liveIns[static_cast<size_t>(k)];
    std::string addr = freshName(taskNames, s->name + ".slot");
    entry.insts.push_back(makeInst(Opcode::Gep, addr, Type::Ptr, {Operand::local(envName), Operand::literal(k)}));
    entry.insts.push_back(makeInst(Opcode::Load, s->name, idx.typeOf(Operand::local(s->name)), {Operand::local(addr)}));
  }
  entry.insts.push_back(makeInst(Opcode::Br, "", Type::Void, {Operand::label(headerLabel)}));
  task.blocks.push_back(std::move(entry));
  const std::string entryLabel = task.blocks.front().label;
  const std::string taskExit = freshName(labels, "task.exit");

  for (uint32_t b : l.blocks) {
    BasicBlock bb = src.blocks[b];
    for (auto &i : bb.insts) {
      if (i.isPhi() && b == l.header) {
        for (size_t a = 0; a < i.incoming.size(); ++a) {
          if (i.incoming[a] != preLabel) continue;
          i.incoming[a] = entryLabel;
          if (auto it = redOf.find(i.id.value); it != redOf.end()) i.operands[a] = Operand::literal(it->second->identity);
        }
      }
      if (i.isTerminator()) detail::retarget(i, exitLabel, taskExit);
    }
    task.blocks.push_back(std::move(bb));
  }
  std::sort(task.blocks.begin() + 1, task.blocks.end(), [&](const BasicBlock &a, const BasicBlock &b) {
    return detail::blockPos(src, a.label) < detail::blockPos(src, b.label);
  });
  BasicBlock exitBlock;
  exitBlock.label = taskExit;
  for (size_t r = 0; r < perTask.size(); ++r) {
    const std::string base = perTask[r]->name + ".out";
    std::string scaled = freshName(taskNames, base + ".row");
    std::string cell = freshName(taskNames, base + ".cell");
    std::string addr = freshName(taskNames, base + ".addr");
    exitBlock.insts.push_back(makeInst(Opcode::Mul, scaled, Type::I64,
                                       {Operand::local(factorName), Operand::literal(static_cast<int64_t>(r))}));
    exitBlock.insts.push_back(makeInst(Opcode::Add, cell, Type::I64, {Operand::local(scaled), Operand::local(offName)}));
    exitBlock.insts.push_back(makeInst(Opcode::Add, addr + ".idx", Type::I64, {Operand::local(cell), Operand::literal(nIn)}));
    taskNames.insert(addr + ".idx");
    exitBlock.insts.push_back(
        makeInst(Opcode::Gep, addr, Type::Ptr, {Operand::local(envName), Operand::local(addr + ".idx")}));
    exitBlock.insts.push_back(
        makeInst(Opcode::Store, "", Type::Void, {Operand::local(perTask[r]->name), Operand::local(addr)}));
  }
  exitBlock.insts.push_back(makeInst(Opcode::Ret, "", Type::Void, {}));
  task.blocks.push_back(std::move(exitBlock));

  // Caller: build the environment, dispatch, merge, continue at the exit.
  Module out = cur;
  Function &fn = out.functions[l.func];
  auto names = detail::valueNames(fn);
  BasicBlock &pre = fn.blocks[*l.preheader];
  pre.insts.pop_back();
  std::vector<Instruction> &code = pre.insts;
  const std::string env = freshName(names, "env");
  code.push_back(makeInst(Opcode::Alloca, env, Type::Ptr, {Operand::literal(std::max<int64_t>(1, p.env.cells(tasks)))}));
  for (int64_t k = 0; k < nIn; ++k) {
    const auto *s = liveIns[static_cast<size_t>(k)];
    std::string addr = freshName(names, env + ".in");
    code.push_back(makeInst(Opcode::Gep, addr, Type::Ptr, {Operand::local(env), Operand::literal(k)}));
    code.push_back(makeInst(Opcode::Store, "", Type::Void, {Operand::local(s->name), Operand::local(addr)}));
  }
  for (int64_t t = 0; t < tasks; ++t)
    code.push_back(makeInst(Opcode::Call, "", Type::Void,
                            {Operand::function(task.name), Operand::local(env), Operand::literal(t),
                             Operand::literal(tasks)}));
  Folder folder{names, code};
  std::map<std::string, Operand> merged;
  for (size_t r = 0; r < perTask.size(); ++r) {
    const auto *s = perTask[r];
    ReductionOp op;
    std::optional<Operand> acc;
    if (s->role == SlotRole::Reduction) {
      const auto *red = redOf.at(s->source->value);
      op = red->op;
      const auto &phi = cur.instr(red->phi);
      for (size_t a = 0; a < phi.incoming.size(); ++a)
        if (phi.incoming[a] == preLabel) acc = phi.operands[a];
    } else {
      op = *iv.literalStep > 0 ? ReductionOp::Min : ReductionOp::Max;
    }
    for (int64_t t = 0; t < tasks; ++t) {
      int64_t cellIdx = nIn + static_cast<int64_t>(r) * tasks + t;
      std::string addr = freshName(names, s->name + ".part.addr");
      std::string val = freshName(names, s->name + ".part");
      code.push_back(makeInst(Opcode::Gep, addr, Type::Ptr, {Operand::local(env), Operand::literal(cellIdx)}));
      code.push_back(makeInst(Opcode::Load, val, Type::I64, {Operand::local(addr)}));
      acc = acc ? folder.fold(op, *acc, Operand::local(val), s->name) : Operand::local(val);
    }
    merged[s->name] = *acc;
  }
  code.push_back(makeInst(Opcode::Br, "", Type::Void, {Operand::label(exitLabel)}));

  std::vector<BasicBlock> kept;
  for (uint32_t b = 0; b < fn.blocks.size(); ++b)
    if (!l.containsBlock(b)) kept.push_back(std::move(fn.blocks[b]));
  fn.blocks = std::move(kept);
  for (auto &b : fn.blocks)
    for (auto &i : b.insts)
      if (i.isPhi())
        for (auto &in : i.incoming)
          if (in == headerLabel) in = preLabel;
  for (const auto &[name, val] : merged) detail::replaceUses(fn, name, val);

  out.functions.push_back(std::move(task));
  out.metadata.push_back({std::string(kTaskMetaKey), out.functions.back().name});
  out.eraseMeta("prof");
  out.renumber();

  // Chunk the task's loop: offset = task ordinal, factor = N.
  const Function &tf = out.functions.back();
  auto tinfo = detectLoops(out);
  uint32_t tfi = static_cast<uint32_t>(out.functions.size() - 1);
  std::optional<LoopId> tl;
  for (const auto &cand : tinfo.loops)
    if (cand.func == tfi && tf.blocks[cand.header].label == headerLabel) tl = cand.id;
  if (!tl) throw IrError("doall: outlined loop not found");
  const auto &phiInst = cur.instr(iv.phi);
  InstrId tphi;
  for (const auto &i : tf.blocks[tinfo.loop(*tl).header].insts)
    if (i.isPhi() && i.result == phiInst.result) tphi = i.id;
  Module res = scaleIvStep(out, *tl, tphi, Operand::local(factorName), Operand::local(offName));
  verifyOrThrow(res, "doall");
  return res;
}

ExecResult runParallel(const Module &m, std::span<const int64_t> args, ParallelMode mode, uint64_t seed) {
  RunOptions o;
  o.taskMode = mode == ParallelMode::Concurrent ? TaskMode::Concurrent : TaskMode::SequentialAnyOrder;
  o.seed = seed;
  return execute(m, args, o).result;
}

bool sameBehavior(const ExecResult &a, const ExecResult &b) {
  return a.output == b.output && a.exitValue == b.exitValue && a.trap == b.trap;
}

} // namespace pdgkit
