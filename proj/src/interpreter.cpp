//===- interpreter.cpp - Reference interpreter -----------------------------===//
//
// Functions are lowered once into a slot-indexed form; execution then runs
// over an explicit frame stack. Memory is a table of dynamic objects, each a
// vector of cells. The table is segmented so that concurrently running task
// machines can allocate without invalidating each other's lookups.
//
//===----------------------------------------------------------------------===//
#include "pdgkit/interpreter.hpp"

#include "pdgkit/parser.hpp"

#include <algorithm>
#include <atomic>
#include <climits>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

namespace pdgkit {

std::string objectName(const ObjectRef &o) {
  switch (o.kind) {
  case ObjectRef::Kind::Alloca: return "alloca#" + std::to_string(o.index);
  case ObjectRef::Kind::Global: return "global#" + std::to_string(o.index);
  case ObjectRef::Kind::Function: return "fn#" + std::to_string(o.index);
  case ObjectRef::Kind::Io: return "io";
  }
  return "?";
}

std::string_view depKindName(DepKind k) {
  switch (k) {
  case DepKind::RAW: return "RAW";
  case DepKind::WAW: return "WAW";
  case DepKind::WAR: return "WAR";
  }
  return "?";
}

std::string_view trapName(Trap t) {
  switch (t) {
  case Trap::DivByZero: return "div-by-zero";
  case Trap::OutOfBounds: return "out-of-bounds";
  case Trap::StepBudgetExceeded: return "step-budget-exceeded";
  case Trap::BadICall: return "bad-icall";
  }
  return "?";
}

std::string describe(const ExecResult &r) {
  std::ostringstream os;
  os << "exit=" << r.exitValue << " steps=" << r.steps << " output=[";
  for (size_t i = 0; i < r.output.size(); ++i) os << (i ? "," : "") << r.output[i];
  os << "]";
  if (r.trap) os << " trap=" << trapName(*r.trap);
  return os.str();
}

uint64_t ProfileData::totalSteps() const {
  uint64_t s = 0;
  for (auto c : instrCount) s += c;
  return s;
}

namespace {

struct COp {
  enum class K : uint8_t { Slot, Imm, Global };
  K k = K::Imm;
  int64_t v = 0;
};

struct CInst {
  Opcode op = Opcode::Ret;
  InstrId id;
  int32_t dst = -1;
  std::vector<COp> ops;
  std::vector<uint32_t> targets;
  std::vector<uint32_t> phiPreds;
  int32_t callee = -1;
  const Instruction *src = nullptr;
};

struct CBlock {
  BlockId id;
  uint32_t numPhis = 0;
  std::vector<CInst> insts;
  int loopHeader = -1; // index into LoopTable::loops
};

struct CFunc {
  uint32_t numSlots = 0;
  uint32_t numParams = 0;
  Type returnType = Type::Void;
  bool isTask = false;
  std::vector<CBlock> blocks;
  std::vector<int> loops; // loop table indices, outermost first not guaranteed
};

struct Program {
  const Module *module = nullptr;
  const LoopTable *loops = nullptr;
  std::vector<CFunc> funcs;
  uint32_t numGlobals = 0;
};

Program lower(const Module &m, const LoopTable *loops) {
  Program p;
  p.module = &m;
  p.loops = loops;
  p.numGlobals = static_cast<uint32_t>(m.globals.size());
  std::set<std::string> taskNames;
  for (const auto &t : m.metaValues(kTaskMetaKey)) taskNames.insert(t);
  for (const auto &f : m.functions) {
    CFunc cf;
    cf.numParams = static_cast<uint32_t>(f.params.size());
    cf.returnType = f.returnType;
    cf.isTask = taskNames.count(f.name) > 0;
    std::unordered_map<std::string, int32_t> slots;
    for (const auto &prm : f.params) slots.emplace(prm.name, static_cast<int32_t>(slots.size()));
    for (const auto &b : f.blocks)
      for (const auto &i : b.insts)
        if (i.hasResult()) slots.emplace(i.result, static_cast<int32_t>(slots.size()));
    cf.numSlots = static_cast<uint32_t>(slots.size());
    FunctionIndex idx(f);
    for (const auto &b : f.blocks) {
      CBlock cb;
      cb.id = b.id;
      cb.numPhis = static_cast<uint32_t>(b.firstNonPhi());
      for (const auto &i : b.insts) {
        CInst ci;
        ci.op = i.op;
        ci.id = i.id;
        ci.src = &i;
        if (i.hasResult()) ci.dst = slots.at(i.result);
        for (const auto &o : i.operands) {
          switch (o.kind) {
          case Operand::Kind::Local: ci.ops.push_back({COp::K::Slot, slots.at(o.name)}); break;
          case Operand::Kind::Literal: ci.ops.push_back({COp::K::Imm, o.value}); break;
          case Operand::Kind::Global: ci.ops.push_back({COp::K::Global, m.globalIndex(o.name)}); break;
          case Operand::Kind::Function: ci.callee = m.functionIndex(o.name); break;
          case Operand::Kind::Label: ci.targets.push_back(static_cast<uint32_t>(idx.blockIndex(o.name))); break;
          }
        }
        for (const auto &l : i.incoming) ci.phiPreds.push_back(static_cast<uint32_t>(idx.blockIndex(l)));
        cb.insts.push_back(std::move(ci));
      }
      cf.blocks.push_back(std::move(cb));
    }
    p.funcs.push_back(std::move(cf));
  }
  if (loops) {
    for (size_t l = 0; l < loops->loops.size(); ++l) {
      const auto &lp = loops->loops[l];
      p.funcs[lp.func].blocks[lp.header].loopHeader = static_cast<int>(l);
      p.funcs[lp.func].loops.push_back(static_cast<int>(l));
    }
  }
  return p;
}

struct LoopSpan {
  LoopId loop;
  uint64_t invocation;
  uint64_t first;
  uint64_t last;
};

struct AccessRecord {
  InstrId instr;
  bool write;
  std::vector<LoopSpan> spans;
};

struct Object {
  ObjectRef site;
  std::vector<RtValue> cells;
  bool alive = true;
  std::vector<std::vector<AccessRecord>> history;
};

class Memory {
public:
  static constexpr uint32_t kSegBits = 12;
  static constexpr uint32_t kSegSize = 1u << kSegBits;
  static constexpr uint32_t kMaxSegs = 1u << 15;

  Memory() : segs_(new std::unique_ptr<Object[]>[kMaxSegs]) {}

  uint32_t allocate(ObjectRef site, size_t cells) {
    std::lock_guard lock(mu_);
    uint32_t idx = count_;
    if ((idx >> kSegBits) >= kMaxSegs) throw IrError("interpreter object table exhausted");
    auto &seg = segs_[idx >> kSegBits];
    if (!seg) seg.reset(new Object[kSegSize]);
    Object &o = seg[idx & (kSegSize - 1)];
    o.site = site;
    o.cells.assign(cells, RtValue::integer(0));
    o.alive = true;
    count_ = idx + 1;
    return idx;
  }

  Object &get(uint32_t idx) { return segs_[idx >> kSegBits][idx & (kSegSize - 1)]; }
  uint32_t size() const { return count_; }

private:
  std::mutex mu_;
  std::unique_ptr<std::unique_ptr<Object[]>[]> segs_;
  uint32_t count_ = 0;
};

struct TrapSignal {
  Trap trap;
};

using DepKey = std::tuple<uint32_t, uint32_t, DepKind, ObjectRef>;

/// State shared by all machines of one run.
struct Shared {
  const Program *prog = nullptr;
  const RunOptions *opts = nullptr;
  Memory mem;
  uint32_t ioObject = 0;
  bool trackLoops = false;
  uint64_t nextInvocation = 0;
  uint64_t dispatchCount = 0;
  std::map<DepKey, DynamicDependence> deps;
  std::set<CallEvent> calls;
  ProfileData profile;
  std::vector<std::set<std::pair<uint32_t, int64_t>>> taskWrites;
};

struct Frame {
  uint32_t func = 0;
  uint32_t block = 0;
  uint32_t ip = 0;
  int32_t retSlot = -1;
  size_t loopBase = 0;
  std::vector<RtValue> slots;
  std::vector<uint32_t> allocas;
};

class Machine {
public:
  Machine(Shared &sh, uint64_t budget, int taskWriteSlot = -1)
      : sh_(sh), prog_(*sh.prog), budget_(budget), taskWriteSlot_(taskWriteSlot) {}

  uint64_t steps = 0;
  std::vector<int64_t> output;
  std::optional<Trap> trap;

  RtValue run(uint32_t func, std::vector<RtValue> args) {
    try {
      return loop(func, std::move(args));
    } catch (const TrapSignal &t) {
      trap = t.trap;
      return RtValue::integer(0);
    }
  }

private:
  [[noreturn]] static void raise(Trap t) { throw TrapSignal{t}; }

  RtValue eval(const Frame &f, const COp &o) const {
    switch (o.k) {
    case COp::K::Slot: return f.slots[static_cast<size_t>(o.v)];
    case COp::K::Imm: return RtValue::integer(o.v);
    case COp::K::Global: return {RtValue::Kind::Ptr, static_cast<uint32_t>(o.v), 0};
    }
    return {};
  }

  Object &deref(const RtValue &p) {
    if (p.kind != RtValue::Kind::Ptr) raise(Trap::OutOfBounds);
    Object &o = sh_.mem.get(p.ref);
    if (!o.alive || p.num < 0 || p.num >= static_cast<int64_t>(o.cells.size())) raise(Trap::OutOfBounds);
    return o;
  }

  void tick(InstrId id) {
    if (++steps > budget_) raise(Trap::StepBudgetExceeded);
    if (sh_.opts->profile) ++sh_.profile.instrCount[id.value];
  }

  void observe(const CInst &in, const RtValue &v) {
    if (sh_.opts->observer) sh_.opts->observer(*in.src, v, loopStack_);
  }

  void recordAccess(InstrId id, uint32_t objIdx, int64_t cell, bool write) {
    if (write && taskWriteSlot_ >= 0 && objIdx != sh_.ioObject)
      sh_.taskWrites[static_cast<size_t>(taskWriteSlot_)].emplace(objIdx, cell);
    if (!sh_.opts->traceDependences) return;
    Object &o = sh_.mem.get(objIdx);
    if (o.history.size() != o.cells.size()) o.history.resize(o.cells.size());
    auto &recs = o.history[static_cast<size_t>(cell)];
    for (const auto &r : recs) {
      if (!write && !r.write) continue;
      DepKind k = write ? (r.write ? DepKind::WAW : DepKind::WAR) : DepKind::RAW;
      auto [it, inserted] = sh_.deps.try_emplace(DepKey{r.instr.value, id.value, k, o.site});
      auto &d = it->second;
      if (inserted) {
        d.src = r.instr;
        d.dst = id;
        d.kind = k;
        d.object = o.site;
      }
      for (const auto &a : loopStack_)
        for (const auto &s : r.spans)
          if (s.loop == a.loop && s.invocation == a.invocation) {
            d.commonLoops.insert(a.loop);
            if (s.first < a.iteration) d.carriedLoops.insert(a.loop);
          }
    }
    AccessRecord *own = nullptr;
    for (auto &r : recs)
      if (r.instr == id && r.write == write) own = &r;
    if (!own) {
      recs.push_back({id, write, {}});
      own = &recs.back();
    }
    std::vector<LoopSpan> spans;
    spans.reserve(loopStack_.size());
    for (const auto &a : loopStack_) {
      uint64_t first = a.iteration;
      for (const auto &s : own->spans)
        if (s.loop == a.loop && s.invocation == a.invocation) first = s.first;
      spans.push_back({a.loop, a.invocation, first, a.iteration});
    }
    own->spans = std::move(spans);
  }

  void enterBlock(Frame &f, uint32_t target) {
    const uint32_t from = f.block;
    const CFunc &fn = prog_.funcs[f.func];
    f.block = target;
    f.ip = 0;
    const CBlock &b = fn.blocks[target];
    if (sh_.trackLoops) {
      const auto &table = prog_.loops->loops;
      while (loopStack_.size() > f.loopBase &&
             !table[static_cast<size_t>(loopIndex_.back())].contains[target]) {
        loopStack_.pop_back();
        loopIndex_.pop_back();
      }
      if (b.loopHeader >= 0) {
        LoopId lid = table[static_cast<size_t>(b.loopHeader)].id;
        if (loopStack_.size() > f.loopBase && loopIndex_.back() == b.loopHeader) {
          ++loopStack_.back().iteration;
        } else {
          loopStack_.push_back({lid, sh_.nextInvocation++, 0});
          loopIndex_.push_back(b.loopHeader);
          if (sh_.opts->profile) ++sh_.profile.loopInvocations[lid.value];
        }
        if (sh_.opts->profile) ++sh_.profile.loopIterations[lid.value];
      }
    }
    if (sh_.opts->profile) ++sh_.profile.blockCount[b.id.value];
    if (b.numPhis == 0) return;
    phiScratch_.clear();
    for (uint32_t k = 0; k < b.numPhis; ++k) {
      const CInst &phi = b.insts[k];
      tick(phi.id);
      size_t arm = 0;
      while (arm < phi.phiPreds.size() && phi.phiPreds[arm] != from) ++arm;
      phiScratch_.push_back(eval(f, phi.ops[arm]));
    }
    for (uint32_t k = 0; k < b.numPhis; ++k) {
      f.slots[static_cast<size_t>(b.insts[k].dst)] = phiScratch_[k];
      observe(b.insts[k], phiScratch_[k]);
    }
    f.ip = b.numPhis;
  }

  void pushFrame(uint32_t func, std::vector<RtValue> args, int32_t retSlot) {
    const CFunc &fn = prog_.funcs[func];
    Frame nf;
    nf.func = func;
    nf.retSlot = retSlot;
    nf.loopBase = loopStack_.size();
    nf.slots.assign(fn.numSlots, RtValue::integer(0));
    std::copy(args.begin(), args.end(), nf.slots.begin());
    frames_.push_back(std::move(nf));
    if (sh_.opts->profile) ++sh_.profile.functionInvocations[func];
    Frame &f = frames_.back();
    f.block = 0;
    enterBlock(f, 0);
  }

  static int64_t arith(Opcode op, int64_t a, int64_t b) {
    auto ua = static_cast<uint64_t>(a), ub = static_cast<uint64_t>(b);
    switch (op) {
    case Opcode::Add: return static_cast<int64_t>(ua + ub);
    case Opcode::Sub: return static_cast<int64_t>(ua - ub);
    case Opcode::Mul: return static_cast<int64_t>(ua * ub);
    case Opcode::SDiv:
      if (b == 0) raise(Trap::DivByZero);
      if (a == INT64_MIN && b == -1) return INT64_MIN;
      return a / b;
    case Opcode::SRem:
      if (b == 0) raise(Trap::DivByZero);
      if (b == -1) return 0;
      return a % b;
    case Opcode::And: return a & b;
    case Opcode::Or: return a | b;
    case Opcode::Xor: return a ^ b;
    case Opcode::Shl: return static_cast<int64_t>(ua << (ub & 63));
    case Opcode::LShr: return static_cast<int64_t>(ua >> (ub & 63));
    case Opcode::Eq: return a == b;
    case Opcode::Ne: return a != b;
    case Opcode::Slt: return a < b;
    case Opcode::Sle: return a <= b;
    case Opcode::Sgt: return a > b;
    case Opcode::Sge: return a >= b;
    default: return 0;
    }
  }

  /// Run a group of consecutive calls to one task function out of order.
  void dispatchTasks(Frame &f) {
    const CFunc &fn = prog_.funcs[f.func];
    const auto &insts = fn.blocks[f.block].insts;
    const int32_t callee = insts[f.ip].callee;
    std::vector<std::vector<RtValue>> argLists;
    uint32_t end = f.ip;
    while (end < insts.size() && insts[end].op == Opcode::Call && insts[end].callee == callee &&
           insts[end].dst < 0) {
      std::vector<RtValue> args;
      for (const auto &o : insts[end].ops) args.push_back(eval(f, o));
      argLists.push_back(std::move(args));
      tick(insts[end].id);
      if (sh_.opts->recordCalls) sh_.calls.insert({FuncId(f.func), FuncId(static_cast<uint32_t>(callee)), insts[end].id});
      ++end;
    }
    const size_t n = argLists.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    const size_t writeBase = sh_.taskWrites.size();
    if (sh_.opts->recordTaskWrites) sh_.taskWrites.resize(writeBase + n);

    std::vector<std::unique_ptr<Machine>> tasks;
    for (size_t i = 0; i < n; ++i)
      tasks.push_back(std::make_unique<Machine>(
          sh_, budget_ - steps, sh_.opts->recordTaskWrites ? static_cast<int>(writeBase + i) : -1));

    if (sh_.opts->taskMode == TaskMode::Concurrent) {
      std::vector<std::thread> threads;
      for (size_t i = 0; i < n; ++i)
        threads.emplace_back([&, i] { tasks[i]->run(static_cast<uint32_t>(callee), argLists[i]); });
      for (auto &t : threads) t.join();
    } else {
      std::mt19937_64 rng(sh_.opts->seed * 0x9E3779B97F4A7C15ull + sh_.dispatchCount++);
      for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
      }
      for (size_t i : order) {
        tasks[i]->loopStack_ = loopStack_;
        tasks[i]->loopIndex_ = loopIndex_;
        tasks[i]->run(static_cast<uint32_t>(callee), argLists[i]);
        if (tasks[i]->trap) break;
      }
    }
    for (size_t i : order) {
      steps += tasks[i]->steps;
      output.insert(output.end(), tasks[i]->output.begin(), tasks[i]->output.end());
    }
    for (size_t i : order)
      if (tasks[i]->trap) raise(*tasks[i]->trap);
    if (steps > budget_) raise(Trap::StepBudgetExceeded);
    f.ip = end;
  }

  RtValue loop(uint32_t func, std::vector<RtValue> args) {
    const size_t baseDepth = frames_.size();
    pushFrame(func, std::move(args), -1);
    RtValue finalValue = RtValue::integer(0);
    while (frames_.size() > baseDepth) {
      Frame &f = frames_.back();
      const CFunc &fn = prog_.funcs[f.func];
      const CInst &in = fn.blocks[f.block].insts[f.ip];
      if (in.op == Opcode::Call && sh_.opts->taskMode != TaskMode::Inline && prog_.funcs[in.callee].isTask) {
        dispatchTasks(f);
        continue;
      }
      tick(in.id);
      auto val = [&](size_t k) { return eval(f, in.ops[k]); };
      auto setResult = [&](RtValue v) {
        f.slots[static_cast<size_t>(in.dst)] = v;
        observe(in, v);
      };
      switch (in.op) {
      case Opcode::Select: {
        RtValue c = val(0);
        setResult(c.num != 0 ? val(1) : val(2));
        break;
      }
      case Opcode::Br: enterBlock(f, in.targets[0]); continue;
      case Opcode::BrCond: enterBlock(f, val(0).num != 0 ? in.targets[0] : in.targets[1]); continue;
      case Opcode::Alloca: {
        uint32_t obj = sh_.mem.allocate({ObjectRef::Kind::Alloca, in.id.value}, static_cast<size_t>(in.ops[0].v));
        f.allocas.push_back(obj);
        setResult({RtValue::Kind::Ptr, obj, 0});
        break;
      }
      case Opcode::Gep: {
        RtValue p = val(0);
        if (p.kind != RtValue::Kind::Ptr) raise(Trap::OutOfBounds);
        p.num = static_cast<int64_t>(static_cast<uint64_t>(p.num) + static_cast<uint64_t>(val(1).num));
        setResult(p);
        break;
      }
      case Opcode::Load: {
        RtValue p = val(0);
        Object &o = deref(p);
        RtValue v = o.cells[static_cast<size_t>(p.num)];
        recordAccess(in.id, p.ref, p.num, false);
        setResult(v);
        break;
      }
      case Opcode::Store: {
        RtValue v = val(0), p = val(1);
        Object &o = deref(p);
        o.cells[static_cast<size_t>(p.num)] = v;
        recordAccess(in.id, p.ref, p.num, true);
        break;
      }
      case Opcode::FuncPtr: setResult({RtValue::Kind::Fn, static_cast<uint32_t>(in.callee), 0}); break;
      case Opcode::Print:
        output.push_back(val(0).num);
        recordAccess(in.id, sh_.ioObject, 0, true);
        break;
      case Opcode::Call:
      case Opcode::ICall: {
        uint32_t target;
        size_t firstArg;
        if (in.op == Opcode::Call) {
          target = static_cast<uint32_t>(in.callee);
          firstArg = 0;
        } else {
          RtValue t = val(0);
          if (t.kind != RtValue::Kind::Fn) raise(Trap::BadICall);
          target = t.ref;
          firstArg = 1;
          const CFunc &cal = prog_.funcs[target];
          if (cal.numParams != in.ops.size() - 1) raise(Trap::BadICall);
          if (in.dst >= 0 && cal.returnType == Type::Void) raise(Trap::BadICall);
        }
        std::vector<RtValue> callArgs;
        for (size_t k = firstArg; k < in.ops.size(); ++k) callArgs.push_back(val(k));
        if (sh_.opts->recordCalls) sh_.calls.insert({FuncId(f.func), FuncId(target), in.id});
        pushFrame(target, std::move(callArgs), in.dst);
        continue;
      }
      case Opcode::Ret: {
        RtValue rv = in.ops.empty() ? RtValue::integer(0) : val(0);
        for (uint32_t obj : f.allocas) {
          Object &o = sh_.mem.get(obj);
          o.alive = false;
        }
        loopStack_.resize(f.loopBase);
        loopIndex_.resize(f.loopBase);
        int32_t retSlot = f.retSlot;
        frames_.pop_back();
        if (frames_.size() == baseDepth) {
          finalValue = rv;
          break;
        }
        Frame &caller = frames_.back();
        const CInst &site = prog_.funcs[caller.func].blocks[caller.block].insts[caller.ip];
        if (retSlot >= 0) {
          caller.slots[static_cast<size_t>(retSlot)] = rv;
          observe(site, rv);
        }
        ++caller.ip;
        continue;
      }
      case Opcode::Phi: break; // handled on block entry
      default: setResult(RtValue::integer(arith(in.op, val(0).num, val(1).num))); break;
      }
      if (frames_.size() > baseDepth) ++frames_.back().ip;
    }
    return finalValue;
  }

  Shared &sh_;
  const Program &prog_;
  uint64_t budget_;
  int taskWriteSlot_;
  std::vector<Frame> frames_;
  std::vector<LoopActivation> loopStack_;
  std::vector<int> loopIndex_;
  std::vector<RtValue> phiScratch_;
};

} // namespace

RunReport execute(const Module &m, std::span<const int64_t> args, const RunOptions &opts) {
  const Function *mainFn = m.findFunction("main");
  if (!mainFn) throw IrError("module has no @main");
  if (mainFn->params.size() != args.size())
    throw IrError("@main expects " + std::to_string(mainFn->params.size()) + " arguments, got " +
                  std::to_string(args.size()));

  const bool needLoops = opts.traceDependences || opts.profile || static_cast<bool>(opts.observer);
  LoopTable ownTable;
  const LoopTable *table = opts.loops;
  if (needLoops && !table) {
    ownTable = buildLoopTable(m);
    table = &ownTable;
  }
  if (opts.taskMode == TaskMode::Concurrent && (needLoops || opts.recordCalls || opts.recordTaskWrites))
    throw IrError("concurrent task mode does not support tracing or profiling");

  Program prog = lower(m, needLoops ? table : nullptr);
  auto sh = std::make_unique<Shared>();
  sh->prog = &prog;
  sh->opts = &opts;
  sh->trackLoops = needLoops;
  for (uint32_t g = 0; g < m.globals.size(); ++g) {
    uint32_t obj = sh->mem.allocate({ObjectRef::Kind::Global, g}, static_cast<size_t>(m.globals[g].cells));
    auto &cells = sh->mem.get(obj).cells;
    for (size_t k = 0; k < m.globals[g].init.size(); ++k) cells[k] = RtValue::integer(m.globals[g].init[k]);
  }
  sh->ioObject = sh->mem.allocate(ObjectRef::io(), 1);
  if (opts.profile) {
    auto &p = sh->profile;
    p.fingerprint = moduleFingerprint(m);
    p.instrCount.assign(m.numInstructions(), 0);
    p.blockCount.assign(m.numBlocks(), 0);
    p.loopInvocations.assign(table->loops.size(), 0);
    p.loopIterations.assign(table->loops.size(), 0);
    p.functionInvocations.assign(m.functions.size(), 0);
  }

  std::vector<RtValue> argv;
  for (int64_t a : args) argv.push_back(RtValue::integer(a));
  Machine mach(*sh, opts.stepBudget);
  RtValue rv = mach.run(static_cast<uint32_t>(m.functionIndex("main")), std::move(argv));

  RunReport rep;
  rep.result.output = std::move(mach.output);
  rep.result.steps = std::min(mach.steps, opts.stepBudget);
  rep.result.trap = mach.trap;
  if (!mach.trap) rep.result.exitValue = rv.kind == RtValue::Kind::Int ? rv.num : 0;
  for (auto &[k, d] : sh->deps) rep.dependences.push_back(std::move(d));
  rep.calls = std::move(sh->calls);
  rep.profile = std::move(sh->profile);
  rep.taskWrites = std::move(sh->taskWrites);
  return rep;
}

ExecResult runProgram(const Module &m, std::span<const int64_t> args, uint64_t stepBudget) {
  RunOptions o;
  o.stepBudget = stepBudget;
  return execute(m, args, o).result;
}

std::vector<DynamicDependence> traceDependences(const Module &m, std::span<const int64_t> args,
                                                uint64_t stepBudget) {
  RunOptions o;
  o.stepBudget = stepBudget;
  o.traceDependences = true;
  auto rep = execute(m, args, o);
  if (rep.result.trap) throw IrError("program trapped: " + std::string(trapName(*rep.result.trap)));
  return std::move(rep.dependences);
}

ProfileData collectProfile(const Module &m, const std::vector<std::vector<int64_t>> &inputs,
                           uint64_t stepBudget) {
  LoopTable table = buildLoopTable(m);
  ProfileData total;
  bool first = true;
  for (const auto &in : inputs) {
    RunOptions o;
    o.stepBudget = stepBudget;
    o.profile = true;
    o.loops = &table;
    auto rep = execute(m, in, o);
    if (rep.result.trap) throw IrError("program trapped while profiling: " + std::string(trapName(*rep.result.trap)));
    if (first) {
      total = std::move(rep.profile);
      first = false;
      continue;
    }
    auto add = [](std::vector<uint64_t> &a, const std::vector<uint64_t> &b) {
      for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(total.instrCount, rep.profile.instrCount);
    add(total.blockCount, rep.profile.blockCount);
    add(total.loopInvocations, rep.profile.loopInvocations);
    add(total.loopIterations, rep.profile.loopIterations);
    add(total.functionInvocations, rep.profile.functionInvocations);
  }
  if (first) {
    total.fingerprint = moduleFingerprint(m);
    total.instrCount.assign(m.numInstructions(), 0);
    total.blockCount.assign(m.numBlocks(), 0);
    total.loopInvocations.assign(table.loops.size(), 0);
    total.loopIterations.assign(table.loops.size(), 0);
    total.functionInvocations.assign(m.functions.size(), 0);
  }
  return total;
}

uint64_t moduleFingerprint(const Module &m) {
  Module body;
  body.globals = m.globals;
  body.functions = m.functions;
  std::string text = printModule(body);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string profileText(const ProfileData &p) {
  std::ostringstream os;
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(p.fingerprint));
  os << "!prof module " << hex << ' ' << p.instrCount.size() << ' ' << p.blockCount.size() << ' '
     << p.loopInvocations.size() << ' ' << p.functionInvocations.size() << '\n';
  auto dump = [&](const char *kind, const std::vector<uint64_t> &v) {
    for (size_t i = 0; i < v.size(); ++i)
      if (v[i]) os << "!prof " << kind << ' ' << i << ' ' << v[i] << '\n';
  };
  dump("instr", p.instrCount);
  dump("block", p.blockCount);
  dump("loop-invocations", p.loopInvocations);
  dump("loop-iterations", p.loopIterations);
  dump("function", p.functionInvocations);
  return os.str();
}

namespace {

ProfileData parseProfileLines(const std::vector<std::string> &lines) {
  ProfileData p;
  bool header = false;
  for (const auto &line : lines) {
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind.empty()) continue;
    if (kind == "module") {
      std::string hex;
      size_t ni, nb, nl, nf;
      if (!(is >> hex >> ni >> nb >> nl >> nf)) throw IrError("malformed profile header: " + line);
      p.fingerprint = std::stoull(hex, nullptr, 16);
      p.instrCount.assign(ni, 0);
      p.blockCount.assign(nb, 0);
      p.loopInvocations.assign(nl, 0);
      p.loopIterations.assign(nl, 0);
      p.functionInvocations.assign(nf, 0);
      header = true;
      continue;
    }
    if (!header) throw IrError("profile entry before header: " + line);
    size_t ord;
    uint64_t count;
    if (!(is >> ord >> count)) throw IrError("malformed profile entry: " + line);
    std::vector<uint64_t> *vec = nullptr;
    if (kind == "instr") vec = &p.instrCount;
    else if (kind == "block") vec = &p.blockCount;
    else if (kind == "loop-invocations") vec = &p.loopInvocations;
    else if (kind == "loop-iterations") vec = &p.loopIterations;
    else if (kind == "function") vec = &p.functionInvocations;
    else throw IrError("unknown profile entity kind: " + kind);
    if (ord >= vec->size()) throw IrError("profile ordinal out of range: " + line);
    (*vec)[ord] = count;
  }
  if (!header) throw IrError("no profile header found");
  return p;
}

} // namespace

ProfileData parseProfileText(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    auto pos = line.find("!prof");
    if (pos == std::string::npos) continue;
    lines.push_back(line.substr(pos + 5));
  }
  return parseProfileLines(lines);
}

namespace {

void checkShape(const Module &m, const ProfileData &p) {
  if (p.fingerprint != moduleFingerprint(m) || p.instrCount.size() != m.numInstructions() ||
      p.blockCount.size() != m.numBlocks() || p.functionInvocations.size() != m.functions.size())
    throw IrError("profile entity ids do not match the module (stale profile)");
}

} // namespace

Module embedProfile(const Module &m, const ProfileData &p) {
  checkShape(m, p);
  Module out = m;
  out.eraseMeta("prof");
  std::istringstream is(profileText(p));
  std::string line;
  while (std::getline(is, line)) out.metadata.push_back({"prof", line.substr(6)});
  return out;
}

std::optional<ProfileData> readProfile(const Module &m) {
  auto lines = m.metaValues("prof");
  if (lines.empty()) return std::nullopt;
  ProfileData p = parseProfileLines(lines);
  checkShape(m, p);
  return p;
}

double loopHotness(const Module &m, const ProfileData &p, const LoopTable::Loop &loop) {
  uint64_t total = p.totalSteps();
  if (total == 0) return 0.0;
  uint64_t inLoop = 0;
  const auto &fn = m.functions[loop.func];
  for (uint32_t b = 0; b < fn.blocks.size(); ++b)
    if (loop.contains[b])
      for (const auto &i : fn.blocks[b].insts) inLoop += p.instrCount[i.id.value];
  return static_cast<double>(inLoop) / static_cast<double>(total);
}

} // namespace pdgkit
