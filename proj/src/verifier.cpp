#include "pdgkit/verifier.hpp"

#include "pdgkit/dominators.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pdgkit {

namespace {

class Verifier {
public:
  explicit Verifier(const Module &m) : m_(m) {}

  std::vector<Diagnostic> run() {
    std::set<std::string> names;
    for (const auto &g : m_.globals) {
      if (!names.insert(g.name).second) report(EntityKind::Function, 0, "unique-names", "duplicate global @" + g.name);
      if (g.cells < 1 || static_cast<int64_t>(g.init.size()) > g.cells)
        report(EntityKind::Function, 0, "global-shape", "bad cell count for @" + g.name);
    }
    for (const auto &f : m_.functions)
      if (!names.insert(f.name).second)
        report(EntityKind::Function, f.id.value, "unique-names", "duplicate function @" + f.name);
    for (const auto &f : m_.functions) checkFunction(f);
    return std::move(diags_);
  }

private:
  void report(EntityKind k, uint32_t ord, std::string rule, std::string msg) {
    diags_.push_back({{k, ord}, std::move(rule), std::move(msg)});
  }
  void reportInstr(const Instruction &i, std::string rule, std::string msg) {
    report(EntityKind::Instruction, i.id.value, std::move(rule), std::move(msg));
  }
  static std::string at(const Instruction &i) { return " at instr #" + std::to_string(i.id.value); }

  void checkFunction(const Function &f) {
    if (f.blocks.empty()) {
      report(EntityKind::Function, f.id.value, "non-empty", "function @" + f.name + " has no blocks");
      return;
    }
    FunctionIndex idx(f);
    bool structural = true;
    std::set<std::string> labels, defs;
    for (const auto &p : f.params)
      if (!defs.insert(p.name).second)
        report(EntityKind::Function, f.id.value, "ssa-single-def", "duplicate definition %" + p.name);
    for (const auto &b : f.blocks) {
      if (!labels.insert(b.label).second) {
        report(EntityKind::Block, b.id.value, "unique-labels", "duplicate label " + b.label);
        structural = false;
      }
      if (b.insts.empty() || !b.terminator().isTerminator()) {
        report(EntityKind::Block, b.id.value, "terminator", "block " + b.label + " does not end in a terminator");
        structural = false;
      }
      bool seenNonPhi = false;
      for (size_t i = 0; i < b.insts.size(); ++i) {
        const auto &inst = b.insts[i];
        if (inst.isTerminator() && i + 1 != b.insts.size()) {
          reportInstr(inst, "terminator", "instruction follows terminator" + at(inst));
          structural = false;
        }
        if (inst.isPhi() && seenNonPhi) reportInstr(inst, "phi-position", "phi after non-phi" + at(inst));
        seenNonPhi |= !inst.isPhi();
        if (inst.hasResult() && !defs.insert(inst.result).second)
          reportInstr(inst, "ssa-single-def", "duplicate definition %" + inst.result + at(inst));
        for (const auto &o : inst.operands) {
          if (o.kind == Operand::Kind::Label && idx.blockIndex(o.name) < 0) {
            reportInstr(inst, "unknown-label", "unknown label " + o.name + at(inst));
            structural = false;
          }
        }
      }
    }
    if (!structural) return;

    const auto &entry = f.blocks[0];
    if (!idx.preds(0).empty()) report(EntityKind::Block, entry.id.value, "entry", "entry block has predecessors");
    if (!entry.insts.empty() && entry.insts[0].isPhi())
      reportInstr(entry.insts[0], "entry", "entry block has phi" + at(entry.insts[0]));
    for (uint32_t b = 0; b < f.blocks.size(); ++b)
      if (!idx.reachable(b))
        report(EntityKind::Block, f.blocks[b].id.value, "reachable", "unreachable block " + f.blocks[b].label);

    auto dom = computeDominators(idx, DomDirection::Forward);
    for (uint32_t b = 0; b < f.blocks.size(); ++b) {
      const auto &bb = f.blocks[b];
      for (uint32_t i = 0; i < bb.insts.size(); ++i) {
        checkTypes(f, idx, bb.insts[i]);
        checkPhi(idx, b, bb.insts[i]);
        checkDominance(idx, dom, b, i);
      }
    }
  }

  void checkPhi(const FunctionIndex &idx, uint32_t b, const Instruction &inst) {
    if (!inst.isPhi()) return;
    const auto &preds = idx.preds(b);
    std::set<uint32_t> seen;
    bool ok = inst.incoming.size() == inst.operands.size();
    for (const auto &l : inst.incoming) {
      int p = idx.blockIndex(l);
      if (p < 0 || !seen.insert(static_cast<uint32_t>(p)).second) {
        ok = false;
        continue;
      }
      if (std::find(preds.begin(), preds.end(), static_cast<uint32_t>(p)) == preds.end()) ok = false;
    }
    if (!ok || seen.size() != preds.size()) reportInstr(inst, "phi-arms", "phi incomplete" + at(inst));
  }

  void checkDominance(const FunctionIndex &idx, const DominatorInfo &dom, uint32_t b, uint32_t i) {
    const auto &inst = idx.function().blocks[b].insts[i];
    for (size_t k = 0; k < inst.operands.size(); ++k) {
      const auto &o = inst.operands[k];
      if (!o.isLocal()) continue;
      const ValueDef *d = idx.def(o.name);
      if (!d) {
        reportInstr(inst, "ssa-defined", "unknown identifier %" + o.name + at(inst));
        continue;
      }
      if (d->kind == ValueDef::Kind::Param) continue;
      bool ok;
      if (inst.isPhi()) {
        int pred = k < inst.incoming.size() ? idx.blockIndex(inst.incoming[k]) : -1;
        ok = pred >= 0 && dom.dominates(d->block, static_cast<uint32_t>(pred));
      } else if (d->block == b) {
        ok = d->index < i;
      } else {
        ok = dom.strictlyDominates(d->block, b);
      }
      if (!ok) reportInstr(inst, "ssa-dominance", "SSA dominance violated" + at(inst));
    }
  }

  void expectType(const FunctionIndex &idx, const Instruction &inst, const Operand &o, Type want,
                  const char *what) {
    if (o.kind == Operand::Kind::Literal) {
      if (want == Type::Ptr) reportInstr(inst, "types", std::string("literal used as ") + what + at(inst));
      else if (want == Type::I1 && o.value != 0 && o.value != 1)
        reportInstr(inst, "types", "i1 literal out of range" + at(inst));
      return;
    }
    Type t = idx.typeOf(o);
    if (t == Type::Void) return; // reported as undefined elsewhere
    if (t != want)
      reportInstr(inst, "types",
                  std::string(what) + " expects " + std::string(typeName(want)) + ", got " +
                      std::string(typeName(t)) + at(inst));
  }

  void checkTypes(const Function &f, const FunctionIndex &idx, const Instruction &inst) {
    auto arity = [&](size_t n) {
      if (inst.operands.size() != n) {
        reportInstr(inst, "arity", "wrong operand count for " + std::string(opcodeName(inst.op)) + at(inst));
        return false;
      }
      return true;
    };
    auto needsResult = [&](bool want) {
      if (inst.hasResult() != want)
        reportInstr(inst, "result", std::string(opcodeName(inst.op)) + (want ? " needs" : " cannot have") +
                                        " a result" + at(inst));
    };
    if (isBinaryArith(inst.op) || isCompare(inst.op)) {
      needsResult(true);
      if (!arity(2)) return;
      expectType(idx, inst, inst.operands[0], Type::I64, "operand");
      expectType(idx, inst, inst.operands[1], Type::I64, "operand");
      if ((inst.op == Opcode::SDiv || inst.op == Opcode::SRem) && inst.operands[1].isLiteral() &&
          inst.operands[1].value == 0)
        reportInstr(inst, "div-by-zero", "division by literal zero" + at(inst));
      return;
    }
    switch (inst.op) {
    case Opcode::Select:
      needsResult(true);
      if (!arity(3)) return;
      expectType(idx, inst, inst.operands[0], Type::I1, "condition");
      expectType(idx, inst, inst.operands[1], inst.type, "select arm");
      expectType(idx, inst, inst.operands[2], inst.type, "select arm");
      return;
    case Opcode::Phi:
      needsResult(true);
      for (const auto &o : inst.operands) expectType(idx, inst, o, inst.type, "phi arm");
      return;
    case Opcode::Br:
      needsResult(false);
      arity(1);
      return;
    case Opcode::BrCond:
      needsResult(false);
      if (arity(3)) expectType(idx, inst, inst.operands[0], Type::I1, "condition");
      return;
    case Opcode::Alloca:
      needsResult(true);
      if (arity(1) && (!inst.operands[0].isLiteral() || inst.operands[0].value < 1))
        reportInstr(inst, "alloca", "alloca needs a positive literal cell count" + at(inst));
      return;
    case Opcode::Gep:
      needsResult(true);
      if (!arity(2)) return;
      expectType(idx, inst, inst.operands[0], Type::Ptr, "address");
      expectType(idx, inst, inst.operands[1], Type::I64, "offset");
      return;
    case Opcode::Load:
      needsResult(true);
      if (arity(1)) expectType(idx, inst, inst.operands[0], Type::Ptr, "address");
      if (inst.type == Type::I1) reportInstr(inst, "types", "memory holds i64 or ptr only" + at(inst));
      return;
    case Opcode::Store:
      needsResult(false);
      if (!arity(2)) return;
      if (!inst.operands[0].isLiteral() && idx.typeOf(inst.operands[0]) == Type::I1)
        reportInstr(inst, "types", "memory holds i64 or ptr only" + at(inst));
      expectType(idx, inst, inst.operands[1], Type::Ptr, "address");
      return;
    case Opcode::FuncPtr:
      needsResult(true);
      if (arity(1) && !m_.findFunction(inst.operands[0].name))
        reportInstr(inst, "unknown-function", "unknown function @" + inst.operands[0].name + at(inst));
      return;
    case Opcode::Print:
      needsResult(false);
      if (arity(1)) expectType(idx, inst, inst.operands[0], Type::I64, "print operand");
      return;
    case Opcode::Ret:
      needsResult(false);
      if (f.returnType == Type::Void) {
        if (!inst.operands.empty()) reportInstr(inst, "ret", "void function returns a value" + at(inst));
      } else if (inst.operands.size() != 1) {
        reportInstr(inst, "ret", "missing return value" + at(inst));
      } else {
        expectType(idx, inst, inst.operands[0], f.returnType, "return value");
      }
      return;
    case Opcode::Call: {
      const Function *callee = m_.findFunction(inst.operands[0].name);
      if (!callee) {
        reportInstr(inst, "unknown-function", "unknown function @" + inst.operands[0].name + at(inst));
        return;
      }
      if (inst.operands.size() - 1 != callee->params.size()) {
        reportInstr(inst, "arity", "call argument count mismatch" + at(inst));
        return;
      }
      for (size_t a = 0; a < callee->params.size(); ++a)
        expectType(idx, inst, inst.operands[a + 1], callee->params[a].type, "argument");
      if (inst.hasResult() && callee->returnType == Type::Void)
        reportInstr(inst, "result", "void call cannot have a result" + at(inst));
      return;
    }
    case Opcode::ICall:
      if (inst.operands.empty()) return;
      expectType(idx, inst, inst.operands[0], Type::Ptr, "icall target");
      return;
    default: return;
    }
  }

  const Module &m_;
  std::vector<Diagnostic> diags_;
};

} // namespace

std::vector<Diagnostic> verifyModule(const Module &m) { return Verifier(m).run(); }

std::string formatDiagnostic(const Diagnostic &d) {
  std::ostringstream os;
  os << d.message << " [" << d.rule << ", " << entityKindName(d.entity.kind) << " #" << d.entity.ordinal << "]";
  return os.str();
}

void verifyOrThrow(const Module &m, std::string_view context) {
  auto diags = verifyModule(m);
  if (!diags.empty())
    throw IrError(std::string(context) + ": " + formatDiagnostic(diags.front()));
}

} // namespace pdgkit
