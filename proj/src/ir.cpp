#include "pdgkit/ir.hpp"

#include <algorithm>
#include <array>

namespace pdgkit {

namespace {

constexpr std::array<std::string_view, 29> kOpcodeNames = {
    "add", "sub", "mul", "sdiv", "srem", "and", "or", "xor", "shl", "lshr",
    "eq", "ne", "slt", "sle", "sgt", "sge",
    "select", "phi", "br", "brcond", "alloca", "gep", "load", "store",
    "call", "icall", "funcptr", "print", "ret",
};

} // namespace

std::string_view entityKindName(EntityKind k) {
  switch (k) {
  case EntityKind::Instruction: return "instr";
  case EntityKind::Block: return "block";
  case EntityKind::Function: return "function";
  case EntityKind::Loop: return "loop";
  }
  return "?";
}

std::string_view typeName(Type t) {
  switch (t) {
  case Type::I64: return "i64";
  case Type::I1: return "i1";
  case Type::Ptr: return "ptr";
  case Type::Void: return "void";
  }
  return "?";
}

std::optional<Type> parseTypeName(std::string_view s) {
  if (s == "i64") return Type::I64;
  if (s == "i1") return Type::I1;
  if (s == "ptr") return Type::Ptr;
  if (s == "void") return Type::Void;
  return std::nullopt;
}

std::string_view opcodeName(Opcode op) { return kOpcodeNames[static_cast<size_t>(op)]; }

std::optional<Opcode> parseOpcode(std::string_view s) {
  for (size_t i = 0; i < kOpcodeNames.size(); ++i)
    if (kOpcodeNames[i] == s) return static_cast<Opcode>(i);
  return std::nullopt;
}

bool isBinaryArith(Opcode op) { return op >= Opcode::Add && op <= Opcode::LShr; }
bool isCompare(Opcode op) { return op >= Opcode::Eq && op <= Opcode::Sge; }
bool isTerminator(Opcode op) { return op == Opcode::Br || op == Opcode::BrCond || op == Opcode::Ret; }

std::string operandText(const Operand &o) {
  switch (o.kind) {
  case Operand::Kind::Local: return "%" + o.name;
  case Operand::Kind::Literal: return std::to_string(o.value);
  case Operand::Kind::Global:
  case Operand::Kind::Function: return "@" + o.name;
  case Operand::Kind::Label: return o.name;
  }
  return "?";
}

std::vector<const Operand *> Instruction::valueOperands() const {
  std::vector<const Operand *> out;
  for (const auto &o : operands)
    if (o.kind != Operand::Kind::Label && o.kind != Operand::Kind::Function) out.push_back(&o);
  return out;
}

std::vector<Operand *> Instruction::valueOperands() {
  std::vector<Operand *> out;
  for (auto &o : operands)
    if (o.kind != Operand::Kind::Label && o.kind != Operand::Kind::Function) out.push_back(&o);
  return out;
}

std::vector<std::string> Instruction::successors() const {
  std::vector<std::string> out;
  for (const auto &o : operands)
    if (o.kind == Operand::Kind::Label) out.push_back(o.name);
  return out;
}

std::vector<Operand> Instruction::callArgs() const {
  if (!isCall() || operands.empty()) return {};
  return {operands.begin() + 1, operands.end()};
}

size_t BasicBlock::firstNonPhi() const {
  size_t i = 0;
  while (i < insts.size() && insts[i].isPhi()) ++i;
  return i;
}

size_t Function::instructionCount() const {
  size_t n = 0;
  for (const auto &b : blocks) n += b.insts.size();
  return n;
}

void Module::renumber() {
  instrLocs_.clear();
  blockLocs_.clear();
  for (uint32_t f = 0; f < functions.size(); ++f) {
    auto &fn = functions[f];
    fn.id = FuncId(f);
    for (uint32_t b = 0; b < fn.blocks.size(); ++b) {
      auto &bb = fn.blocks[b];
      bb.id = BlockId(static_cast<uint32_t>(blockLocs_.size()));
      blockLocs_.push_back({f, b});
      for (uint32_t i = 0; i < bb.insts.size(); ++i) {
        bb.insts[i].id = InstrId(static_cast<uint32_t>(instrLocs_.size()));
        instrLocs_.push_back({f, b, i});
      }
    }
  }
}

const Instruction &Module::instr(InstrId id) const {
  auto l = loc(id);
  return functions[l.func].blocks[l.block].insts[l.index];
}

Instruction &Module::instr(InstrId id) {
  auto l = loc(id);
  return functions[l.func].blocks[l.block].insts[l.index];
}

const BasicBlock &Module::blockOf(InstrId id) const {
  auto l = loc(id);
  return functions[l.func].blocks[l.block];
}

const BasicBlock &Module::block(BlockId id) const {
  auto l = loc(id);
  return functions[l.func].blocks[l.block];
}

const Function *Module::findFunction(std::string_view name) const {
  int i = functionIndex(name);
  return i < 0 ? nullptr : &functions[i];
}

Function *Module::findFunction(std::string_view name) {
  int i = functionIndex(name);
  return i < 0 ? nullptr : &functions[i];
}

const Global *Module::findGlobal(std::string_view name) const {
  int i = globalIndex(name);
  return i < 0 ? nullptr : &globals[i];
}

int Module::globalIndex(std::string_view name) const {
  for (size_t i = 0; i < globals.size(); ++i)
    if (globals[i].name == name) return static_cast<int>(i);
  return -1;
}

int Module::functionIndex(std::string_view name) const {
  for (size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> Module::metaValues(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto &m : metadata)
    if (m.key == key) out.push_back(m.text);
  return out;
}

void Module::eraseMeta(std::string_view key) {
  std::erase_if(metadata, [&](const MetaEntry &m) { return m.key == key; });
}

FunctionIndex::FunctionIndex(const Function &f) : fn_(&f) {
  const size_t n = f.blocks.size();
  succs_.resize(n);
  preds_.resize(n);
  for (uint32_t b = 0; b < n; ++b) labels_.emplace(f.blocks[b].label, b);
  for (uint32_t p = 0; p < f.params.size(); ++p)
    defs_.emplace(f.params[p].name, ValueDef{ValueDef::Kind::Param, p, 0, 0});
  for (uint32_t b = 0; b < n; ++b) {
    const auto &bb = f.blocks[b];
    for (uint32_t i = 0; i < bb.insts.size(); ++i)
      if (bb.insts[i].hasResult())
        defs_.emplace(bb.insts[i].result, ValueDef{ValueDef::Kind::Instr, 0, b, i});
    if (bb.insts.empty() || !bb.terminator().isTerminator()) continue;
    for (const auto &s : bb.terminator().successors()) {
      auto it = labels_.find(s);
      if (it == labels_.end()) continue;
      succs_[b].push_back(it->second);
    }
  }
  for (uint32_t b = 0; b < n; ++b)
    for (uint32_t s : succs_[b])
      if (std::find(preds_[s].begin(), preds_[s].end(), b) == preds_[s].end()) preds_[s].push_back(b);

  rpoIndex_.assign(n, -1);
  if (n == 0) return;
  // Iterative DFS producing post-order, then reversed.
  std::vector<uint32_t> post;
  std::vector<char> seen(n, 0);
  std::vector<std::pair<uint32_t, size_t>> stack{{0, 0}};
  seen[0] = 1;
  while (!stack.empty()) {
    auto &[b, next] = stack.back();
    if (next < succs_[b].size()) {
      uint32_t s = succs_[b][next++];
      if (!seen[s]) {
        seen[s] = 1;
        stack.emplace_back(s, 0);
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  rpo_.assign(post.rbegin(), post.rend());
  for (size_t i = 0; i < rpo_.size(); ++i) rpoIndex_[rpo_[i]] = static_cast<int>(i);
}

int FunctionIndex::blockIndex(std::string_view label) const {
  auto it = labels_.find(std::string(label));
  return it == labels_.end() ? -1 : static_cast<int>(it->second);
}

const ValueDef *FunctionIndex::def(std::string_view name) const {
  auto it = defs_.find(std::string(name));
  return it == defs_.end() ? nullptr : &it->second;
}

const Instruction *FunctionIndex::defInstr(std::string_view name) const {
  const ValueDef *d = def(name);
  if (!d || d->kind != ValueDef::Kind::Instr) return nullptr;
  return &fn_->blocks[d->block].insts[d->index];
}

Type FunctionIndex::typeOf(const Operand &o) const {
  switch (o.kind) {
  case Operand::Kind::Literal: return Type::I64;
  case Operand::Kind::Global: return Type::Ptr;
  case Operand::Kind::Local: {
    const ValueDef *d = def(o.name);
    if (!d) return Type::Void;
    if (d->kind == ValueDef::Kind::Param) return fn_->params[d->param].type;
    return fn_->blocks[d->block].insts[d->index].type;
  }
  default: return Type::Void;
  }
}

std::vector<std::pair<uint32_t, uint32_t>> FunctionIndex::uses(std::string_view name) const {
  std::vector<std::pair<uint32_t, uint32_t>> out;
  for (uint32_t b = 0; b < fn_->blocks.size(); ++b) {
    const auto &bb = fn_->blocks[b];
    for (uint32_t i = 0; i < bb.insts.size(); ++i)
      for (const Operand *o : bb.insts[i].valueOperands())
        if (o->isLocal(name)) {
          out.emplace_back(b, i);
          break;
        }
  }
  return out;
}

} // namespace pdgkit
