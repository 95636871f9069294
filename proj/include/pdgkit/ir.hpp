//===- ir.hpp - Minimal SSA intermediate representation ---------*- C++ -*-===//
//
// The IR is deliberately small: i64/i1/ptr values, a flat cell-based memory
// model, and explicit phi nodes. Every analysis in the library is expressed
// over these structures.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pdgkit {

/// Ordinal identifier tagged by the kind of entity it names.
template <class Tag> struct Id {
  uint32_t value = 0;
  constexpr Id() = default;
  constexpr explicit Id(uint32_t v) : value(v) {}
  friend constexpr auto operator<=>(Id, Id) = default;
};

struct InstrTag;
struct BlockTag;
struct FuncTag;
struct LoopTag;
using InstrId = Id<InstrTag>;
using BlockId = Id<BlockTag>;
using FuncId = Id<FuncTag>;
using LoopId = Id<LoopTag>;

enum class EntityKind : uint8_t { Instruction, Block, Function, Loop };

/// Kind-erased id, used where diagnostics and metadata name an entity.
struct EntityId {
  EntityKind kind = EntityKind::Instruction;
  uint32_t ordinal = 0;
  friend auto operator<=>(const EntityId &, const EntityId &) = default;
};

std::string_view entityKindName(EntityKind k);

enum class Type : uint8_t { I64, I1, Ptr, Void };

std::string_view typeName(Type t);
std::optional<Type> parseTypeName(std::string_view s);

enum class Opcode : uint8_t {
  Add, Sub, Mul, SDiv, SRem, And, Or, Xor, Shl, LShr,
  Eq, Ne, Slt, Sle, Sgt, Sge,
  Select, Phi, Br, BrCond, Alloca, Gep, Load, Store,
  Call, ICall, FuncPtr, Print, Ret,
};

std::string_view opcodeName(Opcode op);
std::optional<Opcode> parseOpcode(std::string_view s);

bool isBinaryArith(Opcode op);
bool isCompare(Opcode op);
bool isTerminator(Opcode op);

struct Operand {
  enum class Kind : uint8_t { Local, Literal, Global, Function, Label };

  Kind kind = Kind::Literal;
  std::string name;
  int64_t value = 0;

  static Operand local(std::string n) { return {Kind::Local, std::move(n), 0}; }
  static Operand literal(int64_t v) { return {Kind::Literal, {}, v}; }
  static Operand global(std::string n) { return {Kind::Global, std::move(n), 0}; }
  static Operand function(std::string n) { return {Kind::Function, std::move(n), 0}; }
  static Operand label(std::string n) { return {Kind::Label, std::move(n), 0}; }

  bool isLocal() const { return kind == Kind::Local; }
  bool isLiteral() const { return kind == Kind::Literal; }
  bool isLocal(std::string_view n) const { return isLocal() && name == n; }

  friend bool operator==(const Operand &, const Operand &) = default;
};

std::string operandText(const Operand &o);

/// Operand layout per opcode:
///   binary/cmp:  a, b           select: cond, a, b
///   phi:         values (incoming labels in `incoming`)
///   br:          label           brcond: cond, ltrue, lfalse
///   alloca:      literal count   gep: ptr, offset
///   load:        ptr             store: value, ptr
///   call:        @callee, args   icall: ptr, args
///   funcptr:     @callee         print: value
///   ret:         optional value
struct Instruction {
  InstrId id;
  Opcode op = Opcode::Ret;
  std::string result;
  Type type = Type::Void;
  std::vector<Operand> operands;
  std::vector<std::string> incoming;

  bool hasResult() const { return !result.empty(); }
  bool isTerminator() const { return pdgkit::isTerminator(op); }
  bool isPhi() const { return op == Opcode::Phi; }
  bool isCall() const { return op == Opcode::Call || op == Opcode::ICall; }
  /// Operands that carry values (excludes labels and direct callee names).
  std::vector<const Operand *> valueOperands() const;
  std::vector<Operand *> valueOperands();
  /// Successor labels of a terminator, in edge-label order.
  std::vector<std::string> successors() const;
  /// Call arguments (for call/icall).
  std::vector<Operand> callArgs() const;

  friend bool operator==(const Instruction &, const Instruction &) = default;
};

struct BasicBlock {
  BlockId id;
  std::string label;
  std::vector<Instruction> insts;

  const Instruction &terminator() const { return insts.back(); }
  Instruction &terminator() { return insts.back(); }
  /// Index of the first non-phi instruction.
  size_t firstNonPhi() const;

  friend bool operator==(const BasicBlock &, const BasicBlock &) = default;
};

struct Param {
  std::string name;
  Type type = Type::I64;
  friend bool operator==(const Param &, const Param &) = default;
};

struct Function {
  FuncId id;
  std::string name;
  std::vector<Param> params;
  Type returnType = Type::Void;
  std::vector<BasicBlock> blocks;

  size_t instructionCount() const;
  friend bool operator==(const Function &, const Function &) = default;
};

struct Global {
  std::string name;
  int64_t cells = 1;
  std::vector<int64_t> init;
  friend bool operator==(const Global &, const Global &) = default;
};

struct MetaEntry {
  std::string key;
  std::string text;
  friend bool operator==(const MetaEntry &, const MetaEntry &) = default;
};

/// Position of an instruction inside a module.
struct InstrLoc {
  uint32_t func = 0;
  uint32_t block = 0;
  uint32_t index = 0;
};

struct BlockLoc {
  uint32_t func = 0;
  uint32_t block = 0;
};

class Module {
public:
  std::vector<Global> globals;
  std::vector<Function> functions;
  std::vector<MetaEntry> metadata;

  /// Reassign all entity ordinals in textual order and rebuild the lookup
  /// tables. Must be called after any structural mutation.
  void renumber();

  size_t numInstructions() const { return instrLocs_.size(); }
  size_t numBlocks() const { return blockLocs_.size(); }

  const Instruction &instr(InstrId id) const;
  Instruction &instr(InstrId id);
  InstrLoc loc(InstrId id) const { return instrLocs_.at(id.value); }
  BlockLoc loc(BlockId id) const { return blockLocs_.at(id.value); }
  const Function &functionOf(InstrId id) const { return functions[loc(id).func]; }
  const BasicBlock &blockOf(InstrId id) const;
  const BasicBlock &block(BlockId id) const;

  const Function *findFunction(std::string_view name) const;
  Function *findFunction(std::string_view name);
  const Global *findGlobal(std::string_view name) const;
  int globalIndex(std::string_view name) const;
  int functionIndex(std::string_view name) const;

  /// Structural equality: entities, ordinals and metadata.
  friend bool operator==(const Module &a, const Module &b) {
    return a.globals == b.globals && a.functions == b.functions && a.metadata == b.metadata;
  }

  std::vector<std::string> metaValues(std::string_view key) const;
  void eraseMeta(std::string_view key);

private:
  std::vector<InstrLoc> instrLocs_;
  std::vector<BlockLoc> blockLocs_;
};

/// Definition site of an SSA name inside a function.
struct ValueDef {
  enum class Kind : uint8_t { Param, Instr } kind = Kind::Instr;
  uint32_t param = 0;
  uint32_t block = 0;
  uint32_t index = 0;
};

/// Per-function lookup tables: block labels, CFG edges, and SSA definitions.
/// Block indices are function-local (position in Function::blocks).
class FunctionIndex {
public:
  explicit FunctionIndex(const Function &f);

  const Function &function() const { return *fn_; }
  size_t numBlocks() const { return succs_.size(); }
  int blockIndex(std::string_view label) const;
  const std::vector<uint32_t> &succs(uint32_t b) const { return succs_[b]; }
  const std::vector<uint32_t> &preds(uint32_t b) const { return preds_[b]; }
  const ValueDef *def(std::string_view name) const;
  const Instruction *defInstr(std::string_view name) const;
  /// Type of a value operand in this function (literals report I64).
  Type typeOf(const Operand &o) const;
  /// Reverse post-order of blocks reachable from the entry.
  const std::vector<uint32_t> &rpo() const { return rpo_; }
  bool reachable(uint32_t b) const { return rpoIndex_[b] >= 0; }
  int rpoIndex(uint32_t b) const { return rpoIndex_[b]; }
  /// Uses of a name: (block, index) pairs in textual order.
  std::vector<std::pair<uint32_t, uint32_t>> uses(std::string_view name) const;

private:
  const Function *fn_;
  std::unordered_map<std::string, uint32_t> labels_;
  std::unordered_map<std::string, ValueDef> defs_;
  std::vector<std::vector<uint32_t>> succs_;
  std::vector<std::vector<uint32_t>> preds_;
  std::vector<uint32_t> rpo_;
  std::vector<int> rpoIndex_;
};

/// Error raised for malformed input text or invalid requests against a module.
class IrError : public std::runtime_error {
public:
  IrError(std::string msg, int line = 0, int column = 0)
      : std::runtime_error(std::move(msg)), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

} // namespace pdgkit

template <class Tag> struct std::hash<pdgkit::Id<Tag>> {
  size_t operator()(pdgkit::Id<Tag> id) const noexcept { return std::hash<uint32_t>{}(id.value); }
};
