//===- parser.cpp - Textual IR reader and writer ---------------------------===//
//
// The reader is token based rather than line based so that a whole function
// may sit on one line ("func @main() -> i64 { bb0: ret 0 }"). Metadata lines
// ("!key text") run to the end of the line.
//
//===----------------------------------------------------------------------===//
#include "pdgkit/parser.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_set>

namespace pdgkit {

namespace {

enum class Tok { Ident, Local, At, Int, Punct, Meta, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::string extra; // metadata payload
  int64_t value = 0;
  int line = 1;
  int col = 1;
};

bool isIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skipSpace();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (c == '!') {
      advance();
      t.kind = Tok::Meta;
      while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_])))
        t.text += advance();
      if (pos_ < src_.size() && src_[pos_] == ' ') advance();
      while (pos_ < src_.size() && src_[pos_] != '\n') t.extra += advance();
      if (!t.extra.empty() && t.extra.back() == '\r') t.extra.pop_back();
      if (t.text.empty()) fail("empty metadata key", t);
      return t;
    }
    if (c == '%' || c == '@') {
      advance();
      t.kind = c == '%' ? Tok::Local : Tok::At;
      while (pos_ < src_.size() && isIdentChar(src_[pos_])) t.text += advance();
      if (t.text.empty()) fail(std::string("expected name after '") + c + "'", t);
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      t.kind = Tok::Int;
      t.text += advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) t.text += advance();
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
      if (ec != std::errc()) fail("integer literal out of range: " + t.text, t);
      if (pos_ < src_.size() && isIdentChar(src_[pos_])) fail("malformed integer literal", t);
      return t;
    }
    if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
      advance();
      advance();
      t.kind = Tok::Punct;
      t.text = "->";
      return t;
    }
    if (isIdentChar(c)) {
      t.kind = Tok::Ident;
      while (pos_ < src_.size() && isIdentChar(src_[pos_])) t.text += advance();
      return t;
    }
    if (std::string_view("()[]{},:=").find(c) != std::string_view::npos) {
      t.kind = Tok::Punct;
      t.text = std::string(1, advance());
      return t;
    }
    fail(std::string("unexpected character '") + c + "'", t);
    return t;
  }

  [[noreturn]] static void fail(const std::string &msg, const Token &t) {
    throw IrError("syntax error: " + msg, t.line, t.col);
  }

private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skipSpace() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct PendingInstr {
  uint32_t func, block, index;
  int line, col;
  bool typeAnnotated;
};

class Parser {
public:
  Parser(std::string_view text, SourceLines *lines) : lex_(text), lines_(lines) {
    bump();
    bump();
  }

  Module run() {
    while (cur_.kind != Tok::End) {
      if (cur_.kind == Tok::Meta) {
        mod_.metadata.push_back({cur_.text, cur_.extra});
        bump();
      } else if (isIdent("global")) {
        parseGlobal();
      } else if (isIdent("func")) {
        parseFunction();
      } else {
        error("expected 'global', 'func' or metadata");
      }
    }
    resolve();
    mod_.renumber();
    return std::move(mod_);
  }

private:
  void bump() {
    cur_ = std::move(peek_);
    peek_ = lex_.next();
  }
  bool isIdent(std::string_view s) const { return cur_.kind == Tok::Ident && cur_.text == s; }
  bool isPunct(std::string_view s) const { return cur_.kind == Tok::Punct && cur_.text == s; }
  [[noreturn]] void error(const std::string &msg) const { Lexer::fail(msg, cur_); }

  void expectPunct(std::string_view s) {
    if (!isPunct(s)) error("expected '" + std::string(s) + "'");
    bump();
  }
  std::string expectIdent(const char *what) {
    if (cur_.kind != Tok::Ident) error(std::string("expected ") + what);
    std::string s = cur_.text;
    bump();
    return s;
  }
  int64_t expectInt() {
    if (cur_.kind != Tok::Int) error("expected integer");
    int64_t v = cur_.value;
    bump();
    return v;
  }
  Type expectType(bool allowVoid) {
    auto t = cur_.kind == Tok::Ident ? parseTypeName(cur_.text) : std::nullopt;
    if (!t || (*t == Type::Void && !allowVoid)) error("expected type");
    bump();
    return *t;
  }
  std::optional<Type> optionalValueType() {
    if (cur_.kind != Tok::Ident) return std::nullopt;
    auto t = parseTypeName(cur_.text);
    if (!t || *t == Type::Void) return std::nullopt;
    // A label can never follow these opcodes, so an ident here is a type.
    bump();
    return t;
  }

  void parseGlobal() {
    int line = cur_.line;
    bump();
    if (cur_.kind != Tok::At) error("expected global name");
    Global g;
    g.name = cur_.text;
    bump();
    expectPunct(":");
    if (!isIdent("i64")) error("globals must have type i64");
    bump();
    expectPunct("[");
    g.cells = expectInt();
    expectPunct("]");
    if (isPunct("=")) {
      bump();
      expectPunct("[");
      g.init.push_back(expectInt());
      while (isPunct(",")) {
        bump();
        g.init.push_back(expectInt());
      }
      expectPunct("]");
    }
    if (g.cells < 1) throw IrError("global @" + g.name + " must have at least one cell", line);
    if (static_cast<int64_t>(g.init.size()) > g.cells)
      throw IrError("too many initializers for @" + g.name, line);
    if (names_.count(g.name)) throw IrError("duplicate global @" + g.name, line);
    names_.insert(g.name);
    mod_.globals.push_back(std::move(g));
  }

  void parseFunction() {
    int line = cur_.line;
    bump();
    if (cur_.kind != Tok::At) error("expected function name");
    Function f;
    f.name = cur_.text;
    bump();
    expectPunct("(");
    if (!isPunct(")")) {
      for (;;) {
        if (cur_.kind != Tok::Local) error("expected parameter name");
        Param p;
        p.name = cur_.text;
        bump();
        expectPunct(":");
        p.type = expectType(false);
        f.params.push_back(std::move(p));
        if (!isPunct(",")) break;
        bump();
      }
    }
    expectPunct(")");
    expectPunct("->");
    f.returnType = expectType(true);
    expectPunct("{");
    if (names_.count(f.name)) {
      bool isFunc = false;
      for (const auto &other : mod_.functions) isFunc |= other.name == f.name;
      throw IrError(std::string(isFunc ? "duplicate function" : "duplicate definition") + " @" + f.name, line);
    }
    names_.insert(f.name);
    uint32_t fidx = static_cast<uint32_t>(mod_.functions.size());
    if (lines_) lines_->functions.push_back(line);
    mod_.functions.push_back(std::move(f));
    Function &fn = mod_.functions.back();
    while (!isPunct("}")) {
      if (cur_.kind == Tok::End) error("unterminated function body");
      if (cur_.kind != Tok::Ident || !(peek_.kind == Tok::Punct && peek_.text == ":"))
        error("expected block label");
      BasicBlock bb;
      bb.label = cur_.text;
      if (lines_) lines_->blocks.push_back(cur_.line);
      bump();
      bump();
      fn.blocks.push_back(std::move(bb));
      uint32_t bidx = static_cast<uint32_t>(fn.blocks.size() - 1);
      while (!isPunct("}") && !(cur_.kind == Tok::Ident && peek_.kind == Tok::Punct && peek_.text == ":")) {
        if (cur_.kind == Tok::End) error("unterminated function body");
        auto &insts = fn.blocks[bidx].insts;
        PendingInstr pend{fidx, bidx, static_cast<uint32_t>(insts.size()), cur_.line, cur_.col, false};
        if (lines_) lines_->instructions.push_back(cur_.line);
        insts.push_back(parseInstruction(pend));
        pending_.push_back(pend);
      }
      if (fn.blocks[bidx].insts.empty()) throw IrError("empty block " + fn.blocks[bidx].label, cur_.line, cur_.col);
    }
    bump();
    if (fn.blocks.empty()) throw IrError("function @" + fn.name + " has no blocks", line);
  }

  Operand parseValue() {
    switch (cur_.kind) {
    case Tok::Local: {
      auto o = Operand::local(cur_.text);
      bump();
      return o;
    }
    case Tok::Int: {
      auto o = Operand::literal(cur_.value);
      bump();
      return o;
    }
    case Tok::At: {
      // Resolved to global or function once all names are known.
      auto o = Operand::global(cur_.text);
      bump();
      return o;
    }
    default: error("expected operand");
    }
  }

  Operand parseLabel() { return Operand::label(expectIdent("block label")); }

  void parseArgs(Instruction &inst) {
    expectPunct("(");
    if (!isPunct(")")) {
      inst.operands.push_back(parseValue());
      while (isPunct(",")) {
        bump();
        inst.operands.push_back(parseValue());
      }
    }
    expectPunct(")");
  }

  void parseValueList(Instruction &inst, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      if (i) expectPunct(",");
      inst.operands.push_back(parseValue());
    }
  }

  Instruction parseInstruction(PendingInstr &pend) {
    Instruction inst;
    if (cur_.kind == Tok::Local) {
      inst.result = cur_.text;
      bump();
      expectPunct("=");
    }
    if (cur_.kind != Tok::Ident) error("expected opcode");
    auto op = parseOpcode(cur_.text);
    if (!op) error("unknown opcode '" + cur_.text + "'");
    inst.op = *op;
    bump();
    auto annotate = [&] {
      if (auto t = optionalValueType()) {
        inst.type = *t;
        pend.typeAnnotated = true;
      }
    };
    switch (inst.op) {
    case Opcode::Phi:
      annotate();
      for (;;) {
        expectPunct("[");
        inst.incoming.push_back(expectIdent("block label"));
        expectPunct(":");
        inst.operands.push_back(parseValue());
        expectPunct("]");
        if (!isPunct(",")) break;
        bump();
      }
      break;
    case Opcode::Select:
      annotate();
      parseValueList(inst, 3);
      break;
    case Opcode::Load:
      annotate();
      parseValueList(inst, 1);
      break;
    case Opcode::ICall:
      annotate();
      inst.operands.push_back(parseValue());
      parseArgs(inst);
      break;
    case Opcode::Call:
      if (cur_.kind != Tok::At) error("expected callee name");
      inst.operands.push_back(Operand::function(cur_.text));
      bump();
      parseArgs(inst);
      break;
    case Opcode::FuncPtr:
      if (cur_.kind != Tok::At) error("expected function name");
      inst.operands.push_back(Operand::function(cur_.text));
      bump();
      break;
    case Opcode::Br: inst.operands.push_back(parseLabel()); break;
    case Opcode::BrCond:
      inst.operands.push_back(parseValue());
      expectPunct(",");
      inst.operands.push_back(parseLabel());
      expectPunct(",");
      inst.operands.push_back(parseLabel());
      break;
    case Opcode::Ret:
      if (cur_.kind == Tok::Local || cur_.kind == Tok::Int || cur_.kind == Tok::At)
        inst.operands.push_back(parseValue());
      break;
    case Opcode::Alloca:
    case Opcode::Print: parseValueList(inst, 1); break;
    default: parseValueList(inst, 2); break;
    }
    return inst;
  }

  void resolve() {
    std::unordered_set<std::string> globalNames, funcNames;
    for (const auto &g : mod_.globals) globalNames.insert(g.name);
    for (const auto &f : mod_.functions) funcNames.insert(f.name);

    for (const auto &p : pending_) {
      auto &fn = mod_.functions[p.func];
      auto &inst = fn.blocks[p.block].insts[p.index];
      for (auto &o : inst.operands) {
        if (o.kind == Operand::Kind::Global && !globalNames.count(o.name)) {
          if (funcNames.count(o.name))
            throw IrError("function @" + o.name + " used as a value; use funcptr", p.line, p.col);
          throw IrError("unknown identifier @" + o.name, p.line, p.col);
        }
        if (o.kind == Operand::Kind::Function && !funcNames.count(o.name))
          throw IrError("unknown identifier @" + o.name, p.line, p.col);
      }
    }

    for (uint32_t f = 0; f < mod_.functions.size(); ++f) {
      auto &fn = mod_.functions[f];
      std::unordered_set<std::string> labels, locals;
      for (const auto &b : fn.blocks)
        if (!labels.insert(b.label).second) throw IrError("duplicate block label " + b.label + " in @" + fn.name);
      for (const auto &prm : fn.params)
        if (!locals.insert(prm.name).second) throw IrError("duplicate definition %" + prm.name + " in @" + fn.name);
      for (const auto &p : pending_) {
        if (p.func != f) continue;
        const auto &inst = fn.blocks[p.block].insts[p.index];
        if (inst.hasResult() && !locals.insert(inst.result).second)
          throw IrError("duplicate definition %" + inst.result, p.line, p.col);
      }
      for (const auto &p : pending_) {
        if (p.func != f) continue;
        const auto &inst = fn.blocks[p.block].insts[p.index];
        for (const auto &o : inst.operands) {
          if (o.kind == Operand::Kind::Local && !locals.count(o.name))
            throw IrError("unknown identifier %" + o.name, p.line, p.col);
          if (o.kind == Operand::Kind::Label && !labels.count(o.name))
            throw IrError("unknown identifier " + o.name, p.line, p.col);
        }
        for (const auto &l : inst.incoming)
          if (!labels.count(l)) throw IrError("unknown identifier " + l, p.line, p.col);
      }
    }
    inferTypes();
  }

  void inferTypes() {
    std::vector<const PendingInstr *> deferred;
    for (const auto &p : pending_) {
      auto &inst = mod_.functions[p.func].blocks[p.block].insts[p.index];
      if (p.typeAnnotated) continue;
      switch (inst.op) {
      case Opcode::Select:
      case Opcode::Phi: inst.type = Type::Void; deferred.push_back(&p); break;
      case Opcode::Alloca:
      case Opcode::Gep:
      case Opcode::FuncPtr: inst.type = Type::Ptr; break;
      case Opcode::Load:
      case Opcode::ICall: inst.type = Type::I64; break;
      case Opcode::Call: {
        const Function *callee = mod_.findFunction(inst.operands[0].name);
        inst.type = callee->returnType;
        break;
      }
      default:
        if (isBinaryArith(inst.op)) inst.type = Type::I64;
        else if (isCompare(inst.op)) inst.type = Type::I1;
        else inst.type = Type::Void;
      }
      if (!inst.hasResult() && inst.op != Opcode::Call && inst.op != Opcode::ICall) inst.type = Type::Void;
    }
    // Phi/select take the type of their first typed operand; iterate because
    // phis may reference values defined later (or each other).
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto *p : deferred) {
        auto &fn = mod_.functions[p->func];
        auto &inst = fn.blocks[p->block].insts[p->index];
        if (inst.type != Type::Void) continue;
        FunctionIndex idx(fn);
        size_t first = inst.op == Opcode::Select ? 1 : 0;
        for (size_t i = first; i < inst.operands.size(); ++i) {
          const auto &o = inst.operands[i];
          if (o.isLiteral()) continue;
          Type t = idx.typeOf(o);
          if (t != Type::Void) {
            inst.type = t;
            changed = true;
            break;
          }
        }
      }
    }
    for (const auto *p : deferred) {
      auto &inst = mod_.functions[p->func].blocks[p->block].insts[p->index];
      if (inst.type == Type::Void) inst.type = Type::I64;
    }
  }

  Lexer lex_;
  SourceLines *lines_;
  Token cur_, peek_;
  Module mod_;
  std::set<std::string> names_;
  std::vector<PendingInstr> pending_;
};

} // namespace

Module parseModule(std::string_view text, SourceLines *lines) {
  if (lines) *lines = {};
  return Parser(text, lines).run();
}

int SourceLines::lineOf(const EntityId &e) const {
  const std::vector<int> *v = nullptr;
  switch (e.kind) {
  case EntityKind::Instruction: v = &instructions; break;
  case EntityKind::Block: v = &blocks; break;
  case EntityKind::Function: v = &functions; break;
  case EntityKind::Loop: return 0;
  }
  return e.ordinal < v->size() ? (*v)[e.ordinal] : 0;
}

std::string printInstruction(const Instruction &inst) {
  std::ostringstream os;
  if (inst.hasResult()) os << '%' << inst.result << " = ";
  os << opcodeName(inst.op);
  bool annotated = inst.hasResult() && inst.type != Type::I64 &&
                   (inst.op == Opcode::Phi || inst.op == Opcode::Select || inst.op == Opcode::Load ||
                    inst.op == Opcode::ICall);
  if (annotated) os << ' ' << typeName(inst.type);
  switch (inst.op) {
  case Opcode::Phi:
    for (size_t i = 0; i < inst.operands.size(); ++i)
      os << (i ? ", [" : " [") << inst.incoming[i] << ": " << operandText(inst.operands[i]) << ']';
    break;
  case Opcode::Call:
  case Opcode::ICall:
    os << ' ' << operandText(inst.operands[0]) << '(';
    for (size_t i = 1; i < inst.operands.size(); ++i) os << (i > 1 ? ", " : "") << operandText(inst.operands[i]);
    os << ')';
    break;
  default:
    for (size_t i = 0; i < inst.operands.size(); ++i) os << (i ? ", " : " ") << operandText(inst.operands[i]);
  }
  return os.str();
}

std::string printFunction(const Function &f) {
  std::ostringstream os;
  os << "func @" << f.name << '(';
  for (size_t i = 0; i < f.params.size(); ++i)
    os << (i ? ", " : "") << '%' << f.params[i].name << ": " << typeName(f.params[i].type);
  os << ") -> " << typeName(f.returnType) << " {\n";
  for (const auto &b : f.blocks) {
    os << b.label << ":\n";
    for (const auto &i : b.insts) os << "  " << printInstruction(i) << '\n';
  }
  os << "}\n";
  return os.str();
}

std::string printModule(const Module &m) {
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << '\n';
    first = false;
  };
  if (!m.globals.empty()) {
    sep();
    for (const auto &g : m.globals) {
      os << "global @" << g.name << ": i64[" << g.cells << ']';
      if (!g.init.empty()) {
        os << " = [";
        for (size_t i = 0; i < g.init.size(); ++i) os << (i ? ", " : "") << g.init[i];
        os << ']';
      }
      os << '\n';
    }
  }
  for (const auto &f : m.functions) {
    sep();
    os << printFunction(f);
  }
  if (!m.metadata.empty()) {
    sep();
    for (const auto &e : m.metadata) {
      os << '!' << e.key;
      if (!e.text.empty()) os << ' ' << e.text;
      os << '\n';
    }
  }
  return os.str();
}

} // namespace pdgkit
