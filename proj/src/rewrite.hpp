#pragma once

#include "pdgkit/ir.hpp"

#include <set>
#include <string>

namespace pdgkit::detail {

inline std::set<std::string> valueNames(const Function &f) {
  std::set<std::string> s;
  for (const auto &p : f.params) s.insert(p.name);
  for (const auto &b : f.blocks)
    for (const auto &i : b.insts)
      if (i.hasResult()) s.insert(i.result);
  return s;
}

inline std::string freshName(std::set<std::string> &taken, const std::string &base) {
  std::string n = base;
  for (int k = 1; taken.count(n); ++k) n = base + "." + std::to_string(k);
  taken.insert(n);
  return n;
}

inline std::string freshLabel(const Function &f, const std::string &base) {
  std::set<std::string> labels;
  for (const auto &b : f.blocks) labels.insert(b.label);
  return freshName(labels, base);
}

inline void replaceUses(Function &f, const std::string &name, const Operand &with) {
  for (auto &b : f.blocks)
    for (auto &i : b.insts)
      for (Operand *o : i.valueOperands())
        if (o->isLocal(name)) *o = with;
}

inline void retarget(Instruction &term, const std::string &from, const std::string &to) {
  for (auto &o : term.operands)
    if (o.kind == Operand::Kind::Label && o.name == from) o.name = to;
}

inline Instruction makeInst(Opcode op, std::string result, Type type, std::vector<Operand> ops) {
  Instruction i;
  i.op = op;
  i.result = std::move(result);
  i.type = type;
  i.operands = std::move(ops);
  return i;
}

inline int blockPos(const Function &f, const std::string &label) {
  for (size_t b = 0; b < f.blocks.size(); ++b)
    if (f.blocks[b].label == label) return static_cast<int>(b);
  return -1;
}

} // namespace pdgkit::detail
