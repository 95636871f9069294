#include "pdgkit/alias.hpp"

#include <algorithm>
#include <sstream>

namespace pdgkit {

std::string_view aliasAnswerName(AliasAnswer a) {
  switch (a) {
  case AliasAnswer::NoAlias: return "NoAlias";
  case AliasAnswer::MayAlias: return "MayAlias";
  case AliasAnswer::MustAlias: return "MustAlias";
  }
  return "?";
}

std::string_view modRefName(ModRef m) {
  switch (m) {
  case ModRef::NoModRef: return "NoModRef";
  case ModRef::Ref: return "Ref";
  case ModRef::Mod: return "Mod";
  case ModRef::ModRef: return "ModRef";
  }
  return "?";
}

namespace {

const PtsSet kEmpty;
const std::set<uint32_t> kNoCallees;

bool unite(PtsSet &dst, const PtsSet &src) {
  size_t before = dst.size();
  dst.insert(src.begin(), src.end());
  return dst.size() != before;
}

} // namespace

PtsSet PointsTo::operandPts(uint32_t func, const Operand &o) const {
  switch (o.kind) {
  case Operand::Kind::Local: return valuePts(func, o.name);
  case Operand::Kind::Global:
    return {PtsTarget{{ObjectRef::Kind::Global, static_cast<uint32_t>(m_->globalIndex(o.name))}, 0}};
  default: return {};
  }
}

const PtsSet &PointsTo::valuePts(uint32_t func, const std::string &name) const {
  auto it = values_.find({func, name});
  return it == values_.end() ? kEmpty : it->second;
}

const PtsSet &PointsTo::contentPts(const ObjectRef &o) const {
  auto it = contents_.find(o);
  return it == contents_.end() ? kEmpty : it->second;
}

const std::set<uint32_t> &PointsTo::callees(InstrId site) const {
  auto it = callees_.find(site.value);
  return it == callees_.end() ? kNoCallees : it->second;
}

PointsTo PointsTo::compute(const Module &m) {
  PointsTo pt;
  pt.m_ = &m;
  std::vector<FunctionIndex> idx;
  for (const auto &f : m.functions) idx.emplace_back(f);

  auto isPtr = [&](uint32_t fi, const Operand &o) {
    return o.kind == Operand::Kind::Global || (o.isLocal() && idx[fi].typeOf(o) == Type::Ptr);
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
      const auto &f = m.functions[fi];
      for (const auto &b : f.blocks) {
        for (const auto &i : b.insts) {
          auto resultSet = [&]() -> PtsSet & { return pt.values_[{fi, i.result}]; };
          switch (i.op) {
          case Opcode::Alloca:
            changed |= resultSet().insert({{ObjectRef::Kind::Alloca, i.id.value}, 0}).second;
            break;
          case Opcode::FuncPtr:
            changed |= resultSet()
                           .insert({{ObjectRef::Kind::Function,
                                     static_cast<uint32_t>(m.functionIndex(i.operands[0].name))},
                                    0})
                           .second;
            break;
          case Opcode::Gep: {
            PtsSet base = pt.operandPts(fi, i.operands[0]);
            PtsSet out;
            for (const auto &t : base) {
              PtsTarget n = t;
              if (t.offset && i.operands[1].isLiteral()) n.offset = *t.offset + i.operands[1].value;
              else n.offset.reset();
              out.insert(n);
            }
            changed |= unite(resultSet(), out);
            break;
          }
          case Opcode::Phi:
            if (i.type != Type::Ptr) break;
            for (const auto &o : i.operands) changed |= unite(resultSet(), pt.operandPts(fi, o));
            break;
          case Opcode::Select:
            if (i.type != Type::Ptr) break;
            changed |= unite(resultSet(), pt.operandPts(fi, i.operands[1]));
            changed |= unite(resultSet(), pt.operandPts(fi, i.operands[2]));
            break;
          case Opcode::Load: {
            if (i.type != Type::Ptr) break;
            PtsSet addr = pt.operandPts(fi, i.operands[0]);
            for (const auto &t : addr) changed |= unite(resultSet(), pt.contentPts(t.object));
            break;
          }
          case Opcode::Store: {
            if (!isPtr(fi, i.operands[0])) break;
            PtsSet v = pt.operandPts(fi, i.operands[0]);
            PtsSet addr = pt.operandPts(fi, i.operands[1]);
            for (const auto &t : addr) changed |= unite(pt.contents_[t.object], v);
            break;
          }
          case Opcode::Call:
          case Opcode::ICall: {
            auto &targets = pt.callees_[i.id.value];
            auto args = i.callArgs();
            if (i.op == Opcode::Call) {
              changed |= targets.insert(static_cast<uint32_t>(m.functionIndex(i.operands[0].name))).second;
            } else {
              for (const auto &t : pt.operandPts(fi, i.operands[0])) {
                if (t.object.kind != ObjectRef::Kind::Function) continue;
                const auto &callee = m.functions[t.object.index];
                if (callee.params.size() != args.size()) continue;
                if (i.hasResult() && callee.returnType == Type::Void) continue;
                changed |= targets.insert(t.object.index).second;
              }
            }
            for (uint32_t c : std::set<uint32_t>(targets)) {
              const auto &callee = m.functions[c];
              for (size_t a = 0; a < args.size(); ++a)
                if (callee.params[a].type == Type::Ptr)
                  changed |= unite(pt.values_[{c, callee.params[a].name}], pt.operandPts(fi, args[a]));
              if (i.hasResult() && i.type == Type::Ptr && callee.returnType == Type::Ptr)
                for (const auto &cb : callee.blocks)
                  for (const auto &r : cb.insts)
                    if (r.op == Opcode::Ret && !r.operands.empty())
                      changed |= unite(resultSet(), pt.operandPts(c, r.operands[0]));
            }
            break;
          }
          default: break;
          }
        }
      }
    }
  }

  // Mod/ref summaries: direct effects, then callee effects to a fixpoint.
  pt.summaries_.assign(m.functions.size(), {});
  for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
    auto &s = pt.summaries_[fi];
    for (const auto &b : m.functions[fi].blocks)
      for (const auto &i : b.insts) {
        if (i.op == Opcode::Load)
          for (const auto &o : pt.objects(i.id)) s.ref.insert(o);
        else if (i.op == Opcode::Store || i.op == Opcode::Print)
          for (const auto &o : pt.objects(i.id)) s.mod.insert(o);
      }
  }
  changed = true;
  while (changed) {
    changed = false;
    for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
      for (const auto &b : m.functions[fi].blocks)
        for (const auto &i : b.insts) {
          if (!i.isCall()) continue;
          for (uint32_t c : pt.callees(i.id)) {
            if (c == fi) continue;
            auto &s = pt.summaries_[fi];
            const auto callee = pt.summaries_[c];
            size_t before = s.mod.size() + s.ref.size();
            s.mod.insert(callee.mod.begin(), callee.mod.end());
            s.ref.insert(callee.ref.begin(), callee.ref.end());
            changed |= s.mod.size() + s.ref.size() != before;
          }
        }
    }
  }

  for (const auto &[obj, stored] : pt.contents_)
    for (const auto &t : stored) pt.escaped_.insert(t.object);
  pt.reaches_.assign(m.functions.size(), {});
  for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
    for (const auto &b : m.functions[fi].blocks)
      for (const auto &i : b.insts) {
        if (i.op == Opcode::Ret && !i.operands.empty())
          for (const auto &t : pt.operandPts(fi, i.operands[0])) pt.escaped_.insert(t.object);
        if (i.isCall())
          for (uint32_t c : pt.callees(i.id)) pt.reaches_[fi].insert(c);
      }
  }
  changed = true;
  while (changed) {
    changed = false;
    for (auto &r : pt.reaches_) {
      size_t before = r.size();
      for (uint32_t c : std::set<uint32_t>(r)) r.insert(pt.reaches_[c].begin(), pt.reaches_[c].end());
      changed |= r.size() != before;
    }
  }
  return pt;
}

bool PointsTo::isMemoryAccess(const Instruction &i) {
  return i.op == Opcode::Load || i.op == Opcode::Store || i.op == Opcode::Print;
}

PtsSet PointsTo::location(InstrId access) const {
  const auto &i = m_->instr(access);
  uint32_t fi = m_->loc(access).func;
  switch (i.op) {
  case Opcode::Load: return operandPts(fi, i.operands[0]);
  case Opcode::Store: return operandPts(fi, i.operands[1]);
  case Opcode::Print: return {PtsTarget{ObjectRef::io(), 0}};
  default: return {};
  }
}

std::set<ObjectRef> PointsTo::objects(InstrId access) const {
  std::set<ObjectRef> out;
  for (const auto &t : location(access)) out.insert(t.object);
  return out;
}

AliasAnswer PointsTo::alias(const PtsSet &a, const PtsSet &b) {
  bool overlap = false;
  for (const auto &x : a) {
    for (const auto &y : b) {
      if (x.object != y.object) continue;
      if (x.offset && y.offset && *x.offset != *y.offset) continue;
      overlap = true;
      break;
    }
    if (overlap) break;
  }
  if (!overlap) return AliasAnswer::NoAlias;
  if (a.size() == 1 && a == b && a.begin()->offset) return AliasAnswer::MustAlias;
  return AliasAnswer::MayAlias;
}

AliasAnswer PointsTo::alias(InstrId a, InstrId b) const { return alias(location(a), location(b)); }

ModRefSummary PointsTo::callEffects(InstrId call) const {
  ModRefSummary out;
  for (uint32_t c : callees(call)) {
    out.mod.insert(summaries_[c].mod.begin(), summaries_[c].mod.end());
    out.ref.insert(summaries_[c].ref.begin(), summaries_[c].ref.end());
  }
  uint32_t caller = m_->loc(call).func;
  auto local = [&](const ObjectRef &o) {
    if (o.kind != ObjectRef::Kind::Alloca || escaped_.count(o)) return false;
    uint32_t owner = m_->loc(InstrId(o.index)).func;
    return owner != caller && !reaches_[owner].count(caller);
  };
  std::erase_if(out.mod, local);
  std::erase_if(out.ref, local);
  return out;
}

ModRef PointsTo::modRef(InstrId call, InstrId access) const {
  auto eff = callEffects(call);
  auto objs = objects(access);
  bool mod = false, ref = false;
  for (const auto &o : objs) {
    mod |= eff.mod.count(o) > 0;
    ref |= eff.ref.count(o) > 0;
  }
  return static_cast<ModRef>((mod ? 2 : 0) | (ref ? 1 : 0));
}

int64_t PointsTo::objectSize(const ObjectRef &o) const {
  switch (o.kind) {
  case ObjectRef::Kind::Alloca: return m_->instr(InstrId(o.index)).operands[0].value;
  case ObjectRef::Kind::Global: return m_->globals[o.index].cells;
  case ObjectRef::Kind::Function: return 0;
  case ObjectRef::Kind::Io: return 1;
  }
  return 0;
}

std::string targetText(const Module &m, const PtsTarget &t) {
  std::string name;
  switch (t.object.kind) {
  case ObjectRef::Kind::Alloca: {
    const auto &i = m.instr(InstrId(t.object.index));
    name = m.functionOf(i.id).name + ".%" + i.result;
    break;
  }
  case ObjectRef::Kind::Global: name = "@" + m.globals[t.object.index].name; break;
  case ObjectRef::Kind::Function: name = "fn@" + m.functions[t.object.index].name; break;
  case ObjectRef::Kind::Io: name = "io"; break;
  }
  return name + "@" + (t.offset ? std::to_string(*t.offset) : std::string("?"));
}

std::string PointsTo::dump() const {
  std::ostringstream os;
  for (uint32_t fi = 0; fi < m_->functions.size(); ++fi) {
    const auto &f = m_->functions[fi];
    std::vector<std::string> names;
    for (const auto &p : f.params)
      if (p.type == Type::Ptr) names.push_back(p.name);
    for (const auto &b : f.blocks)
      for (const auto &i : b.insts)
        if (i.hasResult() && i.type == Type::Ptr) names.push_back(i.result);
    for (const auto &n : names) {
      os << "pts %" << n << " -> {";
      bool first = true;
      for (const auto &t : valuePts(fi, n)) {
        os << (first ? "" : ", ") << targetText(*m_, t);
        first = false;
      }
      os << "}";
      if (m_->functions.size() > 1) os << " in @" << f.name;
      os << '\n';
    }
  }
  return os.str();
}

AliasAnswer syntacticAlias(const Module &m, InstrId a, InstrId b) {
  const auto &x = m.instr(a);
  const auto &y = m.instr(b);
  auto addr = [](const Instruction &i) -> const Operand * {
    if (i.op == Opcode::Load) return &i.operands[0];
    if (i.op == Opcode::Store) return &i.operands[1];
    return nullptr;
  };
  if (x.op == Opcode::Print && y.op == Opcode::Print) return AliasAnswer::MustAlias;
  const Operand *pa = addr(x), *pb = addr(y);
  if (pa && pb && *pa == *pb && m.loc(a).func == m.loc(b).func &&
      (pa->kind == Operand::Kind::Global || pa->isLocal()))
    return AliasAnswer::MustAlias;
  return AliasAnswer::MayAlias;
}

} // namespace pdgkit
