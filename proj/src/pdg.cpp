#include "pdgkit/pdg.hpp"

#include "pdgkit/parser.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace pdgkit {

std::string_view carriedName(Carried c) {
  switch (c) {
  case Carried::False: return "0";
  case Carried::True: return "1";
  case Carried::Unknown: return "?";
  }
  return "?";
}

Carried DepEdge::carriedFor(LoopId l) const {
  auto it = carried.find(l);
  return it == carried.end() ? Carried::Unknown : it->second;
}

bool DependenceGraph::isInternal(InstrId i) const {
  return std::binary_search(internal.begin(), internal.end(), i);
}

bool DependenceGraph::isExternal(InstrId i) const {
  return std::binary_search(external.begin(), external.end(), i);
}

void DependenceGraph::index() {
  in_.clear();
  out_.clear();
  for (size_t e = 0; e < edges.size(); ++e) {
    out_[edges[e].src.value].push_back(e);
    in_[edges[e].dst.value].push_back(e);
  }
}

const std::vector<size_t> &DependenceGraph::incoming(InstrId i) const {
  static const std::vector<size_t> none;
  auto it = in_.find(i.value);
  return it == in_.end() ? none : it->second;
}

const std::vector<size_t> &DependenceGraph::outgoing(InstrId i) const {
  static const std::vector<size_t> none;
  auto it = out_.find(i.value);
  return it == out_.end() ? none : it->second;
}

size_t DependenceGraph::countMemoryEdges(bool mayOnly) const {
  return static_cast<size_t>(std::count_if(edges.begin(), edges.end(), [&](const DepEdge &e) {
    return e.isMemory() && (!mayOnly || !e.must);
  }));
}

namespace {

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

const char *kindColor(DepKind k) {
  switch (k) {
  case DepKind::RAW: return "black";
  case DepKind::WAW: return "red";
  case DepKind::WAR: return "blue";
  }
  return "black";
}

} // namespace

std::string DependenceGraph::dot(const Module &m) const {
  std::ostringstream os;
  os << "digraph pdg {\n  node [shape=box];\n";
  auto node = [&](InstrId i, bool ext) {
    os << "  I" << i.value << " [label=\"I" << i.value << ": " << escape(printInstruction(m.instr(i))) << '"'
       << (ext ? ", style=dashed" : "") << "];\n";
  };
  for (InstrId i : internal) node(i, false);
  for (InstrId i : external) node(i, true);
  for (const auto &e : edges) {
    os << "  I" << e.src.value << " -> I" << e.dst.value << " [";
    if (e.isControl()) {
      os << "style=dotted";
    } else {
      os << "color=" << kindColor(e.kind) << ", label=\"" << depKindName(e.kind)
         << (e.isMemory() ? " mem" : "") << '"';
      if (!e.must) os << ", style=dashed";
    }
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<std::string> DependenceGraph::metadataLines() const {
  std::vector<std::string> out;
  for (const auto &e : edges) {
    std::ostringstream os;
    os << e.src.value << ' ' << e.dst.value << ' ';
    if (e.isControl()) os << "control - - must";
    else os << "data " << depKindName(e.kind) << ' ' << (e.isMemory() ? "memory" : "register") << ' '
            << (e.must ? "must" : "may");
    os << ' ';
    if (e.carried.empty()) os << '-';
    bool first = true;
    for (const auto &[l, c] : e.carried) {
      os << (first ? "" : ",") << 'L' << l.value << ':' << carriedName(c);
      first = false;
    }
    out.push_back(os.str());
  }
  return out;
}

ControlDependenceInfo controlDependences(const FunctionIndex &f, const DominatorInfo &pd) {
  ControlDependenceInfo info;
  const auto &fn = f.function();
  info.blockDeps.assign(f.numBlocks(), {});
  for (uint32_t a = 0; a < f.numBlocks(); ++a) {
    const auto &succs = f.succs(a);
    if (succs.size() < 2) continue;
    const int stop = pd.idom[a];
    for (size_t k = 0; k < succs.size(); ++k) {
      int runner = static_cast<int>(succs[k]);
      while (runner >= 0 && runner != stop && runner != static_cast<int>(pd.virtualExit())) {
        info.blockDeps[static_cast<size_t>(runner)].emplace_back(fn.blocks[a].terminator().id, static_cast<int>(k));
        runner = pd.idom[static_cast<size_t>(runner)];
      }
    }
  }
  return info;
}

ControlDependenceInfo controlDependences(const FunctionIndex &f) {
  return controlDependences(f, computeDominators(f, DomDirection::Post));
}

namespace {

struct Access {
  InstrId id;
  PtsSet reads;
  PtsSet writes;
  bool isCall = false;
};

PtsSet objectsAsTargets(const std::set<ObjectRef> &objs) {
  PtsSet out;
  for (const auto &o : objs) out.insert({o, std::nullopt});
  return out;
}

} // namespace

DependenceGraph buildPdg(const Module &m, const PointsTo &pts, const PdgOptions &opts) {
  DependenceGraph g;
  for (uint32_t i = 0; i < m.numInstructions(); ++i) g.internal.push_back(InstrId(i));

  auto data = [&](InstrId s, InstrId d, DepKind k, Medium med, bool must) {
    DepEdge e;
    e.src = s;
    e.dst = d;
    e.cls = DepClass::Data;
    e.kind = k;
    e.medium = med;
    e.must = must;
    g.edges.push_back(std::move(e));
  };

  std::vector<Access> accesses;
  for (uint32_t fi = 0; fi < m.functions.size(); ++fi) {
    const auto &f = m.functions[fi];
    FunctionIndex idx(f);

    // Register def-use edges.
    for (const auto &b : f.blocks)
      for (const auto &i : b.insts)
        for (const Operand *o : i.valueOperands()) {
          if (!o->isLocal()) continue;
          if (const Instruction *d = idx.defInstr(o->name)) data(d->id, i.id, DepKind::RAW, Medium::Register, true);
        }

    // Control dependences.
    auto cd = controlDependences(idx);
    for (uint32_t b = 0; b < f.blocks.size(); ++b)
      for (const auto &[br, label] : cd.blockDeps[b])
        for (const auto &i : f.blocks[b].insts) {
          DepEdge e;
          e.src = br;
          e.dst = i.id;
          e.cls = DepClass::Control;
          e.label = label;
          g.edges.push_back(std::move(e));
        }

    for (const auto &b : f.blocks)
      for (const auto &i : b.insts) {
        if (PointsTo::isMemoryAccess(i)) {
          Access a;
          a.id = i.id;
          if (i.op == Opcode::Load) a.reads = pts.location(i.id);
          else a.writes = pts.location(i.id);
          accesses.push_back(std::move(a));
        } else if (i.isCall()) {
          // Interprocedural register edges.
          for (uint32_t c : pts.callees(i.id)) {
            const auto &callee = m.functions[c];
            FunctionIndex cidx(callee);
            for (const auto &p : callee.params)
              for (auto [ub, ui] : cidx.uses(p.name))
                data(i.id, callee.blocks[ub].insts[ui].id, DepKind::RAW, Medium::Register, true);
            if (i.hasResult())
              for (const auto &cb : callee.blocks)
                for (const auto &r : cb.insts)
                  if (r.op == Opcode::Ret && !r.operands.empty())
                    data(r.id, i.id, DepKind::RAW, Medium::Register, true);
          }
          Access a;
          a.id = i.id;
          a.isCall = true;
          auto eff = pts.callEffects(i.id);
          a.reads = objectsAsTargets(eff.ref);
          a.writes = objectsAsTargets(eff.mod);
          if (opts.syntacticBaseline || !a.reads.empty() || !a.writes.empty()) accesses.push_back(std::move(a));
        }
      }
  }

  // Memory edges between every ordered pair of accesses.
  auto answer = [&](const Access &x, const PtsSet &xs, const Access &y, const PtsSet &ys) {
    if (opts.syntacticBaseline) {
      if (x.isCall || y.isCall) return AliasAnswer::MayAlias;
      return syntacticAlias(m, x.id, y.id);
    }
    AliasAnswer a = PointsTo::alias(xs, ys);
    if (a == AliasAnswer::MayAlias && !x.isCall && !y.isCall &&
        syntacticAlias(m, x.id, y.id) == AliasAnswer::MustAlias)
      a = AliasAnswer::MustAlias;
    return a;
  };
  auto canRead = [&](const Access &a) {
    return opts.syntacticBaseline ? (a.isCall || m.instr(a.id).op == Opcode::Load) : !a.reads.empty();
  };
  auto canWrite = [&](const Access &a) {
    return opts.syntacticBaseline ? (a.isCall || m.instr(a.id).op != Opcode::Load) : !a.writes.empty();
  };
  for (size_t xi = 0; xi < accesses.size(); ++xi) {
    for (size_t yi = 0; yi < accesses.size(); ++yi) {
      const auto &x = accesses[xi];
      const auto &y = accesses[yi];
      if (canWrite(x) && canRead(y)) {
        AliasAnswer a = answer(x, x.writes, y, y.reads);
        if (a != AliasAnswer::NoAlias) data(x.id, y.id, DepKind::RAW, Medium::Memory, a == AliasAnswer::MustAlias);
      }
      if (canWrite(x) && canWrite(y)) {
        AliasAnswer a = answer(x, x.writes, y, y.writes);
        if (a != AliasAnswer::NoAlias) data(x.id, y.id, DepKind::WAW, Medium::Memory, a == AliasAnswer::MustAlias);
      }
      if (canRead(x) && canWrite(y)) {
        AliasAnswer a = answer(x, x.reads, y, y.writes);
        if (a != AliasAnswer::NoAlias) data(x.id, y.id, DepKind::WAR, Medium::Memory, a == AliasAnswer::MustAlias);
      }
    }
  }
  g.index();
  return g;
}

namespace {

DependenceGraph cut(const DependenceGraph &pdg, const std::vector<InstrId> &internal) {
  DependenceGraph g;
  g.internal = internal;
  std::set<InstrId> ext;
  for (size_t e = 0; e < pdg.edges.size(); ++e) {
    const auto &edge = pdg.edges[e];
    bool si = g.isInternal(edge.src), di = g.isInternal(edge.dst);
    if (!si && !di) continue;
    if (!si) ext.insert(edge.src);
    if (!di) ext.insert(edge.dst);
    g.edges.push_back(edge);
    g.origin.push_back(e);
  }
  g.external.assign(ext.begin(), ext.end());
  return g;
}

std::optional<AffineAddress> affineIndex(const FunctionIndex &idx, const LoopStructure &l,
                                         const std::vector<SyntacticIv> &ivs, const Operand &o, int depth) {
  AffineAddress a;
  if (depth > 16) return std::nullopt;
  if (o.isLiteral()) {
    a.constant = o.value;
    return a;
  }
  if (!o.isLocal()) return std::nullopt;
  const ValueDef *d = idx.def(o.name);
  if (!d) return std::nullopt;
  if (d->kind == ValueDef::Kind::Param || !l.containsBlock(d->block)) {
    a.terms[o.name] = 1;
    return a;
  }
  for (const auto &iv : ivs)
    if (iv.phi == o.name) {
      a.iv = o.name;
      a.coef = 1;
      return a;
    }
  const Instruction &i = idx.function().blocks[d->block].insts[d->index];
  auto lhs = [&] { return affineIndex(idx, l, ivs, i.operands[0], depth + 1); };
  auto rhs = [&] { return affineIndex(idx, l, ivs, i.operands[1], depth + 1); };
  auto isConst = [](const AffineAddress &x) { return x.coef == 0 && x.terms.empty(); };
  auto scale = [](AffineAddress x, int64_t k) {
    x.coef = static_cast<int64_t>(static_cast<uint64_t>(x.coef) * static_cast<uint64_t>(k));
    x.constant = static_cast<int64_t>(static_cast<uint64_t>(x.constant) * static_cast<uint64_t>(k));
    for (auto &[n, c] : x.terms) c *= k;
    if (x.coef == 0) x.iv.clear();
    std::erase_if(x.terms, [](const auto &t) { return t.second == 0; });
    return x;
  };
  auto combine = [](AffineAddress x, const AffineAddress &y, int64_t sign) -> std::optional<AffineAddress> {
    if (!x.iv.empty() && !y.iv.empty() && x.iv != y.iv) return std::nullopt;
    if (x.iv.empty()) x.iv = y.iv;
    x.coef += sign * y.coef;
    x.constant += sign * y.constant;
    for (const auto &[n, c] : y.terms) x.terms[n] += sign * c;
    std::erase_if(x.terms, [](const auto &t) { return t.second == 0; });
    if (x.coef == 0) x.iv.clear();
    return x;
  };
  switch (i.op) {
  case Opcode::Add:
  case Opcode::Sub: {
    auto x = lhs(), y = rhs();
    if (!x || !y) return std::nullopt;
    return combine(*x, *y, i.op == Opcode::Add ? 1 : -1);
  }
  case Opcode::Mul: {
    auto x = lhs(), y = rhs();
    if (!x || !y) return std::nullopt;
    if (isConst(*y)) return scale(*x, y->constant);
    if (isConst(*x)) return scale(*y, x->constant);
    return std::nullopt;
  }
  case Opcode::Shl: {
    auto x = lhs();
    if (!x || !i.operands[1].isLiteral() || i.operands[1].value < 0 || i.operands[1].value > 62) return std::nullopt;
    return scale(*x, int64_t{1} << i.operands[1].value);
  }
  default: return std::nullopt;
  }
}

std::optional<AffineAddress> affinePointer(const FunctionIndex &idx, const LoopStructure &l,
                                           const std::vector<SyntacticIv> &ivs, const Operand &p, int depth) {
  if (depth > 16) return std::nullopt;
  if (p.kind == Operand::Kind::Global) {
    AffineAddress a;
    a.base = "@" + p.name;
    return a;
  }
  if (!p.isLocal()) return std::nullopt;
  const ValueDef *d = idx.def(p.name);
  if (!d) return std::nullopt;
  if (d->kind == ValueDef::Kind::Param || !l.containsBlock(d->block)) {
    AffineAddress a;
    a.base = "%" + p.name;
    return a;
  }
  const Instruction &i = idx.function().blocks[d->block].insts[d->index];
  if (i.op != Opcode::Gep) return std::nullopt;
  auto base = affinePointer(idx, l, ivs, i.operands[0], depth + 1);
  auto off = affineIndex(idx, l, ivs, i.operands[1], depth + 1);
  if (!base || !off) return std::nullopt;
  std::string b = base->base;
  base->base.clear();
  if (!base->iv.empty() && !off->iv.empty() && base->iv != off->iv) return std::nullopt;
  AffineAddress r = *off;
  if (r.iv.empty()) r.iv = base->iv;
  r.coef += base->coef;
  r.constant += base->constant;
  for (const auto &[n, c] : base->terms) r.terms[n] += c;
  std::erase_if(r.terms, [](const auto &t) { return t.second == 0; });
  if (r.coef == 0) r.iv.clear();
  r.base = b;
  return r;
}

std::vector<SyntacticIv> syntacticIvsImpl(const FunctionIndex &idx, const LoopStructure &l) {
  std::vector<SyntacticIv> out;
  const auto &header = idx.function().blocks[l.header];
  for (const auto &phi : header.insts) {
    if (!phi.isPhi()) break;
    if (phi.type != Type::I64) continue;
    std::optional<SyntacticIv> iv;
    bool ok = true;
    for (size_t k = 0; k < phi.operands.size() && ok; ++k) {
      int pred = idx.blockIndex(phi.incoming[k]);
      if (pred < 0 || !l.containsBlock(static_cast<uint32_t>(pred))) continue;
      const Operand &arm = phi.operands[k];
      const Instruction *u = arm.isLocal() ? idx.defInstr(arm.name) : nullptr;
      if (!u || (u->op != Opcode::Add && u->op != Opcode::Sub)) {
        ok = false;
        break;
      }
      int64_t step;
      if (u->operands[0].isLocal(phi.result) && u->operands[1].isLiteral()) step = u->operands[1].value;
      else if (u->op == Opcode::Add && u->operands[1].isLocal(phi.result) && u->operands[0].isLiteral())
        step = u->operands[0].value;
      else {
        ok = false;
        break;
      }
      if (u->op == Opcode::Sub) step = -step;
      if (step == 0 || (iv && iv->update != u->id)) {
        ok = false;
        break;
      }
      iv = SyntacticIv{phi.result, phi.id, u->id, step};
    }
    if (ok && iv) out.push_back(*iv);
  }
  return out;
}

} // namespace

std::vector<SyntacticIv> syntacticIvs(const Module &m, const LoopStructure &l) {
  FunctionIndex idx(m.functions[l.func]);
  return syntacticIvsImpl(idx, l);
}

std::optional<AffineAddress> affineAddress(const Module &m, const LoopStructure &l, const Operand &ptr) {
  FunctionIndex idx(m.functions[l.func]);
  return affinePointer(idx, l, syntacticIvsImpl(idx, l), ptr, 0);
}

DependenceGraph functionDg(const Module &m, const DependenceGraph &pdg, uint32_t func) {
  if (func >= m.functions.size()) throw IrError("unknown function #" + std::to_string(func));
  std::vector<InstrId> internal;
  for (const auto &b : m.functions[func].blocks)
    for (const auto &i : b.insts) internal.push_back(i.id);
  std::sort(internal.begin(), internal.end());
  auto g = cut(pdg, internal);
  g.index();
  return g;
}

DependenceGraph loopDg(const Module &m, const DependenceGraph &pdg, const LoopStructure &l) {
  const auto &fn = m.functions[l.func];
  FunctionIndex idx(fn);
  std::vector<InstrId> internal;
  for (uint32_t b : l.blocks)
    for (const auto &i : fn.blocks[b].insts) internal.push_back(i.id);
  std::sort(internal.begin(), internal.end());
  auto g = cut(pdg, internal);

  auto pd = computeDominators(idx, DomDirection::Post);
  auto ivs = syntacticIvsImpl(idx, l);
  std::unordered_map<uint32_t, std::optional<AffineAddress>> addrCache;
  auto addressOf = [&](InstrId id) -> const std::optional<AffineAddress> & {
    auto it = addrCache.find(id.value);
    if (it != addrCache.end()) return it->second;
    const auto &i = m.instr(id);
    std::optional<AffineAddress> a;
    if (i.op == Opcode::Load) a = affinePointer(idx, l, ivs, i.operands[0], 0);
    else if (i.op == Opcode::Store) a = affinePointer(idx, l, ivs, i.operands[1], 0);
    if (a && a->coef == 0) a.reset();
    return addrCache.emplace(id.value, std::move(a)).first->second;
  };
  auto isLatch = [&](const std::string &label) {
    int b = idx.blockIndex(label);
    return b >= 0 && std::find(l.latches.begin(), l.latches.end(), static_cast<uint32_t>(b)) != l.latches.end();
  };

  for (auto &e : g.edges) {
    if (!g.isInternal(e.src) || !g.isInternal(e.dst)) continue;
    Carried c = Carried::Unknown;
    if (e.isRegister()) {
      c = Carried::False;
      const auto &dst = m.instr(e.dst);
      if (dst.isPhi() && m.loc(e.dst).block == l.header) {
        const auto &src = m.instr(e.src);
        for (size_t k = 0; k < dst.operands.size(); ++k)
          if (src.hasResult() && dst.operands[k].isLocal(src.result) && isLatch(dst.incoming[k])) c = Carried::True;
      }
    } else if (e.isControl()) {
      uint32_t a = m.loc(e.src).block;
      uint32_t target = m.loc(e.dst).block;
      int runner = static_cast<int>(idx.succs(a)[static_cast<size_t>(e.label)]);
      bool sawHeader = false;
      c = Carried::False;
      while (runner >= 0 && runner != static_cast<int>(pd.virtualExit())) {
        if (static_cast<uint32_t>(runner) == l.header) sawHeader = true;
        if (static_cast<uint32_t>(runner) == target) break;
        runner = pd.idom[static_cast<size_t>(runner)];
      }
      if (sawHeader) c = Carried::True;
    } else {
      const auto &as = addressOf(e.src);
      const auto &ad = addressOf(e.dst);
      if (as && ad && *as == *ad) c = Carried::False;
    }
    e.carried[l.id] = c;
  }
  g.index();
  return g;
}

void annotateCarried(const Module &m, DependenceGraph &pdg, const LoopInfo &loops) {
  for (const auto &l : loops.loops) {
    auto g = loopDg(m, pdg, l);
    for (size_t k = 0; k < g.edges.size(); ++k) {
      auto it = g.edges[k].carried.find(l.id);
      if (it != g.edges[k].carried.end()) pdg.edges[g.origin[k]].carried[l.id] = it->second;
    }
  }
}

} // namespace pdgkit
