#include "pdgkit/dataflow.hpp"

#include "pdgkit/dominators.hpp"
#include "pdgkit/loops.hpp"

#include <random>
#include <set>
#include <sstream>

namespace pdgkit {

std::vector<const Instruction *> linearize(const Function &f) {
  std::vector<const Instruction *> out;
  for (const auto &b : f.blocks)
    for (const auto &i : b.insts) out.push_back(&i);
  return out;
}

void validateProblem(const DataFlowProblem &p, const Function &f) {
  size_t n = f.instructionCount();
  if (p.gen.size() != n || p.kill.size() != n) throw IrError("data-flow problem does not match function size");
  if (p.boundary.size() != p.universe) throw IrError("boundary set has the wrong universe size");
  for (size_t k = 0; k < n; ++k) {
    if (p.gen[k].size() != p.universe || p.kill[k].size() != p.universe)
      throw IrError("gen/kill set has the wrong universe size");
    if (p.gen[k].intersects(p.kill[k])) throw IrError("gen and kill overlap at position " + std::to_string(k));
  }
}

DataFlowResult solve(const DataFlowProblem &p, const Function &f, const SolveOptions &opts) {
  validateProblem(p, f);
  FunctionIndex idx(f);
  const size_t nb = f.blocks.size();
  const bool fwd = p.direction == FlowDirection::Forward;

  std::vector<size_t> first(nb + 1, 0);
  for (size_t b = 0; b < nb; ++b) first[b + 1] = first[b] + f.blocks[b].insts.size();

  // Compose each block's transfer once: out = G ∪ (in − K).
  std::vector<BitSet> G(nb, BitSet(p.universe)), K(nb, BitSet(p.universe));
  for (size_t b = 0; b < nb; ++b) {
    size_t n = f.blocks[b].insts.size();
    for (size_t s = 0; s < n; ++s) {
      size_t k = first[b] + (fwd ? s : n - 1 - s);
      G[b] -= p.kill[k];
      G[b] |= p.gen[k];
      K[b] |= p.kill[k];
    }
  }

  // Priority: deeper loops first, then RPO (forward) or post-order (backward).
  auto dom = computeDominators(idx, DomDirection::Forward);
  auto loops = detectLoops(idx, dom, 0);
  std::vector<int> depth(nb, 0);
  for (const auto &l : loops)
    for (uint32_t b : l.blocks) ++depth[b];
  std::vector<std::pair<int64_t, int64_t>> prio(nb);
  std::mt19937_64 rng(opts.randomPrioritySeed.value_or(0));
  for (uint32_t b = 0; b < nb; ++b) {
    int order = idx.reachable(b) ? idx.rpoIndex(b) : static_cast<int>(nb + b);
    if (!fwd) order = -order;
    prio[b] = opts.randomPrioritySeed ? std::pair<int64_t, int64_t>{static_cast<int64_t>(rng() >> 1), b}
                                      : std::pair<int64_t, int64_t>{-depth[b], order};
  }

  const BitSet full = ~BitSet(p.universe);
  const BitSet init = p.meet == Meet::Union ? BitSet(p.universe) : full;
  // Block-level "before" (meet side) and "after" sets in flow direction.
  std::vector<BitSet> before(nb, init), after(nb, init);
  auto isBoundary = [&](uint32_t b) { return fwd ? b == 0 : idx.succs(b).empty(); };
  for (uint32_t b = 0; b < nb; ++b) {
    if (isBoundary(b)) before[b] = p.boundary;
    after[b] = G[b] | (before[b] - K[b]);
  }

  std::set<std::pair<std::pair<int64_t, int64_t>, uint32_t>> work;
  for (uint32_t b = 0; b < nb; ++b) work.insert({prio[b], b});
  DataFlowResult r;
  while (!work.empty()) {
    uint32_t b = work.begin()->second;
    work.erase(work.begin());
    ++r.blockVisits;
    const auto &flowPreds = fwd ? idx.preds(b) : idx.succs(b);
    BitSet meet = init;
    if (isBoundary(b)) {
      meet = p.boundary;
    } else {
      for (size_t q = 0; q < flowPreds.size(); ++q) {
        if (q == 0) meet = after[flowPreds[q]];
        else if (p.meet == Meet::Union) meet |= after[flowPreds[q]];
        else meet &= after[flowPreds[q]];
      }
    }
    before[b] = meet;
    BitSet next = G[b] | (meet - K[b]);
    if (next != after[b]) {
      after[b] = std::move(next);
      for (uint32_t s : fwd ? idx.succs(b) : idx.preds(b)) work.insert({prio[s], s});
    }
  }

  // Expand to instruction granularity.
  size_t n = first[nb];
  r.in.assign(n, BitSet(p.universe));
  r.out.assign(n, BitSet(p.universe));
  for (size_t b = 0; b < nb; ++b) {
    size_t cnt = f.blocks[b].insts.size();
    BitSet cur = before[b];
    for (size_t s = 0; s < cnt; ++s) {
      size_t k = first[b] + (fwd ? s : cnt - 1 - s);
      BitSet next = p.gen[k] | (cur - p.kill[k]);
      if (fwd) {
        r.in[k] = cur;
        r.out[k] = next;
      } else {
        r.out[k] = cur;
        r.in[k] = next;
      }
      cur = std::move(next);
    }
  }
  return r;
}

DataFlowProblem livenessProblem(const Function &f) {
  FunctionIndex idx(f);
  auto insts = linearize(f);
  const size_t P = f.params.size();
  DataFlowProblem p;
  p.direction = FlowDirection::Backward;
  p.meet = Meet::Union;
  p.universe = P + insts.size();
  p.gen.assign(insts.size(), BitSet(p.universe));
  p.kill.assign(insts.size(), BitSet(p.universe));
  p.boundary = BitSet(p.universe);

  std::vector<size_t> first(f.blocks.size(), 0);
  for (size_t b = 1; b < f.blocks.size(); ++b) first[b] = first[b - 1] + f.blocks[b - 1].insts.size();
  auto valueIndex = [&](const std::string &name) -> std::optional<size_t> {
    const ValueDef *d = idx.def(name);
    if (!d) return std::nullopt;
    if (d->kind == ValueDef::Kind::Param) return d->param;
    return P + first[d->block] + d->index;
  };
  for (size_t k = 0; k < insts.size(); ++k) {
    const auto &i = *insts[k];
    if (i.hasResult()) p.kill[k].set(P + k);
    if (i.isPhi()) {
      for (size_t a = 0; a < i.operands.size(); ++a) {
        if (!i.operands[a].isLocal()) continue;
        int pred = idx.blockIndex(i.incoming[a]);
        auto v = valueIndex(i.operands[a].name);
        if (pred < 0 || !v) continue;
        size_t term = first[static_cast<size_t>(pred)] + f.blocks[static_cast<size_t>(pred)].insts.size() - 1;
        p.gen[term].set(*v);
      }
      continue;
    }
    for (const Operand *o : i.valueOperands())
      if (o->isLocal())
        if (auto v = valueIndex(o->name)) p.gen[k].set(*v);
  }
  for (size_t k = 0; k < insts.size(); ++k) p.kill[k] -= p.gen[k];
  return p;
}

DataFlowResult liveness(const Function &f) { return solve(livenessProblem(f), f); }

DataFlowProblem reachingDefinitionsProblem(const Function &f) {
  auto insts = linearize(f);
  DataFlowProblem p;
  p.direction = FlowDirection::Forward;
  p.meet = Meet::Union;
  p.universe = insts.size();
  p.gen.assign(insts.size(), BitSet(p.universe));
  p.kill.assign(insts.size(), BitSet(p.universe));
  p.boundary = BitSet(p.universe);
  for (size_t k = 0; k < insts.size(); ++k)
    if (insts[k]->hasResult()) p.gen[k].set(k);
  return p;
}

DataFlowResult reachingDefinitions(const Function &f) { return solve(reachingDefinitionsProblem(f), f); }

std::string dumpResult(const Function &f, const DataFlowResult &r) {
  std::ostringstream os;
  auto insts = linearize(f);
  auto set = [&](const BitSet &s) {
    os << '{';
    bool firstElem = true;
    for (size_t b = s.find_first(); b != BitSet::npos; b = s.find_next(b)) {
      os << (firstElem ? "" : ", ") << b;
      firstElem = false;
    }
    os << '}';
  };
  for (size_t k = 0; k < insts.size(); ++k) {
    os << "IN[#" << insts[k]->id.value << "] = ";
    set(r.in[k]);
    os << "\nOUT[#" << insts[k]->id.value << "] = ";
    set(r.out[k]);
    os << '\n';
  }
  return os.str();
}

} // namespace pdgkit
