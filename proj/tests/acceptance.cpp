#include "support.hpp"

#include "pdgkit/callgraph.hpp"
#include "pdgkit/dataflow.hpp"
#include "pdgkit/graph.hpp"
#include "pdgkit/loop_transforms.hpp"
#include "pdgkit/parallel.hpp"
#include "pdgkit/parser.hpp"
#include "pdgkit/transforms.hpp"
#include "pdgkit/verifier.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

using namespace pdgkit;
using namespace pdgkit::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void fail(const std::string &why) {
    pass = false;
    if (failures.size() < 10) failures.push_back(why);
  }
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 1) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

DependenceGraph annotatedPdg(const Module &m, bool baseline) {
  auto pts = PointsTo::compute(m);
  PdgOptions o;
  o.syntacticBaseline = baseline;
  auto g = buildPdg(m, pts, o);
  annotateCarried(m, g, detectLoops(m));
  return g;
}

Outcome pdgSoundness() {
  Outcome o;
  auto t0 = Clock::now();
  size_t deps = 0, runs = 0;
  for (const auto &p : corpus()) {
    auto g = annotatedPdg(p.module, false);
    std::map<std::tuple<uint32_t, uint32_t, DepKind>, const DepEdge *> edges;
    for (const auto &e : g.edges)
      if (e.isMemory()) edges[{e.src.value, e.dst.value, e.kind}] = &e;
    for (const auto &in : p.allInputs(20)) {
      ++runs;
      for (const auto &d : traceDependences(p.module, in)) {
        ++deps;
        auto it = edges.find({d.src.value, d.dst.value, d.kind});
        if (it == edges.end()) {
          o.fail(p.name + ": no static edge for #" + std::to_string(d.src.value) + " -> #" +
                 std::to_string(d.dst.value));
          continue;
        }
        for (LoopId l : d.carriedLoops)
          if (it->second->carriedFor(l) == Carried::False)
            o.fail(p.name + ": carried dependence marked not carried for L" + std::to_string(l.value));
      }
    }
  }
  double secs = secondsSince(t0);
  if (secs >= 60.0) o.fail("took " + fixed(secs) + " s");
  o.detail = std::to_string(deps) + " dynamic dependences from " + std::to_string(runs) + " runs, all covered, " +
             fixed(secs) + " s";
  return o;
}

Outcome invariantSuperset() {
  Outcome o;
  size_t loops = 0, larger = 0, checkedValues = 0;
  for (const auto &p : corpus()) {
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      ++loops;
      const auto &ours = pa.invariants(l.id);
      auto naive = naiveInvariantsOfLoop(p.module, pa.loops(), l, pa.pointsTo());
      if (!std::includes(ours.begin(), ours.end(), naive.begin(), naive.end()))
        o.fail(p.name + " L" + std::to_string(l.id.value) + ": naive invariant missing");
      if (ours.size() > naive.size()) ++larger;
      if (ours.empty()) continue;
      for (const auto &in : p.allInputs(10)) {
        std::map<std::pair<uint32_t, uint64_t>, std::set<std::pair<uint32_t, int64_t>>> seen;
        RunOptions ro;
        ro.observer = [&](const Instruction &i, const RtValue &v, std::span<const LoopActivation> stack) {
          if (!ours.count(i.id) || !i.hasResult()) return;
          for (const auto &a : stack)
            if (a.loop == l.id) seen[{i.id.value, a.invocation}].insert({v.ref, v.num});
        };
        execute(p.module, in, ro);
        for (const auto &[key, vals] : seen) {
          ++checkedValues;
          if (vals.size() != 1)
            o.fail(p.name + ": #" + std::to_string(key.first) + " takes " + std::to_string(vals.size()) +
                   " values in one invocation");
        }
      }
    }
  }
  if (larger < 3) o.fail("only " + std::to_string(larger) + " loops with strictly more invariants");
  o.detail = std::to_string(loops) + " loops, superset everywhere, strictly larger on " + std::to_string(larger) +
             ", " + std::to_string(checkedValues) + " (invariant, invocation) pairs single-valued";
  return o;
}

Outcome governingIvs() {
  Outcome o;
  size_t whileLoops = 0, ours = 0, baseline = 0;
  for (const auto &p : corpus()) {
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      const auto &ivs = pa.ivs(l.id);
      if (!ivs.governing) continue;
      const auto &iv = ivs.basic[*ivs.governing];
      if (!iv.governing->testsPhi || !iv.governing->tripCount) continue;
      ++whileLoops;
      if (doWhileGoverningIv(p.module, l, ivs)) ++baseline;
      bool exact = true;
      for (const auto &in : p.allInputs(10)) {
        std::map<uint64_t, int64_t> headerRuns;
        RunOptions ro;
        ro.observer = [&](const Instruction &i, const RtValue &, std::span<const LoopActivation> stack) {
          if (i.id == iv.phi && !stack.empty() && stack.back().loop == l.id) ++headerRuns[stack.back().invocation];
        };
        execute(p.module, in, ro);
        for (auto [inv, n] : headerRuns)
          if (n - 1 != *iv.governing->tripCount) {
            exact = false;
            o.fail(p.name + " L" + std::to_string(l.id.value) + ": trip " + std::to_string(*iv.governing->tripCount) +
                   " but ran " + std::to_string(n - 1));
          }
      }
      ours += exact;
    }
  }
  if (whileLoops < 10) o.fail("only " + std::to_string(whileLoops) + " while-shaped loops");
  if (baseline != 0) o.fail("do-while detector found " + std::to_string(baseline));
  if (ours < 10) o.fail("only " + std::to_string(ours) + " exact trip counts");
  o.detail = std::to_string(whileLoops) + " while loops: do-while detector " + std::to_string(baseline) + ", ours " +
             std::to_string(ours) + " with exact trip counts";
  return o;
}

Outcome pointsToPrecision() {
  Outcome o;
  size_t programs = 0, ours = 0, base = 0;
  for (const auto &p : corpus()) {
    size_t objects = p.module.globals.size();
    for (const auto &f : p.module.functions)
      for (const auto &b : f.blocks)
        for (const auto &i : b.insts) objects += i.op == Opcode::Alloca;
    if (objects < 2) continue;
    ++programs;
    size_t a = annotatedPdg(p.module, false).countMemoryEdges(true);
    size_t b = annotatedPdg(p.module, true).countMemoryEdges(true);
    ours += a;
    base += b;
    if (a >= b) o.fail(p.name + ": " + std::to_string(a) + " may edges vs baseline " + std::to_string(b));
  }
  o.detail = std::to_string(programs) + " programs with >= 2 objects: " + std::to_string(ours) +
             " may-memory edges vs " + std::to_string(base) + " baseline";
  return o;
}

const char *kWorkReduction = R"(global @D: i64[32]

func @work(%d: i64) -> i64 {
entry:
  %sq = mul %d, %d
  %r = add %sq, 3
  ret %r
}

func @main(%seed: i64) -> i64 {
entry:
  br init
init:
  %k = phi [entry: 0], [init: %k.next]
  %pk = gep @D, %k
  %v = add %seed, %k
  store %v, %pk
  %k.next = add %k, 1
  %more = slt %k.next, 32
  brcond %more, init, head
head:
  %i = phi [init: 0], [body: %i.next]
  %s = phi [init: 0], [body: %s.next]
  %c = slt %i, 32
  brcond %c, body, exit
body:
  %p = gep @D, %i
  %d = load %p
  %w = call @work(%d)
  %s.next = add %s, %w
  %i.next = add %i, 1
  br head
exit:
  print %s
  ret %s
}
)";

Outcome sccdags() {
  Outcome o;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    size_t n = 1 + rng() % 30;
    auto succs = randomDigraph(rng, n, std::uniform_real_distribution<double>(0.02, 0.3)(rng));
    DependenceGraph g;
    for (uint32_t v = 0; v < n; ++v) g.internal.push_back(InstrId(v));
    for (uint32_t u = 0; u < n; ++u)
      for (uint32_t v : succs[u]) {
        DepEdge e;
        e.src = InstrId(u);
        e.dst = InstrId(v);
        g.edges.push_back(e);
      }
    g.index();
    auto dag = buildSccDag(g, LoopId(0));
    std::vector<std::vector<uint32_t>> got;
    for (const auto &s : dag.sccs) {
      got.emplace_back();
      for (InstrId i : s.members) got.back().push_back(i.value);
    }
    if (got != bruteForceScc(succs)) o.fail("random graph " + std::to_string(trial) + ": partition differs");
    if (!dag.acyclic()) o.fail("random graph " + std::to_string(trial) + ": cyclic");
  }
  size_t loopDags = 0;
  for (const auto &p : corpus()) {
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      ++loopDags;
      if (!pa.sccDag(l.id).acyclic()) o.fail(p.name + " L" + std::to_string(l.id.value) + ": cyclic");
    }
  }
  Module m = parseChecked(kWorkReduction);
  ProgramAnalysis pa(m);
  bool reducible = false;
  for (const auto &s : pa.sccDag(LoopId(1)).sccs)
    if (s.kind == SccKind::Reducible && s.reduction && m.instr(s.reduction->phi).result == "s") reducible = true;
  if (!reducible) o.fail("s += work(d) is not Reducible");
  o.detail = "200 random graphs match brute force, " + std::to_string(loopDags) +
             " corpus sccdags acyclic, s += work(d) Reducible";
  return o;
}

Outcome doall() {
  Outcome o;
  struct Job {
    const CorpusProgram *p;
    ParallelPlan plan;
  };
  std::vector<Job> jobs;
  for (const auto &p : corpus()) {
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      auto plan = doallCheck(pa, l.id);
      if (plan.applicable) jobs.push_back({&p, std::move(plan)});
    }
  }
  auto t0 = Clock::now();
  auto runJob = [](const Job &job) {
    std::vector<std::string> errors;
    size_t runs = 0;
    const auto &p = *job.p;
    std::string where = p.name + " L" + std::to_string(job.plan.loop.value);
    for (int64_t n : {1, 2, 3, 4, 8}) {
      Module t = doallTransform(p.module, job.plan, n);
      auto inputs = p.randomInputs(100, 1000 + static_cast<uint64_t>(n));
      for (const auto &in : inputs) {
        auto ref = runProgram(p.module, in);
        if (!sameBehavior(runProgram(t, in), ref)) errors.push_back(where + " N=" + std::to_string(n) + " inline");
        for (uint64_t seed = 1; seed <= 50; ++seed) {
          ++runs;
          if (!sameBehavior(runParallel(t, in, ParallelMode::SequentialAnyOrder, seed), ref))
            errors.push_back(where + " N=" + std::to_string(n) + " order seed " + std::to_string(seed));
        }
        if (!sameBehavior(runParallel(t, in, ParallelMode::Concurrent, 1), ref))
          errors.push_back(where + " N=" + std::to_string(n) + " concurrent");
      }
    }
    return std::make_pair(runs, errors);
  };
  std::vector<std::future<std::pair<size_t, std::vector<std::string>>>> futures;
  for (const auto &job : jobs) futures.push_back(std::async(std::launch::async, runJob, std::cref(job)));
  size_t runs = 0;
  for (auto &f : futures) {
    auto [n, errors] = f.get();
    runs += n;
    for (const auto &e : errors) o.fail(e);
  }
  if (jobs.size() < 10) o.fail("only " + std::to_string(jobs.size()) + " parallelizable loops");
  o.detail = std::to_string(jobs.size()) + " loops x N in {1,2,3,4,8} x 100 inputs x 50 task orders (" +
             std::to_string(runs) + " runs) match, " + fixed(secondsSince(t0)) + " s";
  return o;
}

Outcome licmAndDfe() {
  Outcome o;
  size_t hoisting = 0, removedTotal = 0;
  for (const auto &p : corpus()) {
    auto inputs = p.allInputs(20);
    auto r = licm(p.module);
    uint64_t before = 0, after = 0;
    for (const auto &in : p.inputs) {
      before += runProgram(p.module, in).steps;
      after += runProgram(r.module, in).steps;
    }
    for (const auto &in : inputs)
      if (!sameBehavior(runProgram(r.module, in), runProgram(p.module, in))) o.fail(p.name + ": licm changed behavior");
    if (r.total() > 0) {
      ++hoisting;
      if (after >= before)
        o.fail(p.name + ": licm did not reduce steps (" + std::to_string(before) + " -> " + std::to_string(after) + ")");
    }

    auto d = deadFunctionElimination(p.module);
    removedTotal += d.removed.size();
    if (d.module.numInstructions() > p.module.numInstructions()) o.fail(p.name + ": dfe grew the program");
    RunOptions ro;
    ro.recordCalls = true;
    for (const auto &in : inputs) {
      auto rep = execute(p.module, in, ro);
      for (const auto &c : rep.calls) {
        const auto &name = p.module.functions[c.callee.value].name;
        if (std::find(d.removed.begin(), d.removed.end(), name) != d.removed.end())
          o.fail(p.name + ": dfe removed reached @" + name);
      }
      if (!(runProgram(d.module, in) == runProgram(p.module, in))) o.fail(p.name + ": dfe changed the result");
    }
  }
  o.detail = "licm hoisted in " + std::to_string(hoisting) + " programs with fewer steps each, behavior preserved; dfe removed " +
             std::to_string(removedTotal) + " functions, none reached, results identical";
  return o;
}

Outcome dataflow() {
  Outcome o;
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    Module m = parseChecked(randomCfgText(rng, 1 + rng() % 12, rng() % 2 == 0));
    const auto &f = m.functions[0];
    auto problem = randomProblem(rng, f, 1 + rng() % 32);
    auto oracle = chaoticIteration(problem, f);
    if (!(solve(problem, f) == oracle)) o.fail("problem " + std::to_string(trial) + ": differs from chaotic iteration");
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      SolveOptions so;
      so.randomPrioritySeed = seed + 100 * static_cast<uint64_t>(trial);
      if (!(solve(problem, f, so) == oracle))
        o.fail("problem " + std::to_string(trial) + ": differs under priority seed " + std::to_string(seed));
    }
  }
  o.detail = "200 random problems equal chaotic iteration, 10 random priorities each";
  return o;
}

Outcome callGraph() {
  Outcome o;
  size_t pairs = 0;
  for (const auto &p : corpus()) {
    auto cg = CallGraph::build(p.module, PointsTo::compute(p.module));
    RunOptions ro;
    ro.recordCalls = true;
    for (const auto &in : p.allInputs(20))
      for (const auto &c : execute(p.module, in, ro).calls) {
        ++pairs;
        uint32_t caller = p.module.loc(c.site).func;
        if (!cg.hasEdge(caller, c.callee.value))
          o.fail(p.name + ": @" + p.module.functions[caller].name + " -> @" + p.module.functions[c.callee.value].name +
                 " missing");
      }
  }
  o.detail = std::to_string(pairs) + " observed calls, all static edges";
  return o;
}

std::string captureCli(const std::string &args) {
  std::string cmd = std::string(PDGKIT_CLI) + " " + args + " 2>&1";
  std::string out;
  FILE *pipe = popen(cmd.c_str(), "r");
  if (!pipe) return "<popen failed>";
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  int status = pclose(pipe);
  return out + "\nstatus=" + std::to_string(status);
}

Outcome printingAndDeterminism() {
  Outcome o;
  size_t modules = 0;
  auto fixpoint = [&](const Module &m, const std::string &what) {
    ++modules;
    std::string once = printModule(m);
    Module back = parseModule(once);
    if (printModule(back) != once) o.fail(what + ": print(parse(print)) differs");
    if (!(back == m)) o.fail(what + ": parse(print) differs structurally");
  };
  for (const auto &p : corpus()) {
    fixpoint(p.module, p.name);
    fixpoint(licm(p.module).module, p.name + " after licm");
    fixpoint(deadFunctionElimination(p.module).module, p.name + " after dfe");
    fixpoint(embedProfile(p.module, collectProfile(p.module, p.inputs)), p.name + " with profile");
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      auto plan = doallCheck(pa, l.id);
      if (plan.applicable) fixpoint(doallTransform(p.module, plan, 3), p.name + " after doall");
    }
  }
  std::mt19937_64 rng(10);
  for (int k = 0; k < 200; ++k) fixpoint(parseChecked(randomCfgText(rng, 1 + rng() % 15, rng() % 2)), "random cfg");

  size_t commands = 0;
  for (const char *name : {"04_sum_while", "18_icall_table", "33_sum_and_max", "37_memo_table"}) {
    std::string src = std::string(PDGKIT_CORPUS_DIR) + "/" + name + ".ir";
    std::string in = corpusProgram(name).inputs.front().empty() ? "" : [&] {
      std::string s = " --args";
      for (int64_t v : corpusProgram(name).inputs.front()) s += " " + std::to_string(v);
      return s;
    }();
    for (const std::string cmd :
         {"verify " + src, "pdg " + src, "pdg --embed " + src, "pdg --baseline " + src, "sccdag " + src + " --loop 0",
          "callgraph " + src, "pts " + src, "report " + src, "licm " + src, "dfe " + src,
          "dataflow " + src + " --function main --problem liveness", "prof " + src + in,
          "doall " + src + " --loop 0 --tasks 3", "--seed 3 run " + src + in + " --mode seq"}) {
      ++commands;
      if (captureCli(cmd) != captureCli(cmd)) o.fail("not byte-deterministic: " + cmd);
    }
  }
  o.detail = std::to_string(modules) + " modules print/parse to a fixpoint, " + std::to_string(commands) +
             " commands byte-identical across runs";
  return o;
}

const std::array<std::pair<const char *, std::function<Outcome()>>, 10> kCriteria{{
    {"pdg soundness", pdgSoundness},
    {"invariant superset", invariantSuperset},
    {"governing iv", governingIvs},
    {"points-to precision", pointsToPrecision},
    {"sccdag", sccdags},
    {"doall", doall},
    {"licm and dead functions", licmAndDfe},
    {"dataflow engine", dataflow},
    {"call graph completeness", callGraph},
    {"printing and determinism", printingAndDeterminism},
}};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance checks; one line per criterion"};
  int only = 0;
  app.add_option("--criterion", only, "Run only this criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (size_t k = 0; k < kCriteria.size(); ++k) {
    if (only && static_cast<size_t>(only) != k + 1) continue;
    Outcome r;
    try {
      r = kCriteria[k].second();
    } catch (const std::exception &e) {
      r.fail(std::string("exception: ") + e.what());
    }
    all &= r.pass;
    std::cout << "criterion " << k + 1 << ": " << (r.pass ? "PASS" : "FAIL") << " [" << kCriteria[k].first << "] "
              << r.detail << "\n";
    for (const auto &f : r.failures) std::cout << "    " << f << "\n";
  }
  return all ? 0 : 1;
}
