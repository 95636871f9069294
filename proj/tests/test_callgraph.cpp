#include "support.hpp"

#include "pdgkit/callgraph.hpp"

#include <doctest.h>

#include <algorithm>

using namespace pdgkit;
using namespace pdgkit::testing;

namespace {

CallGraph graphOf(const Module &m) { return CallGraph::build(m, PointsTo::compute(m)); }

std::set<std::string> names(const Module &m, const std::set<uint32_t> &fs) {
  std::set<std::string> out;
  for (uint32_t f : fs) out.insert(m.functions[f].name);
  return out;
}

/// Module of n functions with random direct calls plus one icall through a
/// phi over random funcptrs.
std::string randomCallModule(std::mt19937_64 &rng, size_t n) {
  std::string out;
  for (size_t f = 0; f < n; ++f) {
    out += "func @f" + std::to_string(f) + "(%x: i64) -> i64 {\nentry:\n";
    std::string acc = "%x";
    int k = 0;
    for (size_t g = 0; g < n; ++g)
      if (rng() % 5 == 0) {
        std::string r = "%c" + std::to_string(k++);
        out += "  " + r + " = call @f" + std::to_string(g) + "(" + acc + ")\n";
        acc = r;
      }
    if (rng() % 3 == 0) {
      size_t a = rng() % n, b = rng() % n;
      out += "  %pa = funcptr @f" + std::to_string(a) + "\n  %pb = funcptr @f" + std::to_string(b) +
             "\n  %z = slt %x, 0\n  %t = select ptr %z, %pa, %pb\n  %i = icall %t(" + acc + ")\n";
      acc = "%i";
    }
    out += "  ret " + acc + "\n}\n\n";
  }
  return out;
}

} // namespace

TEST_CASE("direct and indirect edges") {
  const auto &p = corpusProgram("18_icall_table");
  auto cg = graphOf(p.module);
  uint32_t mainF = p.module.functionIndex("main");
  for (const char *t : {"inc", "dbl", "neg"}) {
    CHECK(cg.hasEdge(mainF, p.module.functionIndex(t)));
    for (const auto &e : cg.edges())
      if (e.callee == static_cast<uint32_t>(p.module.functionIndex(t))) CHECK_FALSE(e.must);
  }
  CHECK(cg.unresolvedSites().empty());

  const auto &q = corpusProgram("22_dead_helpers");
  auto qg = graphOf(q.module);
  CHECK(qg.dump(q.module) == "@a -> @b must via #0\n@u1 -> @u2 must via #8\n@u2 -> @u1 must via #11\n"
                             "@main -> @a must via #15\n");
}

TEST_CASE("icall edges respect arity") {
  Module m = parseChecked(R"(func @one(%a: i64) -> i64 {
entry:
  ret %a
}

func @two(%a: i64, %b: i64) -> i64 {
entry:
  ret %b
}

func @main(%x: i64) -> i64 {
entry:
  %p = funcptr @one
  %q = funcptr @two
  %c = slt %x, 0
  %f = select ptr %c, %p, %q
  %r = icall %f(%x)
  ret %r
}
)");
  auto cg = graphOf(m);
  CHECK(cg.hasEdge(2, 0));
  CHECK_FALSE(cg.hasEdge(2, 1));
}

TEST_CASE("multiple sites share one edge") {
  Module m = parseChecked(R"(func @g() -> i64 {
entry:
  ret 1
}

func @main() -> i64 {
entry:
  %a = call @g()
  %b = call @g()
  %s = add %a, %b
  ret %s
}
)");
  auto cg = graphOf(m);
  REQUIRE(cg.edges().size() == 1);
  CHECK(cg.edges()[0].sites.size() == 2);
  CHECK(cg.edges()[0].must);
  CHECK(cg.dump(m) == "@main -> @g must via #1,#2\n");
}

TEST_CASE("islands and reachability") {
  const auto &p = corpusProgram("22_dead_helpers");
  auto cg = graphOf(p.module);
  auto isl = islands(p.module, cg);
  REQUIRE(isl.size() == 3);
  CHECK(names(p.module, {isl[0].begin(), isl[0].end()}) == std::set<std::string>{"a", "b", "main"});
  CHECK(names(p.module, {isl[1].begin(), isl[1].end()}) == std::set<std::string>{"u1", "u2"});
  CHECK(names(p.module, {isl[2].begin(), isl[2].end()}) == std::set<std::string>{"u3"});
  auto live = reachableFunctions(cg, {static_cast<uint32_t>(p.module.functionIndex("main"))});
  CHECK(names(p.module, live) == std::set<std::string>{"a", "b", "main"});

  const auto &q = corpusProgram("23_addr_taken");
  auto taken = addressTakenFunctions(q.module);
  CHECK(names(q.module, taken) == std::set<std::string>{"hidden", "plain"});
}

TEST_CASE("random call graphs: islands match union-find") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    size_t n = 1 + rng() % 10;
    Module m = parseChecked(randomCallModule(rng, n));
    auto cg = graphOf(m);
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    for (const auto &e : cg.edges()) pairs.push_back({e.caller, e.callee});
    auto classes = unionFindComponents(n, pairs);
    std::vector<size_t> comp(n);
    for (size_t c = 0; c < classes.size(); ++c)
      for (uint32_t f : classes[c]) comp[f] = c;
    auto isl = islands(m, cg);
    size_t total = 0;
    for (const auto &island : isl) {
      total += island.size();
      for (uint32_t f : island) CHECK(comp[f] == comp[island.front()]);
      CHECK(std::is_sorted(island.begin(), island.end(),
                           [&](uint32_t a, uint32_t b) { return m.functions[a].name < m.functions[b].name; }));
    }
    CHECK(total == n);
    CHECK(isl.size() == classes.size());
    for (size_t i = 1; i < isl.size(); ++i)
      CHECK(m.functions[isl[i - 1].front()].name < m.functions[isl[i].front()].name);
  }
}

TEST_CASE("observed calls are static edges") {
  for (const auto &p : corpus()) {
    CAPTURE(p.name);
    auto cg = graphOf(p.module);
    RunOptions o;
    o.recordCalls = true;
    for (const auto &in : p.allInputs(10))
      for (const auto &c : execute(p.module, in, o).calls) {
        uint32_t caller = p.module.loc(c.site).func;
        REQUIRE(cg.hasEdge(caller, c.callee.value));
        for (const auto &e : cg.edges())
          if (e.caller == caller && e.callee == c.callee.value)
            CHECK(std::find(e.sites.begin(), e.sites.end(), c.site) != e.sites.end());
      }
  }
}

TEST_CASE("dot output") {
  const auto &p = corpusProgram("23_addr_taken");
  std::string dot = graphOf(p.module).dot(p.module);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("style=dashed") != std::string::npos);
  CHECK(dot.find("label=\"@orphan\"") != std::string::npos);
  uint32_t orphan = p.module.functionIndex("orphan"), plain = p.module.functionIndex("plain");
  CHECK(dot.find("f" + std::to_string(orphan) + " -> f" + std::to_string(plain)) != std::string::npos);
}
