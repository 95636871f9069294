#include "support.hpp"

#include "pdgkit/parallel.hpp"
#include "pdgkit/parser.hpp"
#include "pdgkit/verifier.hpp"

#include <doctest.h>

using namespace pdgkit;
using namespace pdgkit::testing;

namespace {

ParallelPlan planFor(const Module &m, uint32_t loop) {
  ProgramAnalysis pa(m);
  return doallCheck(pa, LoopId(loop));
}

} // namespace

TEST_CASE("environment of a reduction loop") {
  const auto &p = corpusProgram("04_sum_while");
  ProgramAnalysis pa(p.module);
  const auto &l = pa.loops().loop(LoopId(0));
  auto env = computeLiveInOut(p.module, l, &pa.sccDag(l.id));
  CHECK(env.count(SlotRole::Reduction) == 1);
  auto in = static_cast<int64_t>(env.count(SlotRole::LiveIn));
  CHECK(env.cells(4) == in + 4 * (static_cast<int64_t>(env.slots.size()) - in));
  for (size_t k = 0; k < env.slots.size(); ++k) CHECK(env.slots[k].index == k);
  bool liveInsFirst = true;
  for (size_t k = 1; k < env.slots.size(); ++k)
    if (env.slots[k - 1].role != SlotRole::LiveIn && env.slots[k].role == SlotRole::LiveIn) liveInsFirst = false;
  CHECK(liveInsFirst);
  CHECK(env.dump().find("reduction %s") != std::string::npos);

  auto noDag = computeLiveInOut(p.module, l);
  CHECK(noDag.count(SlotRole::Reduction) == 0);
  CHECK(noDag.count(SlotRole::LiveOut) >= 1);
}

TEST_CASE("doall rejections") {
  struct Case {
    const char *program;
    uint32_t loop;
    const char *reason;
  };
  for (auto c : {Case{"27_recurrence", 0, "Sequential"}, Case{"28_prefix_sum", 1, "Sequential"},
                 Case{"26_early_exit", 0, ""}, Case{"30_gcd", 0, ""}, Case{"32_histogram", 0, ""},
                 Case{"08_ne_bound", 0, "while-shaped"}, Case{"16_do_while", 0, ""},
                 Case{"15_nest_sum", 1, ""}}) {
    CAPTURE(c.program);
    const auto &p = corpusProgram(c.program);
    auto plan = planFor(p.module, c.loop);
    CHECK_FALSE(plan.applicable);
    CHECK_FALSE(plan.rejected.empty());
    CHECK(plan.rejected.find(c.reason) != std::string::npos);
    CHECK_THROWS_AS(doallTransform(p.module, plan, 2), IrError);
  }
}

TEST_CASE("doall transform preserves behavior") {
  std::mt19937_64 rng(51);
  size_t loops = 0;
  for (const auto &p : corpus()) {
    ProgramAnalysis pa(p.module);
    for (const auto &l : pa.loops().loops) {
      auto plan = doallCheck(pa, l.id);
      if (!plan.applicable) continue;
      ++loops;
      CAPTURE(p.name);
      CAPTURE(l.id.value);
      for (int64_t n : {1, 2, 3, 4, 8}) {
        CAPTURE(n);
        Module t = doallTransform(p.module, plan, n);
        REQUIRE(verifyModule(t).empty());
        CHECK(parseModule(printModule(t)) == t);
        for (const auto &in : p.allInputs(8, rng())) {
          auto ref = runProgram(p.module, in);
          CHECK(sameBehavior(runProgram(t, in), ref));
          for (uint64_t seed = 1; seed <= 4; ++seed) {
            CHECK(sameBehavior(runParallel(t, in, ParallelMode::SequentialAnyOrder, seed), ref));
          }
          CHECK(sameBehavior(runParallel(t, in, ParallelMode::Concurrent, 7), ref));
        }
      }
    }
  }
  CHECK(loops >= 15);
}

TEST_CASE("loops touching only globals get a one-cell environment") {
  const auto &p = corpusProgram("12_chain_load");
  auto plan = planFor(p.module, 0);
  REQUIRE(plan.applicable);
  CHECK(plan.env.slots.empty());
  Module t = doallTransform(p.module, plan, 3);
  for (const auto &in : p.allInputs(5)) CHECK(sameBehavior(runProgram(t, in), runProgram(p.module, in)));
}

TEST_CASE("more tasks than iterations") {
  const auto &p = corpusProgram("10_min_reduction");
  auto plan = planFor(p.module, 0);
  REQUIRE(plan.applicable);
  REQUIRE(plan.governing);
  REQUIRE(plan.governing->governing->tripCount);
  int64_t n = *plan.governing->governing->tripCount + 5;
  Module t = doallTransform(p.module, plan, n);
  for (const auto &in : p.allInputs(5))
    CHECK(sameBehavior(runParallel(t, in, ParallelMode::SequentialAnyOrder, 3), runProgram(p.module, in)));
}

TEST_CASE("stale plans are rejected") {
  const auto &p = corpusProgram("04_sum_while");
  auto plan = planFor(p.module, 0);
  REQUIRE(plan.applicable);
  CHECK_THROWS_AS(doallTransform(corpusProgram("05_countdown").module, plan, 2), IrError);
  CHECK_THROWS_AS(doallTransform(corpusProgram("01_straight").module, plan, 2), IrError);
  CHECK_THROWS_AS(doallTransform(p.module, plan, 0), IrError);
}

TEST_CASE("sameBehavior ignores steps only") {
  ExecResult a, b;
  a.output = {1, 2};
  b.output = {1, 2};
  a.steps = 10;
  b.steps = 99;
  CHECK(sameBehavior(a, b));
  b.exitValue = 1;
  CHECK_FALSE(sameBehavior(a, b));
  b.exitValue = a.exitValue;
  b.trap = Trap::DivByZero;
  CHECK_FALSE(sameBehavior(a, b));
}
