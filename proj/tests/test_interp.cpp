#include "support.hpp"

#include "pdgkit/loops.hpp"
#include "pdgkit/parser.hpp"

#include <doctest.h>

#include <climits>
#include <map>

using namespace pdgkit;
using namespace pdgkit::testing;

namespace {

ExecResult runText(std::string_view text, std::vector<int64_t> args = {}, uint64_t budget = 10'000'000) {
  return runProgram(parseChecked(text), args, budget);
}

std::string binop(std::string_view op) {
  return "func @main(%a: i64, %b: i64) -> i64 {\nentry:\n  %r = " + std::string(op) +
         " %a, %b\n  print %r\n  ret %r\n}\n";
}

int64_t eval(std::string_view op, int64_t a, int64_t b) {
  std::string text = binop(op);
  if (op == "slt" || op == "sge" || op == "eq")
    text = "func @main(%a: i64, %b: i64) -> i64 {\nentry:\n  %c = " + std::string(op) +
           " %a, %b\n  %r = select %c, 1, 0\n  ret %r\n}\n";
  auto r = runText(text, {a, b});
  REQUIRE_FALSE(r.trap);
  return r.exitValue;
}

} // namespace

TEST_CASE("integer arithmetic") {
  CHECK(eval("add", 2, 3) == 5);
  CHECK(eval("sub", 2, 3) == -1);
  CHECK(eval("mul", -4, 3) == -12);
  CHECK(eval("sdiv", -7, 2) == -3);
  CHECK(eval("srem", -7, 2) == -1);
  CHECK(eval("and", 12, 10) == 8);
  CHECK(eval("or", 12, 10) == 14);
  CHECK(eval("xor", 12, 10) == 6);
  CHECK(eval("shl", 1, 62) == (int64_t(1) << 62));
  CHECK(eval("lshr", -1, 60) == 15);
  CHECK(eval("add", INT64_MAX, 1) == INT64_MIN);
  CHECK(eval("mul", INT64_MAX, 2) == -2);
  CHECK(eval("sdiv", INT64_MIN, -1) == INT64_MIN);
  CHECK(eval("srem", INT64_MIN, -1) == 0);
  CHECK(eval("slt", -1, 0) == 1);
  CHECK(eval("sge", -1, 0) == 0);
  CHECK(eval("eq", 4, 4) == 1);
}

TEST_CASE("output and exit value") {
  auto r = runText(binop("add"), {20, 22});
  CHECK(r.output == std::vector<int64_t>{42});
  CHECK(r.exitValue == 42);
  CHECK(r.steps == 3);
  CHECK(describe(r) == "exit=42 steps=3 output=[42]");
}

TEST_CASE("traps") {
  auto r = runText(binop("sdiv"), {1, 0});
  REQUIRE(r.trap);
  CHECK(*r.trap == Trap::DivByZero);
  CHECK(describe(r).find("trap=div-by-zero") != std::string::npos);

  r = runText(R"(global @A: i64[4]

func @main(%i: i64) -> i64 {
entry:
  %p = gep @A, %i
  %v = load %p
  ret %v
}
)",
              {4});
  REQUIRE(r.trap);
  CHECK(*r.trap == Trap::OutOfBounds);

  r = runText(R"(func @main() -> i64 {
entry:
  br spin
spin:
  br spin
}
)",
              {}, 1000);
  REQUIRE(r.trap);
  CHECK(*r.trap == Trap::StepBudgetExceeded);
  CHECK(r.steps <= 1001);

  r = runText(R"(global @T: i64[1] = [5]

func @main() -> i64 {
entry:
  %f = load ptr @T
  %r = icall %f(1)
  ret %r
}
)");
  REQUIRE(r.trap);
  CHECK(*r.trap == Trap::BadICall);

  r = runText(R"(func @two(%a: i64, %b: i64) -> i64 {
entry:
  ret %a
}

func @main() -> i64 {
entry:
  %f = funcptr @two
  %r = icall %f(1)
  ret %r
}
)");
  REQUIRE(r.trap);
  CHECK(*r.trap == Trap::BadICall);
}

TEST_CASE("print before a trap is kept") {
  auto r = runText(R"(func @main(%d: i64) -> i64 {
entry:
  print 1
  %q = sdiv 10, %d
  print %q
  ret %q
}
)",
                   {0});
  CHECK(r.output == std::vector<int64_t>{1});
  CHECK(r.trap == Trap::DivByZero);
}

TEST_CASE("calls, recursion and allocas are per activation") {
  const auto &p = corpusProgram("21_recursion");
  CHECK(runProgram(p.module, std::vector<int64_t>{10}).exitValue == 55);
  CHECK(runProgram(p.module, std::vector<int64_t>{1}).exitValue == 1);
  auto r = runText(R"(func @cell(%v: i64) -> i64 {
entry:
  %a = alloca 1
  %old = load %a
  store %v, %a
  ret %old
}

func @main() -> i64 {
entry:
  %x = call @cell(5)
  %y = call @cell(6)
  %s = add %x, %y
  ret %s
}
)");
  CHECK(r.exitValue == 0);
}

TEST_CASE("corpus programs run without traps on their inputs") {
  for (const auto &p : corpus()) {
    CAPTURE(p.name);
    CHECK_FALSE(p.inputs.empty());
    for (const auto &in : p.allInputs(10)) {
      auto r = runProgram(p.module, in);
      CHECK_FALSE(r.trap);
    }
  }
}

TEST_CASE("known corpus results") {
  auto exitOf = [](std::string_view name, std::vector<int64_t> args) {
    return runProgram(corpusProgram(name).module, args).exitValue;
  };
  CHECK(exitOf("04_sum_while", {3}) == 3 * 190);
  CHECK(exitOf("30_gcd", {48, 18}) == 6);
  CHECK(exitOf("31_collatz", {27}) == 111);
  CHECK(exitOf("20_pointer_chase", {0}) == 10 + 40 + 60 + 20 + 70 + 80);
  CHECK(exitOf("23_addr_taken", {0}) == 105);
  CHECK(exitOf("23_addr_taken", {1}) == 5);
  CHECK(exitOf("26_early_exit", {9}) == 5);
  CHECK(exitOf("26_early_exit", {100}) == -1);
}

TEST_CASE("dynamic dependences of a store/load pair") {
  Module m = parseChecked(R"(func @main() -> i64 {
entry:
  %a = alloca 2
  store 7, %a
  %v = load %a
  store 8, %a
  ret %v
}
)");
  auto deps = traceDependences(m, {});
  std::map<std::tuple<uint32_t, uint32_t>, DepKind> seen;
  for (const auto &d : deps) {
    CHECK(d.object.kind == ObjectRef::Kind::Alloca);
    CHECK(d.object.index == 0);
    seen[{d.src.value, d.dst.value}] = d.kind;
  }
  CHECK(seen.size() == 3);
  CHECK(seen[{1, 2}] == DepKind::RAW);
  CHECK(seen[{2, 3}] == DepKind::WAR);
  CHECK(seen[{1, 3}] == DepKind::WAW);
}

TEST_CASE("dynamic dependences record loop-carried pairs") {
  const auto &p = corpusProgram("28_prefix_sum");
  auto deps = traceDependences(p.module, std::vector<int64_t>{1});
  bool carried = false, sameIter = false;
  for (const auto &d : deps) {
    if (d.kind != DepKind::RAW || !d.commonLoops.count(LoopId(1))) continue;
    if (d.carriedLoops.count(LoopId(1))) carried = true;
    if (d.sameIteration(LoopId(1))) sameIter = true;
  }
  CHECK(carried);
  CHECK_FALSE(sameIter);
}

TEST_CASE("print writes the io object") {
  Module m = parseChecked("func @main() -> i64 {\nentry:\n  print 1\n  print 2\n  ret 0\n}\n");
  auto deps = traceDependences(m, {});
  REQUIRE(deps.size() == 1);
  CHECK(deps[0].kind == DepKind::WAW);
  CHECK(deps[0].object.kind == ObjectRef::Kind::Io);
}

TEST_CASE("call events") {
  const auto &p = corpusProgram("18_icall_table");
  RunOptions o;
  o.recordCalls = true;
  auto rep = execute(p.module, std::vector<int64_t>{1}, o);
  std::set<std::string> names;
  for (const auto &c : rep.calls) names.insert(p.module.functions[c.callee.value].name);
  CHECK(names == std::set<std::string>{"inc", "dbl", "neg"});
}

TEST_CASE("profile counters") {
  const auto &p = corpusProgram("04_sum_while");
  auto prof = collectProfile(p.module, {{1}, {2}});
  auto single = runProgram(p.module, std::vector<int64_t>{1});
  CHECK(prof.totalSteps() == 2 * single.steps);
  REQUIRE(prof.loopInvocations.size() == 1);
  CHECK(prof.loopInvocations[0] == 2);
  CHECK(prof.loopIterations[0] == 2 * 21);
  CHECK(prof.functionInvocations[0] == 2);
  CHECK(prof.blockCount[0] == 2);
  CHECK(prof.fingerprint == moduleFingerprint(p.module));
}

TEST_CASE("profile text and embedding round trip") {
  const auto &p = corpusProgram("15_nest_sum");
  auto prof = collectProfile(p.module, {{3}});
  CHECK(parseProfileText(profileText(prof)) == prof);
  Module withProf = embedProfile(p.module, prof);
  auto back = readProfile(parseModule(printModule(withProf)));
  REQUIRE(back);
  CHECK(*back == prof);
  CHECK(moduleFingerprint(withProf) == moduleFingerprint(p.module));
  CHECK_FALSE(readProfile(p.module));

  auto table = buildLoopTable(p.module);
  double inner = loopHotness(p.module, prof, table.loops[2]);
  double outer = loopHotness(p.module, prof, table.loops[1]);
  CHECK(inner > 0.0);
  CHECK(outer >= inner);
  CHECK(outer <= 1.0);
}

TEST_CASE("stale profiles are rejected") {
  auto prof = collectProfile(corpusProgram("04_sum_while").module, {{1}});
  CHECK_THROWS_AS(embedProfile(corpusProgram("05_countdown").module, prof), IrError);
  Module m = embedProfile(corpusProgram("04_sum_while").module, prof);
  m.functions[0].blocks[2].insts[0].operands[1] = Operand::literal(99);
  m.renumber();
  CHECK_THROWS_AS(readProfile(m), IrError);
}

TEST_CASE("profiling a trapping run fails") {
  Module m = parseChecked(binop("sdiv"));
  CHECK_THROWS_AS(collectProfile(m, {{1, 0}}), IrError);
}

TEST_CASE("observer sees loop activations") {
  const auto &p = corpusProgram("14_chain_nest");
  RunOptions o;
  std::map<uint64_t, std::set<int64_t>> perInvocation;
  o.observer = [&](const Instruction &i, const RtValue &v, std::span<const LoopActivation> stack) {
    if (i.result != "a") return;
    REQUIRE(stack.size() == 2);
    CHECK(stack.back().loop == LoopId(1));
    perInvocation[stack.back().invocation].insert(v.num);
  };
  execute(p.module, std::vector<int64_t>{2}, o);
  CHECK(perInvocation.size() == 8);
  for (const auto &[inv, vals] : perInvocation) CHECK(vals.size() == 1);
}

TEST_CASE("execution is deterministic") {
  for (const auto &p : corpus()) {
    auto in = p.inputs.front();
    CHECK(runProgram(p.module, in) == runProgram(p.module, in));
  }
}
