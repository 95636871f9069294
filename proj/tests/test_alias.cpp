#include "support.hpp"

#include "pdgkit/alias.hpp"

#include <doctest.h>

using namespace pdgkit;
using namespace pdgkit::testing;

namespace {

InstrId byResult(const Module &m, std::string_view fn, std::string_view name) {
  for (const auto &b : m.findFunction(fn)->blocks)
    for (const auto &i : b.insts)
      if (i.result == name) return i.id;
  FAIL("no value %" << name);
  return InstrId(0);
}

/// The n-th instruction with opcode `op` in function `fn`.
InstrId nth(const Module &m, std::string_view fn, Opcode op, int n = 0) {
  for (const auto &b : m.findFunction(fn)->blocks)
    for (const auto &i : b.insts)
      if (i.op == op && n-- == 0) return i.id;
  FAIL("no such instruction");
  return InstrId(0);
}

const char *kTwoAllocas = R"(func @main(%k: i64) -> i64 {
entry:
  %p = alloca 4
  %q = alloca 4
  %p2 = gep %p, 2
  %pk = gep %p, %k
  store 1, %p
  store 2, %q
  store 3, %p2
  %v = load %pk
  ret %v
}
)";

} // namespace

TEST_CASE("allocation sites and constant offsets") {
  Module m = parseChecked(kTwoAllocas);
  auto pts = PointsTo::compute(m);
  const auto &p = pts.valuePts(0, "p");
  REQUIRE(p.size() == 1);
  CHECK(p.begin()->object == ObjectRef{ObjectRef::Kind::Alloca, 0});
  CHECK(p.begin()->offset == 0);
  const auto &p2 = pts.valuePts(0, "p2");
  REQUIRE(p2.size() == 1);
  CHECK(p2.begin()->offset == 2);
  const auto &pk = pts.valuePts(0, "pk");
  REQUIRE(pk.size() == 1);
  CHECK_FALSE(pk.begin()->offset.has_value());
  CHECK(pts.objectSize(ObjectRef{ObjectRef::Kind::Alloca, 0}) == 4);
}

TEST_CASE("alias answers") {
  Module m = parseChecked(kTwoAllocas);
  auto pts = PointsTo::compute(m);
  InstrId sp = nth(m, "main", Opcode::Store, 0), sq = nth(m, "main", Opcode::Store, 1),
          sp2 = nth(m, "main", Opcode::Store, 2), ld = nth(m, "main", Opcode::Load);
  CHECK(pts.alias(sp, sq) == AliasAnswer::NoAlias);
  CHECK(pts.alias(sp, sp2) == AliasAnswer::NoAlias);
  CHECK(pts.alias(sp, sp) == AliasAnswer::MustAlias);
  CHECK(pts.alias(sp, ld) == AliasAnswer::MayAlias);
  CHECK(pts.alias(sq, ld) == AliasAnswer::NoAlias);
  CHECK(syntacticAlias(m, sp, sq) == AliasAnswer::MayAlias);
  CHECK(syntacticAlias(m, sp, sp) == AliasAnswer::MustAlias);
}

TEST_CASE("phi and select merge points-to sets") {
  Module m = parseChecked(R"(global @G: i64[2]
global @H: i64[2]

func @main(%x: i64) -> i64 {
entry:
  %c = slt %x, 0
  %s = select ptr %c, @G, @H
  brcond %c, a, b
a:
  br j
b:
  br j
j:
  %p = phi ptr [a: @G], [b: %s]
  %v = load %p
  ret %v
}
)");
  auto pts = PointsTo::compute(m);
  CHECK(pts.valuePts(0, "s").size() == 2);
  CHECK(pts.objects(nth(m, "main", Opcode::Load)).size() == 2);
}

TEST_CASE("function pointers flow through memory") {
  const auto &p = corpusProgram("18_icall_table");
  auto pts = PointsTo::compute(p.module);
  const auto &fp = pts.valuePts(p.module.functionIndex("main"), "fp");
  CHECK(fp.size() == 3);
  for (const auto &t : fp) CHECK(t.object.kind == ObjectRef::Kind::Function);
  auto site = nth(p.module, "main", Opcode::ICall);
  CHECK(pts.callees(site).size() == 3);
  CHECK(pts.dump().find("pts %fp -> {fn@inc@0, fn@dbl@0, fn@neg@0} in @main") != std::string::npos);
}

TEST_CASE("pointer arguments bind to callee parameters") {
  Module m = parseChecked(R"(global @G: i64[4]

func @put(%p: ptr, %v: i64) -> void {
entry:
  store %v, %p
  ret
}

func @main() -> i64 {
entry:
  %a = alloca 2
  call @put(%a, 1)
  %g = gep @G, 3
  call @put(%g, 2)
  %v = load %a
  ret %v
}
)");
  auto pts = PointsTo::compute(m);
  const auto &p = pts.valuePts(0, "p");
  CHECK(p.size() == 2);
  auto put = pts.summary(0);
  CHECK(put.mod.size() == 2);
  CHECK(put.ref.empty());
  auto call = nth(m, "main", Opcode::Call);
  auto load = nth(m, "main", Opcode::Load);
  CHECK(pts.modRef(call, load) == ModRef::Mod);
}

TEST_CASE("callee-local allocas do not conflict with the caller") {
  const auto &p = corpusProgram("25_alloca_local");
  auto pts = PointsTo::compute(p.module);
  auto call = nth(p.module, "main", Opcode::Call);
  auto store = nth(p.module, "main", Opcode::Store);
  CHECK(pts.modRef(call, store) == ModRef::NoModRef);
  auto eff = pts.callEffects(call);
  CHECK(eff.mod.empty());
  CHECK(eff.ref.empty());
  const auto &poly = pts.summary(p.module.functionIndex("poly"));
  REQUIRE(poly.mod.size() == 1);
  CHECK(p.module.loc(InstrId(poly.mod.begin()->index)).func == p.module.functionIndex("poly"));
}

TEST_CASE("allocas passed down a recursion stay visible to the call") {
  Module m = parseChecked(R"(func @fill(%p: ptr, %n: i64) -> void {
entry:
  %a = alloca 1
  store %n, %p
  %z = eq %n, 0
  brcond %z, done, more
more:
  %m = sub %n, 1
  call @fill(%a, %m)
  br done
done:
  ret
}

func @main() -> i64 {
entry:
  %b = alloca 1
  call @fill(%b, 2)
  %v = load %b
  ret %v
}
)");
  auto pts = PointsTo::compute(m);
  auto inner = nth(m, "fill", Opcode::Call);
  CHECK(pts.callEffects(inner).mod.count(ObjectRef{ObjectRef::Kind::Alloca, 0}));
  auto outer = nth(m, "main", Opcode::Call);
  auto eff = pts.callEffects(outer);
  CHECK(eff.mod.count(ObjectRef{ObjectRef::Kind::Alloca, nth(m, "main", Opcode::Alloca).value}));
  CHECK_FALSE(eff.mod.count(ObjectRef{ObjectRef::Kind::Alloca, 0}));
}

TEST_CASE("escaping callee allocas are kept") {
  Module m = parseChecked(R"(global @G: i64[1]

func @leak() -> i64 {
entry:
  %a = alloca 1
  %old = load ptr @G
  store 5, %a
  store %a, @G
  ret 0
}

func @main() -> i64 {
entry:
  %x = call @leak()
  %y = call @leak()
  ret %x
}
)");
  auto pts = PointsTo::compute(m);
  CHECK(pts.callEffects(nth(m, "main", Opcode::Call)).mod.count(ObjectRef{ObjectRef::Kind::Alloca, 0}));
}

TEST_CASE("print is a write to the io object") {
  Module m = parseChecked("func @main() -> i64 {\nentry:\n  print 1\n  ret 0\n}\n");
  auto pts = PointsTo::compute(m);
  CHECK(pts.objects(InstrId(0)) == std::set<ObjectRef>{ObjectRef::io()});
  CHECK(pts.summary(0).mod.count(ObjectRef::io()));
}

TEST_CASE("every dynamically touched object is in the static sets") {
  for (const auto &p : corpus()) {
    CAPTURE(p.name);
    auto pts = PointsTo::compute(p.module);
    for (const auto &in : p.allInputs(3)) {
      for (const auto &d : traceDependences(p.module, in)) {
        CHECK(pts.objects(d.src).count(d.object));
        CHECK(pts.objects(d.dst).count(d.object));
        CHECK(pts.alias(d.src, d.dst) != AliasAnswer::NoAlias);
      }
    }
  }
}

TEST_CASE("observed icall targets are resolved callees") {
  for (const auto &p : corpus()) {
    auto pts = PointsTo::compute(p.module);
    RunOptions o;
    o.recordCalls = true;
    for (const auto &in : p.allInputs(3))
      for (const auto &c : execute(p.module, in, o).calls) CHECK(pts.callees(c.site).count(c.callee.value));
  }
}

TEST_CASE("values by name") {
  Module m = parseChecked(kTwoAllocas);
  CHECK(m.instr(byResult(m, "main", "q")).op == Opcode::Alloca);
}
