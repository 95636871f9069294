#include "pdgkit/callgraph.hpp"
#include "pdgkit/dataflow.hpp"
#include "pdgkit/loop_transforms.hpp"
#include "pdgkit/parallel.hpp"
#include "pdgkit/parser.hpp"
#include "pdgkit/transforms.hpp"
#include "pdgkit/verifier.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pdgkit;

namespace {

py::dict resultDict(const ExecResult &r) {
  py::dict d;
  d["output"] = r.output;
  d["exit_value"] = r.exitValue;
  d["steps"] = r.steps;
  d["trap"] = r.trap ? py::cast(std::string(trapName(*r.trap))) : py::none();
  return d;
}

TaskMode modeFrom(const std::string &s) {
  if (s == "inline") return TaskMode::Inline;
  if (s == "seq") return TaskMode::SequentialAnyOrder;
  if (s == "par") return TaskMode::Concurrent;
  throw py::value_error("mode must be inline, seq or par");
}

LoopId loopFrom(ProgramAnalysis &pa, int64_t id) {
  if (id < 0 || static_cast<size_t>(id) >= pa.loops().loops.size())
    throw py::index_error("no loop L" + std::to_string(id));
  return LoopId(static_cast<uint32_t>(id));
}

InstrId instrFrom(const Module &m, int64_t id) {
  if (id < 0 || static_cast<size_t>(id) >= m.numInstructions())
    throw py::index_error("no instruction #" + std::to_string(id));
  return InstrId(static_cast<uint32_t>(id));
}

ExecResult runWith(const Module &m, const std::vector<int64_t> &args, const std::string &mode, uint64_t seed,
                   uint64_t budget) {
  RunOptions o;
  o.taskMode = modeFrom(mode);
  o.seed = seed;
  o.stepBudget = budget;
  py::gil_scoped_release release;
  return execute(m, args, o).result;
}

} // namespace

PYBIND11_MODULE(_pdgkit, m) {
  m.doc() = "Dependence analysis and loop transformations over a small SSA IR";
  py::register_exception<IrError>(m, "IrError", PyExc_ValueError);

  py::class_<Module>(m, "Module")
      .def_static("parse", [](const std::string &text) { return parseModule(text); }, py::arg("text"))
      .def("__str__", &printModule)
      .def("text", &printModule)
      .def_property_readonly("functions",
                             [](const Module &mod) {
                               std::vector<std::string> out;
                               for (const auto &f : mod.functions) out.push_back(f.name);
                               return out;
                             })
      .def_property_readonly("num_instructions", &Module::numInstructions)
      .def_property_readonly("num_loops", [](const Module &mod) { return detectLoops(mod).loops.size(); })
      .def("verify",
           [](const Module &mod) {
             std::vector<std::string> out;
             for (const auto &d : verifyModule(mod)) out.push_back(formatDiagnostic(d));
             return out;
           })
      .def(
          "run",
          [](const Module &mod, const std::vector<int64_t> &args, const std::string &mode, uint64_t seed,
             uint64_t budget) { return resultDict(runWith(mod, args, mode, seed, budget)); },
          py::arg("args") = std::vector<int64_t>{}, py::arg("mode") = "inline",
           py::arg("seed") = 0, py::arg("step_budget") = 10'000'000,
           "Interpret @main; returns output, exit_value, steps and trap.")
      .def(
          "profile",
          [](const Module &mod, const std::vector<std::vector<int64_t>> &inputs) {
            return profileText(collectProfile(mod, inputs));
          },
          py::arg("inputs"))
      .def(
          "embed_profile",
          [](const Module &mod, const std::string &text) { return embedProfile(mod, parseProfileText(text)); },
          py::arg("profile_text"))
      .def(
          "pdg_lines",
          [](const Module &mod, bool baseline) {
            auto pts = PointsTo::compute(mod);
            PdgOptions po;
            po.syntacticBaseline = baseline;
            auto g = buildPdg(mod, pts, po);
            annotateCarried(mod, g, detectLoops(mod));
            return g.metadataLines();
          },
          py::arg("baseline") = false)
      .def("pdg_dot",
           [](const Module &mod) {
             auto pts = PointsTo::compute(mod);
             return buildPdg(mod, pts).dot(mod);
           })
      .def(
          "sccdag",
          [](const Module &mod, int64_t loop) {
            ProgramAnalysis pa(mod);
            return pa.sccDag(loopFrom(pa, loop)).dump(mod);
          },
          py::arg("loop"))
      .def("callgraph",
           [](const Module &mod) {
             auto pts = PointsTo::compute(mod);
             return CallGraph::build(mod, pts).dump(mod);
           })
      .def("islands",
           [](const Module &mod) {
             auto pts = PointsTo::compute(mod);
             auto cg = CallGraph::build(mod, pts);
             std::vector<std::vector<std::string>> out;
             for (const auto &isl : islands(mod, cg)) {
               auto &v = out.emplace_back();
               for (uint32_t f : isl) v.push_back(mod.functions[f].name);
             }
             return out;
           })
      .def("points_to", [](const Module &mod) { return PointsTo::compute(mod).dump(); })
      .def(
          "dataflow",
          [](const Module &mod, std::string fn, const std::string &problem) {
            if (!fn.empty() && fn.front() == '@') fn.erase(0, 1);
            const Function *f = mod.findFunction(fn);
            if (!f) throw py::key_error("no function @" + fn);
            if (problem == "liveness") return dumpResult(*f, liveness(*f));
            if (problem == "reaching") return dumpResult(*f, reachingDefinitions(*f));
            throw py::value_error("problem must be liveness or reaching");
          },
          py::arg("function"), py::arg("problem") = "liveness")
      .def("report",
           [](const Module &mod) {
             ProgramAnalysis pa(mod);
             return loopReport(pa, readProfile(mod));
           })
      .def(
          "licm",
          [](const Module &mod, bool naive, std::optional<double> hot) {
            LicmOptions o;
            o.naive = naive;
            o.hotThreshold = hot;
            auto r = licm(mod, o);
            return py::make_tuple(r.module, r.total());
          },
          py::arg("naive") = false, py::arg("hot_threshold") = py::none(),
          "Returns (module, number of hoisted instructions).")
      .def("dfe",
           [](const Module &mod) {
             auto r = deadFunctionElimination(mod);
             return py::make_tuple(r.module, r.removed);
           })
      .def(
          "doall_check",
          [](const Module &mod, int64_t loop) -> std::optional<std::string> {
            ProgramAnalysis pa(mod);
            auto plan = doallCheck(pa, loopFrom(pa, loop));
            if (plan.applicable) return std::nullopt;
            return plan.rejected;
          },
          py::arg("loop"), "None when applicable, otherwise the rejection message.")
      .def(
          "doall",
          [](const Module &mod, int64_t loop, int64_t tasks) {
            if (tasks < 1) throw py::value_error("tasks must be at least 1");
            ProgramAnalysis pa(mod);
            auto plan = doallCheck(pa, loopFrom(pa, loop));
            if (!plan.applicable) throw IrError(plan.rejected);
            return doallTransform(mod, plan, tasks);
          },
          py::arg("loop"), py::arg("tasks"))
      .def(
          "move",
          [](const Module &mod, int64_t instr, int64_t before) {
            return moveBefore(mod, instrFrom(mod, instr), movePointBefore(mod, instrFrom(mod, before)));
          },
          py::arg("instr"), py::arg("before"));

  m.def(
      "link", [](const std::vector<Module> &parts) { return linkModules(parts); }, py::arg("modules"));
  m.def(
      "check_equiv",
      [](const Module &a, const Module &b, const std::vector<std::vector<int64_t>> &inputs, const std::string &mode,
         uint64_t seed) {
        for (const auto &in : inputs)
          if (!sameBehavior(runWith(a, in, mode, seed, 10'000'000), runWith(b, in, mode, seed, 10'000'000)))
            return false;
        return true;
      },
      py::arg("a"), py::arg("b"), py::arg("inputs"), py::arg("mode") = "inline", py::arg("seed") = 0);
  m.def("describe", [](const Module &mod, const std::vector<int64_t> &args) { return describe(runProgram(mod, args)); },
        py::arg("module"), py::arg("args") = std::vector<int64_t>{});
}
