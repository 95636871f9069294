// pdgkit command-line driver.

#include "pdgkit/callgraph.hpp"
#include "pdgkit/dataflow.hpp"
#include "pdgkit/loop_transforms.hpp"
#include "pdgkit/parallel.hpp"
#include "pdgkit/parser.hpp"
#include "pdgkit/transforms.hpp"
#include "pdgkit/verifier.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

using namespace pdgkit;

namespace {

struct CliError {
  std::string message;
  std::string file;
  int line = 0;
};

std::string readFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{"cannot read file", path, 0};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Module loadModule(const std::string &path, bool verify = true) {
  std::string text = readFile(path);
  SourceLines lines;
  Module m;
  try {
    m = parseModule(text, &lines);
  } catch (const IrError &e) {
    throw CliError{e.what(), path, e.line()};
  }
  if (verify) {
    auto diags = verifyModule(m);
    if (!diags.empty()) throw CliError{formatDiagnostic(diags.front()), path, lines.lineOf(diags.front().entity)};
  }
  return m;
}

void writeText(const std::string &path, const std::string &text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{"cannot write file", path, 0};
  out << text;
}

/// Summaries go to stdout unless the IR itself is being written there.
std::ostream &summaryStream(const std::string &outPath) { return outPath.empty() ? std::cerr : std::cout; }

std::vector<std::vector<int64_t>> parseInputs(const std::vector<int64_t> &args, const std::vector<std::string> &inputs) {
  std::vector<std::vector<int64_t>> out;
  for (const auto &s : inputs) {
    std::istringstream is(s);
    std::vector<int64_t> v;
    std::string tok;
    while (is >> tok) {
      try {
        size_t used = 0;
        v.push_back(std::stoll(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception &) {
        throw CLI::ValidationError("--input", "not an integer: " + tok);
      }
    }
    out.push_back(std::move(v));
  }
  if (out.empty()) out.push_back(args);
  return out;
}

TaskMode parseMode(const std::string &s) {
  if (s == "seq") return TaskMode::SequentialAnyOrder;
  if (s == "par") return TaskMode::Concurrent;
  return TaskMode::Inline;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"pdgkit: dependence analysis and loop transformations over a small SSA IR"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string file, outPath, dotPath;
  std::vector<int64_t> args;
  std::vector<std::string> inputs;
  uint64_t seed = 0;
  uint64_t budget = 10'000'000;
  std::optional<double> hotThreshold;

  auto addFile = [&](CLI::App *c) { c->add_option("file", file, "Input IR file")->required(); };
  auto addOut = [&](CLI::App *c) { c->add_option("--out,-o", outPath, "Write the resulting IR here (default stdout)"); };
  auto addArgs = [&](CLI::App *c) {
    c->add_option("--args", args, "Program arguments")->allow_extra_args();
    c->add_option("--input", inputs, "One input vector as a quoted list; repeatable");
    c->add_option("--step-budget", budget, "Maximum interpreter steps");
  };
  app.add_option("--seed", seed, "Seed for randomized execution orders");
  app.add_option("--hot-threshold", hotThreshold, "Minimum loop hotness (fraction) for transformations")
      ->check(CLI::Range(0.0, 1.0));

  auto *verify = app.add_subcommand("verify", "Check structural, typing and SSA rules");
  addFile(verify);

  std::string modeName = "inline";
  auto *run = app.add_subcommand("run", "Interpret the program");
  addFile(run);
  addArgs(run);
  run->add_option("--mode", modeName, "Task execution: inline, seq (random order) or par (threads)")
      ->check(CLI::IsMember({"inline", "seq", "par"}));

  auto *prof = app.add_subcommand("prof", "Profile the program and print !prof lines");
  addFile(prof);
  addArgs(prof);
  addOut(prof);

  std::string profilePath;
  auto *embed = app.add_subcommand("embed-prof", "Embed a profile (from --profile or stdin) into the IR");
  addFile(embed);
  addOut(embed);
  embed->add_option("--profile", profilePath, "Profile text file (default stdin)");

  bool embedPdg = false, baseline = false;
  auto *pdg = app.add_subcommand("pdg", "Program dependence graph as !pdg lines or DOT");
  addFile(pdg);
  addOut(pdg);
  pdg->add_option("--dot", dotPath, "Write DOT here");
  pdg->add_flag("--embed", embedPdg, "Emit the IR with the graph embedded as metadata");
  pdg->add_flag("--baseline", baseline, "Use the alias-free all-pairs memory baseline");

  int64_t loopId = 0;
  auto *scc = app.add_subcommand("sccdag", "Classified SCCDAG of one loop");
  addFile(scc);
  scc->add_option("--loop", loopId, "Loop id")->required();
  scc->add_option("--dot", dotPath, "Write DOT here");

  auto *cgCmd = app.add_subcommand("callgraph", "Complete call graph and islands");
  addFile(cgCmd);
  cgCmd->add_option("--dot", dotPath, "Write DOT here");

  auto *ptsCmd = app.add_subcommand("pts", "Points-to sets of pointer values");
  addFile(ptsCmd);

  std::string fnName, problem = "liveness";
  auto *df = app.add_subcommand("dataflow", "Solve a bit-vector data-flow problem on one function");
  addFile(df);
  df->add_option("--function", fnName, "Function name")->required();
  df->add_option("--problem", problem, "liveness or reaching")->check(CLI::IsMember({"liveness", "reaching"}));

  auto *report = app.add_subcommand("report", "One line per loop: hotness, invariants, IVs");
  addFile(report);

  bool naive = false;
  auto *licmCmd = app.add_subcommand("licm", "Hoist loop invariants");
  addFile(licmCmd);
  addOut(licmCmd);
  licmCmd->add_flag("--naive", naive, "Use the operand/alias-based invariance test only");

  auto *dfe = app.add_subcommand("dfe", "Remove functions unreachable from @main");
  addFile(dfe);
  addOut(dfe);

  int64_t tasks = 1;
  auto *doall = app.add_subcommand("doall", "Parallelize a loop into N strided tasks");
  addFile(doall);
  addOut(doall);
  addArgs(doall);
  doall->add_option("--loop", loopId, "Loop id")->required();
  doall->add_option("--tasks", tasks, "Number of tasks")->required()->check(CLI::PositiveNumber);
  doall->add_option("--mode", modeName, "With --args: run the result in seq or par mode")
      ->check(CLI::IsMember({"inline", "seq", "par"}));

  int64_t instrId = 0, beforeId = 0;
  auto *move = app.add_subcommand("move", "Move an instruction before another one");
  addFile(move);
  addOut(move);
  move->add_option("--instr", instrId, "Instruction to move")->required();
  move->add_option("--before", beforeId, "Anchor instruction")->required();

  std::string otherFile;
  auto *equiv = app.add_subcommand("check-equiv", "Compare two programs on the same inputs");
  equiv->add_option("file", file, "Reference IR")->required();
  equiv->add_option("other", otherFile, "Candidate IR")->required();
  addArgs(equiv);
  equiv->add_option("--mode", modeName, "Task execution for both programs")
      ->check(CLI::IsMember({"inline", "seq", "par"}));

  std::vector<std::string> linkFiles;
  auto *link = app.add_subcommand("link", "Concatenate modules, preserving metadata");
  link->add_option("files", linkFiles, "Input IR files")->required();
  addOut(link);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) {
      std::string text = readFile(file);
      SourceLines lines;
      Module m;
      try {
        m = parseModule(text, &lines);
      } catch (const IrError &e) {
        throw CliError{e.what(), file, e.line()};
      }
      auto diags = verifyModule(m);
      for (const auto &d : diags) {
        std::cerr << "error: " << formatDiagnostic(d) << " at " << file;
        if (int l = lines.lineOf(d.entity)) std::cerr << ':' << l;
        std::cerr << '\n';
      }
      if (!diags.empty()) return 1;
      std::cout << "ok: " << m.functions.size() << " functions, " << m.numInstructions() << " instructions\n";
      return 0;
    }

    if (run->parsed()) {
      Module m = loadModule(file);
      RunOptions o;
      o.stepBudget = budget;
      o.taskMode = parseMode(modeName);
      o.seed = seed;
      int rc = 0;
      for (const auto &in : parseInputs(args, inputs)) {
        auto r = execute(m, in, o).result;
        std::cout << describe(r) << '\n';
        if (r.trap) rc = 1;
      }
      return rc;
    }

    if (prof->parsed()) {
      Module m = loadModule(file);
      auto p = collectProfile(m, parseInputs(args, inputs), budget);
      writeText(outPath, profileText(p));
      return 0;
    }

    if (embed->parsed()) {
      Module m = loadModule(file);
      std::string text;
      if (profilePath.empty()) {
        std::stringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
      } else {
        text = readFile(profilePath);
      }
      writeText(outPath, printModule(embedProfile(m, parseProfileText(text))));
      return 0;
    }

    if (pdg->parsed()) {
      Module m = loadModule(file);
      auto pts = PointsTo::compute(m);
      PdgOptions po;
      po.syntacticBaseline = baseline;
      auto g = buildPdg(m, pts, po);
      annotateCarried(m, g, detectLoops(m));
      if (!dotPath.empty()) writeText(dotPath, g.dot(m));
      if (embedPdg) {
        Module out = m;
        out.eraseMeta("pdg");
        for (const auto &l : g.metadataLines()) out.metadata.push_back({"pdg", l});
        writeText(outPath, printModule(out));
      } else if (dotPath.empty()) {
        std::ostringstream os;
        for (const auto &l : g.metadataLines()) os << "!pdg " << l << '\n';
        writeText(outPath, os.str());
      }
      return 0;
    }

    if (scc->parsed()) {
      Module m = loadModule(file);
      ProgramAnalysis pa(m);
      if (loopId < 0 || static_cast<size_t>(loopId) >= pa.loops().loops.size())
        throw CliError{"no loop L" + std::to_string(loopId), file, 0};
      LoopId l(static_cast<uint32_t>(loopId));
      const auto &dag = pa.sccDag(l);
      if (!dotPath.empty()) writeText(dotPath, dag.dot(m));
      else std::cout << dag.dump(m);
      return 0;
    }

    if (cgCmd->parsed()) {
      Module m = loadModule(file);
      auto pts = PointsTo::compute(m);
      auto cg = CallGraph::build(m, pts);
      if (!dotPath.empty()) {
        writeText(dotPath, cg.dot(m));
        return 0;
      }
      std::cout << cg.dump(m);
      for (const auto &isl : islands(m, cg)) {
        std::cout << "island {";
        for (size_t k = 0; k < isl.size(); ++k) std::cout << (k ? ", " : "") << '@' << m.functions[isl[k]].name;
        std::cout << "}\n";
      }
      return 0;
    }

    if (ptsCmd->parsed()) {
      Module m = loadModule(file);
      std::cout << PointsTo::compute(m).dump();
      return 0;
    }

    if (df->parsed()) {
      Module m = loadModule(file);
      if (!fnName.empty() && fnName.front() == '@') fnName.erase(0, 1);
      const Function *f = m.findFunction(fnName);
      if (!f) throw CliError{"no function @" + fnName, file, 0};
      auto r = problem == "liveness" ? liveness(*f) : reachingDefinitions(*f);
      std::cout << dumpResult(*f, r);
      return 0;
    }

    if (report->parsed()) {
      Module m = loadModule(file);
      ProgramAnalysis pa(m);
      auto profile = readProfile(m);
      for (const auto &line : loopReport(pa, profile)) std::cout << line << '\n';
      for (const auto &d : pa.loops().diagnostics) std::cout << "note: " << d << '\n';
      return 0;
    }

    if (licmCmd->parsed()) {
      Module m = loadModule(file);
      LicmOptions lo;
      lo.hotThreshold = hotThreshold;
      lo.naive = naive;
      auto r = licm(m, lo);
      writeText(outPath, printModule(r.module));
      summaryStream(outPath) << r.summary();
      return 0;
    }

    if (dfe->parsed()) {
      Module m = loadModule(file);
      auto r = deadFunctionElimination(m);
      writeText(outPath, printModule(r.module));
      summaryStream(outPath) << r.summary();
      return 0;
    }

    if (doall->parsed()) {
      Module m = loadModule(file);
      ProgramAnalysis pa(m);
      if (loopId < 0 || static_cast<size_t>(loopId) >= pa.loops().loops.size())
        throw CliError{"no loop L" + std::to_string(loopId), file, 0};
      LoopId l(static_cast<uint32_t>(loopId));
      if (hotThreshold) {
        auto profile = readProfile(m);
        if (!profile) throw CliError{"--hot-threshold needs an embedded profile", file, 0};
        auto table = buildLoopTable(m);
        if (loopHotness(m, *profile, table.loops.at(l.value)) < *hotThreshold) {
          std::cout << "DOALL rejected: loop L" << l.value << " is below the hot threshold\n";
          return 1;
        }
      }
      auto plan = doallCheck(pa, l);
      if (!plan.applicable) {
        std::cout << plan.rejected << '\n';
        return 1;
      }
      Module t = doallTransform(m, plan, tasks);
      writeText(outPath, printModule(t));
      auto &log = summaryStream(outPath);
      log << "parallelized loop L" << l.value << " into " << tasks << " task" << (tasks == 1 ? "" : "s") << " ("
          << plan.reductions.size() << " reduction" << (plan.reductions.size() == 1 ? "" : "s") << ", "
          << plan.env.slots.size() << " environment slot" << (plan.env.slots.size() == 1 ? "" : "s") << ")\n";
      if (!args.empty() || !inputs.empty()) {
        RunOptions o;
        o.stepBudget = budget;
        o.taskMode = modeName == "inline" ? TaskMode::SequentialAnyOrder : parseMode(modeName);
        o.seed = seed;
        for (const auto &in : parseInputs(args, inputs)) log << describe(execute(t, in, o).result) << '\n';
      }
      return 0;
    }

    if (move->parsed()) {
      Module m = loadModule(file);
      auto checkId = [&](int64_t id) {
        if (id < 0 || static_cast<size_t>(id) >= m.numInstructions())
          throw CliError{"no instruction #" + std::to_string(id), file, 0};
        return InstrId(static_cast<uint32_t>(id));
      };
      InstrId i = checkId(instrId), anchor = checkId(beforeId);
      Module out = moveBefore(m, i, movePointBefore(m, anchor));
      writeText(outPath, printModule(out));
      summaryStream(outPath) << "moved #" << i.value << " before #" << anchor.value << '\n';
      return 0;
    }

    if (equiv->parsed()) {
      Module a = loadModule(file);
      Module b = loadModule(otherFile);
      RunOptions o;
      o.stepBudget = budget;
      o.taskMode = parseMode(modeName);
      o.seed = seed;
      for (const auto &in : parseInputs(args, inputs)) {
        auto fa = std::async(std::launch::async, [&] { return execute(a, in, o).result; });
        auto rb = execute(b, in, o).result;
        auto ra = fa.get();
        if (!sameBehavior(ra, rb)) {
          std::cout << "DIFFERENT\n  " << file << ": " << describe(ra) << "\n  " << otherFile << ": " << describe(rb)
                    << '\n';
          return 1;
        }
      }
      std::cout << "EQUIVALENT\n";
      return 0;
    }

    if (link->parsed()) {
      std::vector<Module> parts;
      for (const auto &f : linkFiles) parts.push_back(loadModule(f, false));
      writeText(outPath, printModule(linkModules(parts)));
      return 0;
    }
  } catch (const CliError &e) {
    std::cerr << "error: " << e.message << " at " << e.file;
    if (e.line > 0) std::cerr << ':' << e.line;
    std::cerr << '\n';
    return 1;
  } catch (const IrError &e) {
    std::cerr << "error: " << e.what() << " at " << file;
    if (e.line() > 0) std::cerr << ':' << e.line();
    std::cerr << '\n';
    return 1;
  } catch (const CLI::ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
