// Command-line driver: generate or decompose instances, run a chosen dual
// with a chosen optimizer under an evaluation budget, verify oracle-backed
// certificates, and summarize trace files.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decompdual/duals.hpp"
#include "decompdual/instances.hpp"
#include "decompdual/json_io.hpp"
#include "decompdual/optimize.hpp"
#include "decompdual/structure.hpp"
#include "decompdual/verify.hpp"

using namespace decompdual;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitBudgetGap = 4;

std::uint64_t effectiveSeed(std::uint64_t cliSeed) {
  if (const char* env = std::getenv("DECOMPDUAL_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw CLI::ValidationError("DECOMPDUAL_SEED must be an integer");
    }
  }
  return cliSeed;
}

int runGenerate(const std::string& klass, std::uint64_t seed, const std::string& out,
                int blocks, int nodes, int shared, double densityLo, double densityHi,
                int nBin, int nCont) {
  seed = effectiveSeed(seed);
  Instance inst;
  if (klass == "star-stab" || klass == "path-stab") {
    GenConfig cfg;
    cfg.blocks = blocks;
    cfg.nodesPerBlock = nodes;
    cfg.sharedVars = shared;
    cfg.densityLo = densityLo;
    cfg.densityHi = densityHi;
    cfg.topology = klass == "star-stab" ? GenConfig::Topology::Star
                                        : GenConfig::Topology::Path;
    cfg.seed = seed;
    inst = gen_stab(cfg);
  } else if (klass == "packing") {
    inst = gen_random_packing(blocks, nBin, nCont, seed);
  } else if (klass == "covering") {
    inst = gen_random_covering(blocks, nBin, nCont, seed);
  } else if (klass.rfind("canned:", 0) == 0) {
    inst = canned(klass.substr(7)).inst;
  } else {
    throw CLI::ValidationError("unknown class: " + klass);
  }
  save_instance(inst, out);
  auto rep = validate_instance(inst);
  std::cout << "wrote " << out << " (" << inst.blocks.size() << " blocks, "
            << inst.edges.size() << " edges)\n";
  for (const auto& v : rep.violations) std::cerr << "note: " << v << "\n";
  return kExitOk;
}

int runDecompose(const std::string& in, const std::string& out,
                 const std::string& report) {
  FlatMIP m = load_flat(in);
  auto g = build_intersection_graph(m);
  auto td = tree_decompose(g);
  auto val = validate_tree_decomposition(g, td);
  if (!val.ok) {
    std::cerr << "internal decomposition failure:\n";
    for (const auto& v : val.violations) std::cerr << "  " << v << "\n";
    return 1;
  }
  Instance inst = reformulate_to_blocks(m, td);
  save_instance(inst, out);
  if (report == "width" || report == "all") {
    std::cout << "bags=" << td.bags.size() << " width=" << td.width()
              << " tau=" << bag_multiplicity(td) << "\n";
  }
  std::cout << "wrote " << out << " (" << inst.blocks.size() << " blocks)\n";
  return kExitOk;
}

struct SolveReport {
  std::string method, optimizer;
  double dual = -kInf;
  double primal = kInf;
  double gap = 1.0;
  int iterations = 0;
  int evaluations = 0;
  bool optimal = false;
  bool warmstart = false;
  std::string tracePath;
};

double gapOf(double primal, double dual) {
  // Sign-safe primal-dual gap; clamped to [0, 1] for reporting.
  double g = (primal - dual) / std::max(1.0, std::fabs(primal));
  return std::min(1.0, std::max(0.0, g));
}

void writeTrace(const std::string& path, const std::string& header,
                const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  out << "# " << header << "\n";
  out << "iter,value,lb,ub,norm_g,mu_nnz,seconds\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.iter << "," << r.value << "," << r.lb << "," << r.ub << ","
        << r.normG << "," << r.muNnz << "," << r.seconds << "\n";
}

int runSolve(const std::string& in, const std::string& method,
             const std::string& optimizer, int k, int budget, double tol,
             bool warmstart, bool exactPrimal, const std::string& tracePath,
             int jobs, double vcutScale, bool ineqForm, bool traceSubsolve,
             const std::string& outPath) {
  Instance inst = load_instance(in);
  auto rep = validate_instance(inst);
  bool star = true;
  if (method == "v" || method == "sda") {
    // Early usage check so the error names the restriction.
    BlockSolver probe(inst);
    DualEvaluator ev(probe);
    try {
      ev.requireStarWithCommonSharedSet(method == "v" ? "V-Lagrangian dual"
                                                      : "scenario decomposition");
    } catch (const std::invalid_argument& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  (void)star;

  BlockSolver solver(inst);
  DualEvaluator eval(solver, jobs);
  SolveReport out;
  out.method = method;
  out.optimizer = optimizer;
  out.warmstart = warmstart;

  // Primal bound: brute force on demand, otherwise cross-fixing recovery
  // from the decoupled block argmins.
  std::optional<BruteForceResult> bf;
  if (exactPrimal || method == "exact") {
    bf = brute_force_opt(solver);
    if (!bf->feasible) {
      std::cerr << "instance is infeasible\n";
      return kExitInfeasible;
    }
    out.primal = bf->value;
  } else {
    auto base = eval.evalClassical(DualIterate{});
    if (base.infeasible) {
      std::cerr << "a block is infeasible; the instance has no solution\n";
      return kExitInfeasible;
    }
    std::vector<PrimalCandidate> cands;
    for (std::size_t i = 0; i < inst.blocks.size(); ++i)
      cands.push_back({static_cast<int>(i), base.blockSolutions[i].x});
    auto pb = recover_primal_bound(solver, cands);
    for (int bit : {0, 1}) {
      auto fb = fixed_shared_bound(solver, bit);
      if (fb.found && fb.value < pb.value) pb = fb;
      if (fb.found) pb.found = true;
    }
    if (!pb.found) {
      bf = brute_force_opt(solver);
      if (!bf->feasible) {
        std::cerr << "instance is infeasible\n";
        return kExitInfeasible;
      }
      out.primal = bf->value;
    } else {
      out.primal = pb.value;
    }
  }

  std::vector<TraceRow> trace;
  std::string traceHeader;
  if (method == "exact") {
    out.dual = out.primal;
    out.optimal = true;
    out.iterations = 0;
  } else if (method == "sda") {
    SDAOptions opts;
    opts.budget = budget;
    opts.tol = tol;
    auto st = run_sda(solver, opts);
    out.dual = st.LB;
    out.primal = std::min(out.primal, st.UB);
    out.iterations = st.iterations;
    out.evaluations = st.iterations * static_cast<int>(inst.blocks.size());
    out.optimal = st.UB - st.LB <= tol;
    for (std::size_t i = 0; i < st.history.size(); ++i)
      trace.push_back({static_cast<int>(i) + 1, st.history[i].first,
                       st.history[i].first, st.history[i].second, 0.0, 0, 0.0});
    traceHeader = "method=sda optimizer=- primal=" + std::to_string(out.primal);
  } else {
    DualMethod dm = method == "l"   ? DualMethod::Classical
                    : method == "m" ? DualMethod::Monomial
                                    : DualMethod::Vertex;
    MonomialFamily fam;
    if (dm == DualMethod::Monomial) {
      if (k < 1) {
        std::cerr << "usage error: --method m needs --k >= 1\n";
        return kExitUsage;
      }
      fam = build_monomial_family(inst, k);
    }
    auto fn = make_dual_fn(eval, dm, &fam, vcutScale);

    OptimizeOptions opts;
    opts.budget = budget;
    opts.tol = tol;
    opts.primalUpperBound = out.primal;
    opts.nonnegativeMu = ineqForm;

    auto runOne = [&](const DualFn& f, const OptimizeOptions& o) {
      if (optimizer == "prox") return proximal_bundle_maximize(f, o);
      if (optimizer == "level") return level_bundle_maximize(f, o);
      return subgradient_maximize(f, SubgradRule::polyak(out.primal), o);
    };

    OptimizerState st;
    if (warmstart && dm != DualMethod::Classical) {
      auto classicalFn = make_dual_fn(eval, DualMethod::Classical);
      OptimizeOptions w = opts;
      w.budget = budget / 2;
      auto ws = runOne(classicalFn, w);
      OptimizeOptions rest = opts;
      rest.budget = budget - ws.evaluations;
      rest.start = extend_for_method(ws.bestIterate, dm);
      st = runOne(fn, rest);
      st.evaluations += ws.evaluations;
      st.iterations += ws.iterations;
      st.bestValue = std::max(st.bestValue, ws.bestValue);
      int offset = static_cast<int>(ws.trace.size());
      trace = ws.trace;
      for (auto row : st.trace) {
        row.iter += offset;
        trace.push_back(row);
      }
    } else {
      st = runOne(fn, opts);
      trace = st.trace;
    }
    if (st.infeasibleDual) {
      std::cerr << "dual evaluation hit an infeasible block\n";
      return kExitInfeasible;
    }
    out.dual = st.bestValue;
    out.iterations = st.iterations;
    out.evaluations = st.evaluations;
    out.optimal = st.optimal;
    traceHeader = "method=" + method + " optimizer=" + optimizer +
                  " primal=" + std::to_string(out.primal);
  }

  out.gap = gapOf(out.primal, out.dual);
  if (!tracePath.empty() && !trace.empty()) {
    writeTrace(tracePath, traceHeader, trace);
    out.tracePath = tracePath;
  }

  ordered_json j;
  j["method"] = out.method;
  j["optimizer"] = out.method == "exact" || out.method == "sda" ? "-" : out.optimizer;
  j["dual"] = out.dual;
  j["primal"] = out.primal;
  j["gap"] = out.gap;
  j["iterations"] = out.iterations;
  j["evaluations"] = out.evaluations;
  j["optimal"] = out.optimal;
  j["warmstart"] = out.warmstart;
  if (!out.tracePath.empty()) j["trace"] = out.tracePath;
  if (!outPath.empty()) {
    std::ofstream f(outPath);
    f << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  std::cout << "dual=" << out.dual << " primal=" << out.primal << " gap="
            << 100.0 * out.gap << "%\n";
  if (traceSubsolve) {
    auto stats = solver.stats();
    std::cerr << "subsolve: " << stats.mipSolves << " block solves, "
              << stats.bnbNodes << " branch-and-bound nodes\n";
  }
  if (!out.optimal && out.method != "exact" && out.gap > tol) return kExitBudgetGap;
  return kExitOk;
}

int runVerify(const std::string& in, const std::string& suite, int k,
              const std::string& outPath) {
  Instance inst = load_instance(in);
  BlockSolver solver(inst);
  ordered_json certs = ordered_json::array();
  auto push = [&](const std::string& name, bool pass, ordered_json extra) {
    extra["check"] = name;
    extra["pass"] = pass;
    certs.push_back(std::move(extra));
  };

  int n = 0;
  for (const auto& e : inst.edges) n = std::max(n, static_cast<int>(e.pairs.size()));

  if (suite == "duality") {
    auto bf = brute_force_opt(solver);
    auto hullC = dual_oracle_hull_lp(inst, HullFamily::Classical);
    push("classical-weak-duality",
         hullC.status != HullValue::Status::Finite || hullC.value <= bf.value + 1e-7,
         {{"dual", hullC.value}, {"opt", bf.value}});
    auto fam = build_monomial_family(inst, n);
    auto hullM = dual_oracle_hull_lp(inst, HullFamily::Monomials, &fam);
    push("full-monomial-strong-duality",
         hullM.status == HullValue::Status::Finite &&
             std::fabs(hullM.value - bf.value) <= 1e-6,
         {{"dual", hullM.value}, {"opt", bf.value}});
    bool isStar = true;
    try {
      DualEvaluator ev(solver);
      ev.requireStarWithCommonSharedSet("check");
    } catch (...) {
      isStar = false;
    }
    if (isStar) {
      auto hullV = dual_oracle_hull_lp(inst, HullFamily::Vertices);
      push("vertex-strong-duality",
           hullV.status == HullValue::Status::Finite &&
               std::fabs(hullV.value - bf.value) <= 1e-6,
           {{"dual", hullV.value}, {"opt", bf.value}});
    }
  } else if (suite == "bounds") {
    auto bf = brute_force_opt(solver);
    std::vector<int> ks = k >= 1 ? std::vector<int>{k}
                                 : std::vector<int>{1, std::max(1, n / 2), n};
    for (int kk : ks) {
      auto fam = build_monomial_family(inst, kk);
      auto hull = dual_oracle_hull_lp(inst, HullFamily::Monomials, &fam);
      auto cert = check_bounds(inst, kk, hull.value, bf.value);
      ordered_json extra{{"k", kk},
                         {"t", cert.t},
                         {"factor", cert.factor},
                         {"dual", hull.value},
                         {"opt", bf.value},
                         {"ratio", cert.observedRatio},
                         {"kind", cert.kind},
                         {"tau", cert.tau}};
      if (cert.etaK) extra["eta_k"] = *cert.etaK;
      if (cert.thetaK) extra["theta_k"] = *cert.thetaK;
      push("bound-certificate", cert.pass, std::move(extra));
    }
  } else if (suite == "good") {
    TreeDecomposition td = td_from_instance(inst);
    int kk = k >= 1 ? k : 1;
    auto et = eta_theta_for_instance(inst, kk);
    push("eta-theta",
         et.eta >= 1.0 - 1e-9 && et.theta >= 1.0 - 1e-9,
         {{"k", kk}, {"eta_k", et.eta}, {"theta_k", et.theta},
          {"restricted", et.restricted}, {"tau", bag_multiplicity(td)}});
  } else if (suite == "affine") {
    push("affine-redundancy-no-gain", check_affine_redundancy(inst), {});
  } else {
    std::cerr << "usage error: unknown suite " << suite << "\n";
    return kExitUsage;
  }

  bool all = true;
  for (const auto& c : certs) all &= c.at("pass").get<bool>();
  std::string payload = certs.dump(2);
  if (!outPath.empty()) {
    std::ofstream f(outPath);
    f << payload << "\n";
  }
  std::cout << payload << "\n";
  return all ? kExitOk : 1;
}

struct TraceSummary {
  std::string method;
  double gap = 1.0;
  int iterations = 0;
  double seconds = 0.0;
};

TraceSummary readTrace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  TraceSummary s;
  std::string line;
  double primal = kInf, bestLb = -kInf;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hdr(line.substr(1));
      std::string tok;
      while (hdr >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "method") s.method = val;
        if (key == "primal") primal = std::stod(val);
      }
      continue;
    }
    if (line.rfind("iter,", 0) == 0) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (...) {
        throw std::runtime_error("malformed trace row in " + path + ": " + line);
      }
    }
    if (cells.size() != 7)
      throw std::runtime_error("malformed trace row in " + path + ": " + line);
    ++rows;
    s.iterations = static_cast<int>(cells[0]);
    bestLb = std::max(bestLb, cells[2]);
    s.seconds = cells[6];
  }
  if (rows == 0) throw std::runtime_error("trace has no rows: " + path);
  if (s.method.empty()) s.method = path;
  s.gap = gapOf(primal, bestLb);
  return s;
}

int runReport(const std::vector<std::string>& traces, const std::string& csvOut) {
  std::map<std::string, std::vector<TraceSummary>> byMethod;
  std::vector<std::string> order;
  for (const auto& t : traces) {
    auto s = readTrace(t);
    if (!byMethod.count(s.method)) order.push_back(s.method);
    byMethod[s.method].push_back(s);
  }
  std::ostringstream csv;
  csv << "method,mean_gap,mean_iterations,mean_seconds,traces\n";
  std::cout << std::left << std::setw(10) << "method" << std::right
            << std::setw(12) << "gap%" << std::setw(14) << "iterations"
            << std::setw(12) << "seconds" << std::setw(10) << "traces" << "\n";
  for (const auto& m : order) {
    const auto& v = byMethod[m];
    double g = 0, it = 0, sec = 0;
    for (const auto& s : v) {
      g += s.gap;
      it += s.iterations;
      sec += s.seconds;
    }
    g /= v.size();
    it /= v.size();
    sec /= v.size();
    std::cout << std::left << std::setw(10) << m << std::right << std::setw(12)
              << std::fixed << std::setprecision(2) << 100 * g << std::setw(14)
              << std::setprecision(1) << it << std::setw(12)
              << std::setprecision(3) << sec << std::setw(10) << v.size()
              << "\n";
    csv << m << "," << 100 * g << "," << it << "," << sec << "," << v.size()
        << "\n";
  }
  if (!csvOut.empty()) {
    std::ofstream f(csvOut);
    f << csv.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decomposable Lagrangian duals for block-structured mixed-binary programs"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate an instance file");
  std::string genClass = "star-stab", genOut = "instance.json";
  std::uint64_t seed = 1;
  int blocks = 4, nodes = 20, shared = 7, nBin = 3, nCont = 1;
  double densityLo = 0.1, densityHi = 0.15;
  gen->add_option("--class", genClass,
                  "star-stab|path-stab|packing|covering|canned:<name>");
  gen->add_option("--seed", seed, "RNG seed (DECOMPDUAL_SEED overrides)");
  gen->add_option("--out", genOut, "output instance path")->required();
  gen->add_option("--blocks", blocks, "number of blocks");
  gen->add_option("--nodes", nodes, "nodes per stable-set block");
  gen->add_option("--shared", shared, "coupled variables per edge");
  gen->add_option("--density-lo", densityLo, "graph density lower bound");
  gen->add_option("--density-hi", densityHi, "graph density upper bound");
  gen->add_option("--nbin", nBin, "binaries per packing/covering block");
  gen->add_option("--ncont", nCont, "continuous vars per packing/covering block");

  // decompose
  auto* dec = app.add_subcommand("decompose", "tree-decompose a flat MIP");
  std::string decIn, decOut = "instance.json", decReport;
  dec->add_option("--in", decIn, "flat MIP json")->required();
  dec->add_option("--out", decOut, "output instance path");
  dec->add_option("--report", decReport, "width: print bag statistics");

  // solve
  auto* sol = app.add_subcommand("solve", "run a dual method under a budget");
  std::string solIn, solMethod = "l", solOpt = "prox", solTrace, solOut;
  int solK = 0, budget = 200, jobs = 1;
  double tol = 1e-6, vcutScale = 2.0;
  bool warmstart = false, exactPrimal = false, ineqForm = false,
       traceSubsolve = false;
  sol->add_option("--in", solIn, "instance json")->required();
  sol->add_option("--method", solMethod, "l|m|v|sda|exact");
  sol->add_option("--optimizer", solOpt, "subgrad|prox|level");
  sol->add_option("--k", solK, "monomial level for --method m");
  sol->add_option("--budget", budget, "evaluation budget");
  sol->add_option("--tol", tol, "termination tolerance");
  sol->add_option("--jobs", jobs, "parallel block solves");
  sol->add_option("--vcut-scale", vcutScale, "vertex cut scaling factor");
  sol->add_option("--trace", solTrace, "trace CSV path");
  sol->add_option("--out", solOut, "report JSON path");
  sol->add_option("--seed", seed, "recorded for reproducibility");
  sol->add_flag("--warmstart", warmstart, "half-budget classical phase first");
  sol->add_flag("--exact-primal", exactPrimal, "brute-force primal bound");
  sol->add_flag("--ineq-form", ineqForm, "one-sided multipliers (mu >= 0)");
  sol->add_flag("--trace-subsolve", traceSubsolve, "dump block-solver statistics");

  // verify
  auto* ver = app.add_subcommand("verify", "run oracle-backed certificates");
  std::string verIn, verSuite = "duality", verOut;
  int verK = 0;
  ver->add_option("--in", verIn, "instance json")->required();
  ver->add_option("--suite", verSuite, "duality|bounds|good|affine");
  ver->add_option("--k", verK, "monomial level");
  ver->add_option("--out", verOut, "certificate JSON path");

  // report
  auto* repc = app.add_subcommand("report", "summarize trace CSVs");
  std::vector<std::string> traceFiles;
  std::string reportCsv;
  repc->add_option("traces", traceFiles, "trace files")->required();
  repc->add_option("--csv", reportCsv, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed())
      return runGenerate(genClass, seed, genOut, blocks, nodes, shared, densityLo,
                         densityHi, nBin, nCont);
    if (dec->parsed()) return runDecompose(decIn, decOut, decReport);
    if (sol->parsed())
      return runSolve(solIn, solMethod, solOpt, solK, budget, tol, warmstart,
                      exactPrimal, solTrace, jobs, vcutScale, ineqForm,
                      traceSubsolve, solOut);
    if (ver->parsed()) return runVerify(verIn, verSuite, verK, verOut);
    if (repc->parsed()) return runReport(traceFiles, reportCsv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
