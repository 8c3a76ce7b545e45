// otcpcc command line: class distances, CPCC, benchmarks and gradient checks.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otcpcc/bench.hpp"
#include "otcpcc/cpcc.hpp"
#include "otcpcc/gradcheck.hpp"
#include "otcpcc/io.hpp"
#include "otcpcc/methods.hpp"
#include "otcpcc/trees.hpp"

namespace fs = std::filesystem;
using namespace otcpcc;

namespace {

struct Common {
  double epsilon = 10.0;
  int max_iters = 200;
  double tol = 1e-6;
  int projections = 10;
  std::uint64_t seed = 0;

  MethodParams params() const {
    MethodParams p;
    p.sinkhorn = {epsilon, max_iters, tol};
    p.projections = projections;
    p.seed = seed;
    return p;
  }
};

void add_method_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--epsilon", c.epsilon, "Sinkhorn regularization")->capture_default_str();
  cmd->add_option("--max-iters", c.max_iters, "Sinkhorn iteration cap")->capture_default_str();
  cmd->add_option("--tol", c.tol, "Sinkhorn marginal tolerance")->capture_default_str();
  cmd->add_option("--projections", c.projections, "SWD directions")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for swd, twd and flowtree")->capture_default_str();
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(method_from_string(n));
  return out;
}

LabelTree load_tree(const std::string& path) { return parse_label_tree(io::read_file(path)); }

template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write(out);
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? " " : "") + std::to_string(xs[k]);
  return s;
}

// ---------------------------------------------------------------------------

struct DistArgs {
  std::string method, a, b, tree, class_a, class_b, plan_out;
  Common common;
};

int run_dist(const DistArgs& args) {
  const Method m = method_from_string(args.method);
  const auto a = io::read_points(args.a);
  const auto b = io::read_points(args.b);
  Distance d;
  if (m == Method::fastft) {
    if (args.tree.empty() || args.class_a.empty() || args.class_b.empty()) {
      throw DomainError("fastft needs --tree, --class-a and --class-b");
    }
    if (args.class_a == args.class_b) throw DomainError("--class-a and --class-b must differ");
    const AugmentedTree aug(load_tree(args.tree), {{args.class_a, a.weights()}, {args.class_b, b.weights()}});
    auto r = fast_flowtree(aug, args.class_a, args.class_b, a.points(), b.points());
    d.value = r.value;
    d.plans.push_back(std::move(r.plan));
  } else {
    d = compute_distance(m, a, b, args.common.params());
  }
  if (!d.converged) std::cerr << "warning: sinkhorn did not reach the marginal tolerance\n";
  std::cout << io::fmt(d.value) << '\n';
  if (!args.plan_out.empty()) {
    if (!produces_plan(m)) {
      throw DomainError("method '" + args.method + "' does not produce a single transport plan");
    }
    with_output(args.plan_out, [&](std::ostream& out) { io::write_plan(out, d.plans.front()); });
  }
  return 0;
}

struct CpccArgs {
  std::string data, tree, backend = "emd", flow = "uniform", grad_dir, pairs_out;
  unsigned threads = 1;
  Common common;
};

int run_cpcc(const CpccArgs& args) {
  const Method m = method_from_string(args.backend);
  const auto tree = load_tree(args.tree);
  const auto data = io::read_data(args.data);
  const auto batch = ClassBatch::from_samples(data.labels, data.features, flow_scheme_from_string(args.flow));
  PlanCache cache;
  RhoOptions opt;
  opt.method = args.common.params();
  opt.threads = args.threads;
  opt.cache = &cache;
  const auto res = compute_cpcc(batch, tree, m, opt, !args.grad_dir.empty());
  std::cout << "cpcc," << io::fmt(res.value) << '\n';
  if (res.degenerate) std::cerr << "warning: no spread in tree or feature distances, cpcc set to 0\n";
  with_output(args.pairs_out, [&](std::ostream& out) {
    out << "u,v,t,rho\n";
    for (const auto& p : res.pairs) out << p.u << ',' << p.v << ',' << io::fmt(p.t) << ',' << io::fmt(p.rho) << '\n';
  });
  if (res.gradients) {
    fs::create_directories(args.grad_dir);
    for (const auto& [label, g] : *res.gradients) {
      std::ofstream out(fs::path(args.grad_dir) / ("grad_" + label + ".csv"));
      if (!out) throw Error("cannot write gradients to '" + args.grad_dir + "'");
      io::write_matrix(out, g);
    }
  }
  return 0;
}

struct BenchArgs {
  std::vector<std::string> methods{"l2", "emd", "sinkhorn", "swd", "twd", "flowtree", "fastft"};
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds;
  std::string scenario = "gaussian", out;
  int repeats = 10;
  std::size_t dim = 0;
  double budget = 60.0;
  unsigned threads = 1;
  Common common;
};

int run_bench_time(BenchArgs args) {
  const bool default_grid = args.sizes.empty();
  if (default_grid) args.sizes = {128, 256, 512, 1024, 2048, 4096};
  BenchOptions opt;
  opt.dim = args.dim ? args.dim : 128;
  opt.scenario = scenario_from_string(args.scenario);
  opt.budget_seconds = args.budget;
  opt.params = args.common.params();
  const auto recs = bench_timing(parse_methods(args.methods), args.sizes, args.repeats, args.common.seed, opt);
  with_output(args.out, [&](std::ostream& out) {
    write_bench_csv(out, recs,
                    {{"study", "timing"},
                     {"scenario", args.scenario},
                     {"d", std::to_string(opt.dim)},
                     {"repeats", std::to_string(args.repeats)},
                     {"budget_seconds", io::fmt(args.budget)},
                     {"sizes", join(args.sizes) + (default_grid ? " (implementation default)" : "")},
                     {"aggregation", "mean seconds and value over trials within budget; abs_error not computed"}});
  });
  return 0;
}

int run_bench_error(BenchArgs args) {
  const bool default_sizes = args.sizes.empty();
  const bool default_seeds = args.seeds.empty();
  if (default_sizes) args.sizes = {100, 200, 500};
  if (default_seeds)
    for (std::uint64_t s = 0; s < 20; ++s) args.seeds.push_back(s);
  BenchOptions opt;
  opt.dim = args.dim ? args.dim : 2;
  opt.scenario = scenario_from_string(args.scenario);
  opt.budget_seconds = args.budget;
  opt.params = args.common.params();
  opt.threads = args.threads;
  const auto recs = bench_error(parse_methods(args.methods), args.sizes, args.seeds, opt);
  std::string seeds;
  for (std::size_t k = 0; k < args.seeds.size(); ++k) seeds += (k ? " " : "") + std::to_string(args.seeds[k]);
  with_output(args.out, [&](std::ostream& out) {
    write_bench_csv(out, recs,
                    {{"study", "error"},
                     {"scenario", args.scenario},
                     {"d", std::to_string(opt.dim) + (args.dim ? "" : " (implementation default)")},
                     {"budget_seconds", io::fmt(args.budget)},
                     {"sizes", join(args.sizes) + (default_sizes ? " (implementation default)" : "")},
                     {"seeds", seeds + (default_seeds ? " (implementation default)" : "")}});
  });
  return 0;
}

struct GradArgs {
  std::string backend = "emd";
  std::size_t n = 5, d = 3;
  double step = 1e-5, tol = 1e-3;
  Common common;
};

int run_gradcheck(const GradArgs& args) {
  const Method m = method_from_string(args.backend);
  const auto inst = make_gradcheck_instance(args.n, args.d, args.common.seed);
  RhoOptions opt;
  opt.method = args.common.params();
  const auto r = gradcheck(inst.batch, inst.tree, m, opt, args.step, args.tol);
  std::cout << "max_relative_error," << io::fmt(r.max_relative_error) << '\n'
            << "max_abs_error," << io::fmt(r.max_abs_error) << '\n'
            << "coordinates," << r.coordinates << '\n'
            << "tolerance," << io::fmt(r.tolerance) << '\n'
            << (r.passed ? "PASS" : "FAIL") << '\n';
  return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport class distances and CPCC"};
  app.require_subcommand(1);

  DistArgs dist;
  auto* cd = app.add_subcommand("dist", "Distance between two point sets");
  cd->add_option("--method", dist.method, "l2|emd|sinkhorn|swd|twd|flowtree|fastft")->required();
  cd->add_option("--a", dist.a, "First point-set CSV")->required();
  cd->add_option("--b", dist.b, "Second point-set CSV")->required();
  cd->add_option("--tree", dist.tree, "Label tree JSON (fastft)");
  cd->add_option("--class-a", dist.class_a, "Class of --a in the tree");
  cd->add_option("--class-b", dist.class_b, "Class of --b in the tree");
  cd->add_option("--emit-plan", dist.plan_out, "Write the plan as i,j,mass CSV");
  add_method_flags(cd, dist.common);

  CpccArgs cp;
  auto* cc = app.add_subcommand("cpcc", "CPCC of a labelled feature set against a label tree");
  cc->add_option("--data", cp.data, "CSV rows label,f0,f1,...")->required();
  cc->add_option("--tree", cp.tree, "Label tree JSON")->required();
  cc->add_option("--backend", cp.backend, "Class distance")->capture_default_str();
  cc->add_option("--flow-weights", cp.flow, "uniform|dist|inv")->capture_default_str();
  cc->add_option("--grad", cp.grad_dir, "Write dCPCC/dZ per class into this directory");
  cc->add_option("--pairs", cp.pairs_out, "Pair table destination (default stdout)");
  cc->add_option("--threads", cp.threads, "Worker threads for class pairs")->capture_default_str();
  add_method_flags(cc, cp.common);

  auto* cb = app.add_subcommand("bench", "Synthetic benchmarks");
  cb->require_subcommand(1);
  BenchArgs bt, be;
  auto* cbt = cb->add_subcommand("time", "Wall-clock time per method and size");
  cbt->add_option("--methods", bt.methods, "Methods")->delimiter(',')->capture_default_str();
  cbt->add_option("--sizes", bt.sizes, "Sample sizes")->delimiter(',');
  cbt->add_option("--repeats", bt.repeats, "Trials per size")->capture_default_str();
  cbt->add_option("--scenario", bt.scenario, "gaussian|mixture")->capture_default_str();
  cbt->add_option("--dim", bt.dim, "Dimension (default 128)");
  cbt->add_option("--budget", bt.budget, "Seconds per trial")->capture_default_str();
  cbt->add_option("--out", bt.out, "CSV destination (default stdout)");
  add_method_flags(cbt, bt.common);

  be.repeats = 1;
  auto* cbe = cb->add_subcommand("error", "Absolute error against exact EMD");
  cbe->add_option("--methods", be.methods, "Methods")->delimiter(',')->capture_default_str();
  cbe->add_option("--sizes", be.sizes, "Sample sizes")->delimiter(',');
  cbe->add_option("--seeds", be.seeds, "Data seeds")->delimiter(',');
  cbe->add_option("--scenario", be.scenario, "gaussian|mixture")->capture_default_str();
  cbe->add_option("--dim", be.dim, "Dimension (default 2)");
  cbe->add_option("--budget", be.budget, "Seconds for each exact reference")->capture_default_str();
  cbe->add_option("--threads", be.threads, "Parallel instances")->capture_default_str();
  cbe->add_option("--out", be.out, "CSV destination (default stdout)");
  add_method_flags(cbe, be.common);

  GradArgs gr;
  auto* cg = app.add_subcommand("gradcheck", "Analytic CPCC gradient against finite differences");
  cg->add_option("--backend", gr.backend, "Class distance")->capture_default_str();
  cg->add_option("--n", gr.n, "Largest class size")->capture_default_str();
  cg->add_option("--d", gr.d, "Feature dimension")->capture_default_str();
  cg->add_option("--step", gr.step, "Central-difference step")->capture_default_str();
  cg->add_option("--threshold", gr.tol, "Relative error threshold")->capture_default_str();
  add_method_flags(cg, gr.common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cd) return run_dist(dist);
    if (*cc) return run_cpcc(cp);
    if (*cbt) return run_bench_time(bt);
    if (*cbe) return run_bench_error(be);
    if (*cg) return run_gradcheck(gr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
