#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <kurastab/kurastab.hpp>

namespace ks = kurastab;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string cell(double x) { return num(x); }
std::string cell(const std::string& s) { return s; }
std::string cell(const char* s) { return s; }
template <std::integral I>
std::string cell(I i) {
  return std::to_string(i);
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ks::ValidationError("cannot write " + path.string());
    put(header);
  }

  void put(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  template <class... T>
  void row(const T&... cells) {
    put({cell(cells)...});
  }

 private:
  std::ofstream out_;
};

// Everything a subcommand needs to write its outputs and manifest.
struct Run {
  CLI::App* app = nullptr;
  std::optional<std::uint64_t> seed_flag;
  std::string out;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::uint64_t seed() const {
    if (seed_flag) return *seed_flag;
    if (const char* env = std::getenv("KURASTAB_SEED")) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw ks::ValidationError("KURASTAB_SEED is not an unsigned integer");
    }
    return 0;
  }

  fs::path out_dir() const {
    if (out.empty()) throw ks::ValidationError("--out is required");
    fs::create_directories(out);
    return out;
  }

  fs::path output(const std::string& name) {
    const fs::path p = out_dir() / name;
    outputs.push_back(p.string());
    return p;
  }

  json config() const {
    json cfg = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_single_name();
      if (name == "help" || name == "out" || name == "seed") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        cfg[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else if (!opt->get_default_str().empty()) {
        cfg[name] = opt->get_default_str();
      } else {
        cfg[name] = nullptr;
      }
    }
    return cfg;
  }

  void write_manifest(const fs::path& path) const {
    json doc = {{"subcommand", app->get_name()}, {"inputs", inputs},       {"config", config()},
                {"seed", seed()},                {"version", KURASTAB_VERSION}, {"outputs", outputs}};
    std::ofstream f(path);
    if (!f) throw ks::ValidationError("cannot write " + path.string());
    f << doc.dump(1) << '\n';
  }

  void write_manifest() const { write_manifest(fs::path(out) / "manifest.json"); }
};

void add_common(CLI::App* sub, Run& run, bool needs_out) {
  run.app = sub;
  sub->add_option("--seed", run.seed_flag, "RNG seed (falls back to $KURASTAB_SEED, then 0)");
  auto* out = sub->add_option("-o,--out", run.out, "Output directory");
  if (needs_out) out->required();
}

ks::Network load(Run& run, const std::string& path) {
  run.inputs.push_back(path);
  return ks::load_network(path);
}

void write_trace(const fs::path& path, const std::vector<ks::TraceRow>& trace) {
  CsvWriter csv(path, {"iter", "lambda2_approx", "lambda2_exact", "norm2", "norm1", "step", "feasibility",
                       "lambda2_graph", "k_sum"});
  for (const auto& r : trace) {
    csv.row(r.iter, r.lambda2_approx, r.lambda2_exact, r.norm2, r.norm1, r.step, r.feasibility, r.lambda2_graph,
            r.k_sum);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t pos; (pos = s.find(sep, start)) != std::string::npos; start = pos + 1) {
    parts.push_back(s.substr(start, pos - start));
  }
  parts.push_back(s.substr(start));
  return parts;
}

double parse_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ks::ValidationError("bad number '" + s + "' in " + what);
}

// ---------------------------------------------------------------------------
// steady-state

struct SteadyStateCmd {
  Run run;
  std::string net;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("steady-state", "Phase-locked state and cut-set/cycle decomposition");
    add_common(sub, run, true);
    sub->add_option("--net", net, "Network file (JSON, or CSV directory / edges file)")->required();
  }

  int exec() {
    const auto network = load(run, net);
    const auto fd = ks::flow_decomposition_error(network);
    const Eigen::VectorXd residual = ks::steady_state_residual(network, fd.state.theta);
    const Eigen::VectorXd dtheta = ks::edge_phase_differences(network, fd.state.theta);

    CsvWriter nodes(run.output("nodes.csv"), {"node", "label", "omega", "theta", "phi", "residual"});
    for (std::size_t i = 0; i < network.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      nodes.row(i, network.label(i), network.omega()[k], fd.state.theta[k], fd.dc.phi[k], residual[k]);
    }
    CsvWriter edges(run.output("edges.csv"), {"edge", "u", "v", "k", "dtheta", "sin_dtheta", "cos_dtheta", "dphi",
                                              "cycle_residual"});
    for (std::size_t e = 0; e < network.edge_count(); ++e) {
      const auto k = static_cast<Eigen::Index>(e);
      const auto& edge = network.edges()[e];
      edges.row(e, edge.u, edge.v, edge.k, dtheta[k], std::sin(dtheta[k]), std::cos(dtheta[k]), fd.dc.beta_cut[k],
                fd.cycle_residual[k]);
    }
    run.write_manifest();
    std::cout << "iterations," << fd.state.iterations << "\nresidual_inf," << num(fd.state.residual_inf)
              << "\nrmse," << num(fd.rmse) << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------------------
// lambda2

struct Lambda2Cmd {
  Run run;
  std::string net;
  std::optional<double> damping, inertia;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("lambda2", "Graph, state and approximate algebraic connectivity");
    add_common(sub, run, false);
    sub->add_option("--net", net, "Network file")->required();
    auto* d = sub->add_option("--damping", damping, "D for the second-order exponent mu2+");
    auto* m = sub->add_option("--inertia", inertia, "M for the second-order exponent mu2+");
    d->needs(m);
    m->needs(d);
  }

  int exec() {
    const auto network = load(run, net);
    json out;
    const auto lap = ks::build_graph_laplacian(network);
    out["lambda2_graph"] = ks::eig_laplacian(lap.laplacian).lambda2;
    const auto state = ks::solve_steady_state(network);
    const auto exact = ks::exact_state_spectrum(network, state);
    out["lambda2_exact"] = exact.lambda2;
    out["degeneracy_gap"] = exact.degeneracy_gap;
    out["r"] = ks::order_parameter(state.theta);
    try {
      out["lambda2_approx"] = ks::evaluate_approx(network, ks::QuadFormCache(network, lap)).spectrum.lambda2;
    } catch (const ks::NumericalError&) {
      out["lambda2_approx"] = std::numeric_limits<double>::quiet_NaN();  // needs destressing
    }
    if (damping) {
      const auto mu = ks::second_order_spectrum(exact.lambda2, *damping, *inertia).first;
      out["mu2_plus_re"] = mu.real();
      out["mu2_plus_im"] = mu.imag();
    }
    for (const char* key : {"lambda2_graph", "lambda2_exact", "lambda2_approx", "degeneracy_gap", "r", "mu2_plus_re",
                            "mu2_plus_im"}) {
      if (out.contains(key)) std::cout << key << ',' << num(out[key].get<double>()) << '\n';
    }
    if (exact.unstable) std::cerr << "warning: steady state has negative edge weights\n";
    if (!run.out.empty()) {
      std::ofstream(run.output("lambda2.json")) << out.dump(1) << '\n';
      run.write_manifest();
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// grad-check

struct GradCheckCmd {
  Run run;
  std::string net;
  int random = 50;
  std::size_t n_min = 5, n_max = 50;
  double h = 1e-6;
  double tol = 1e-5;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("grad-check", "Compare analytic gradients with central finite differences");
    add_common(sub, run, false);
    auto* n = sub->add_option("--net", net, "Check a single network instead of random instances");
    sub->add_option("--random", random, "Number of random instances")->capture_default_str()->excludes(n);
    sub->add_option("--n-min", n_min, "Smallest random instance")->capture_default_str();
    sub->add_option("--n-max", n_max, "Largest random instance")->capture_default_str();
    sub->add_option("--step", h, "Finite-difference step")->capture_default_str();
    sub->add_option("--tol", tol, "Largest acceptable relative error")->capture_default_str();
  }

  static double lambda2_approx(const ks::Network& net) {
    return ks::evaluate_approx(net, ks::QuadFormCache(net, ks::build_graph_laplacian(net))).spectrum.lambda2;
  }

  std::pair<double, double> check(const ks::Network& net) const {
    const auto lap = ks::build_graph_laplacian(net);
    const ks::QuadFormCache cache(net, lap);
    const auto eval = ks::evaluate_approx(net, cache);
    const Eigen::VectorXd g_omega = ks::grad_lambda2_omega(net, cache, eval.spectrum.v2);
    const Eigen::VectorXd g_k = ks::grad_lambda2_coupling(net, lap, eval.spectrum.v2);

    Eigen::VectorXd fd_omega(g_omega.size()), fd_k(g_k.size());
    for (Eigen::Index i = 0; i < fd_omega.size(); ++i) {
      Eigen::VectorXd w = net.omega();
      w[i] += h;
      const double up = ks::evaluate_approx(net, cache, w).spectrum.lambda2;
      w[i] -= 2 * h;
      fd_omega[i] = (up - ks::evaluate_approx(net, cache, w).spectrum.lambda2) / (2 * h);
    }
    for (Eigen::Index e = 0; e < fd_k.size(); ++e) {
      Eigen::VectorXd k = net.couplings();
      k[e] += h;
      const double up = lambda2_approx(net.with_couplings(k));
      k[e] -= 2 * h;
      fd_k[e] = (up - lambda2_approx(net.with_couplings(k))) / (2 * h);
    }
    const auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      return (a - b).norm() / std::max(b.norm(), 1e-300);
    };
    return {rel(g_omega, fd_omega), rel(g_k, fd_k)};
  }

  int exec() {
    if (n_min < 2 || n_max < n_min) throw ks::ValidationError("need 2 <= n-min <= n-max");
    std::vector<ks::Network> nets;
    if (!net.empty()) {
      nets.push_back(load(run, net));
    } else {
      std::mt19937_64 rng(run.seed());
      std::uniform_int_distribution<std::size_t> size(n_min, n_max);
      std::uniform_real_distribution<double> stress(0.2, 0.8);
      while (static_cast<int>(nets.size()) < random) {
        const auto n = size(rng);
        auto candidate = ks::scale_to_stress(ks::generate_er(n, std::min(1.0, 4.0 / static_cast<double>(n)), rng()),
                                             stress(rng));
        const auto lap = ks::build_graph_laplacian(candidate);
        // Finite differences are meaningless at a repeated eigenvalue.
        if (ks::evaluate_approx(candidate, ks::QuadFormCache(candidate, lap)).spectrum.degeneracy_gap > 1e-4) {
          nets.push_back(std::move(candidate));
        }
      }
    }

    std::optional<CsvWriter> csv;
    if (!run.out.empty()) csv.emplace(run.output("grad_check.csv"), std::vector<std::string>{"instance", "n", "edges", "omega_rel_err", "coupling_rel_err"});
    std::cout << "instance,n,edges,omega_rel_err,coupling_rel_err\n";
    double worst = 0.0;
    for (std::size_t i = 0; i < nets.size(); ++i) {
      const auto [eo, ek] = check(nets[i]);
      worst = std::max({worst, eo, ek});
      std::cout << i << ',' << nets[i].size() << ',' << nets[i].edge_count() << ',' << num(eo) << ',' << num(ek)
                << '\n';
      if (csv) csv->row(i, nets[i].size(), nets[i].edge_count(), eo, ek);
    }
    if (!run.out.empty()) run.write_manifest();
    std::cerr << "max relative error " << num(worst) << (worst < tol ? " (ok)" : " (above tolerance)") << '\n';
    return worst < tol ? 0 : 2;
  }
};

// ---------------------------------------------------------------------------
// optimize

struct OptimizeCmd {
  Run run;
  std::string net;
  std::string method = "newton";
  std::string constraint = "none";
  int max_iters = ks::OptimizerConfig{}.max_iters;
  std::optional<double> tol;
  int exact_every = 1;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("optimize", "Maximize lambda2 over frequencies or couplings");
    add_common(sub, run, true);
    sub->add_option("--net", net, "Network file")->required();
    sub->add_option("--method", method, "Search direction")
        ->check(CLI::IsMember({"gradient", "newton"}))
        ->capture_default_str();
    sub->add_option("--constraint", constraint, "none | norm:C (C with x suffix: multiple of ||omega||^2) | "
                                                "box:ALPHA:p1|p2 | coupling[:KTOTAL]")
        ->capture_default_str();
    sub->add_option("--max-iters", max_iters, "Iteration cap")->capture_default_str();
    sub->add_option("--tol", tol, "Stopping tolerance (gradient, barrier gap or KKT residual)");
    sub->add_option("--exact-every", exact_every, "Solve the exact state every k iterations (0: never)")
        ->capture_default_str();
  }

  int exec() {
    auto network = load(run, net);
    ks::OptimizerConfig cfg;
    cfg.method = method == "gradient" ? ks::Method::gradient : ks::Method::newton;
    cfg.max_iters = max_iters;
    cfg.exact_every = exact_every;
    if (tol) cfg.tol_grad = cfg.barrier_tol = cfg.pdip_tol = *tol;

    const auto parts = split(constraint, ':');
    const std::string& kind = parts.front();
    ks::OptimizerResult result{network};
    if (kind == "none" && parts.size() == 1) {
      result = ks::maximize_unconstrained(network, cfg);
    } else if (kind == "norm" && parts.size() == 2) {
      std::string c = parts[1];
      const bool relative = !c.empty() && c.back() == 'x';
      if (relative) c.pop_back();
      double bound = parse_number(c, "--constraint");
      if (relative) bound *= (network.omega().array() - network.omega().mean()).matrix().squaredNorm();
      result = ks::maximize_norm_constrained(network, bound, cfg);
    } else if (kind == "box" && parts.size() == 3 && (parts[2] == "p1" || parts[2] == "p2")) {
      const auto problem = parts[2] == "p1" ? ks::GridProblem::P1 : ks::GridProblem::P2;
      result = ks::maximize_grid_constrained(network, problem, parse_number(parts[1], "--constraint"), cfg);
    } else if (kind == "coupling" && parts.size() <= 2) {
      double budget = network.couplings().sum();
      if (parts.size() == 2) {
        budget = parse_number(parts[1], "--constraint");
        if (!(budget > 0.0)) throw ks::ValidationError("coupling budget must be positive");
        network = network.with_couplings(network.couplings() * (budget / network.couplings().sum()));
      }
      result = ks::maximize_coupling(network, budget, cfg);
    } else {
      throw ks::ValidationError("unrecognized --constraint '" + constraint + "'");
    }

    write_trace(run.output("trace.csv"), result.trace);
    ks::save_network_json(result.net, run.output("optimized.json"));
    run.write_manifest();

    const auto& first = result.trace.front();
    const auto& last = result.trace.back();
    std::cout << "status," << ks::to_string(result.status) << "\niterations," << result.iterations
              << "\nlambda2_approx_start," << num(first.lambda2_approx) << "\nlambda2_approx_final,"
              << num(last.lambda2_approx) << "\nlambda2_exact_final," << num(ks::exact_lambda2(result.net)) << '\n';
    if (result.status != ks::OptimizerStatus::converged) {
      std::cerr << "optimizer did not converge (" << ks::to_string(result.status) << "); outputs hold the last iterate\n";
      return 2;
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateCmd {
  Run run;
  std::string net;
  std::string model = "first";
  ks::SimConfig cfg;
  int trials = 1;
  int stride = 0;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("simulate", "Disturbance response by RK4 integration");
    add_common(sub, run, true);
    sub->add_option("--net", net, "Network file")->required();
    sub->add_option("--model", model, "first or second order")
        ->check(CLI::IsMember({"first", "second"}))
        ->capture_default_str();
    sub->add_option("--dt", cfg.dt, "Integration step")->capture_default_str();
    sub->add_option("--t-end", cfg.t_end, "Horizon")->capture_default_str();
    sub->add_option("--sigma", cfg.disturbance_sigma, "Disturbance standard deviation (rad)")->capture_default_str();
    sub->add_option("--trials", trials, "Number of disturbance trials")->capture_default_str();
    sub->add_option("--inertia", cfg.inertia, "M (second order)")->capture_default_str();
    sub->add_option("--damping", cfg.damping, "D (second order)")->capture_default_str();
    sub->add_option("--sample-every", cfg.sample_every, "Integration steps per recorded sample")
        ->capture_default_str();
    sub->add_option("--stride", stride, "Write phases every k-th sample (0: none)")->capture_default_str();
  }

  int exec() {
    const auto network = load(run, net);
    if (trials < 1) throw ks::ValidationError("--trials must be at least 1");
    if (stride < 0) throw ks::ValidationError("--stride must be non-negative");
    cfg.model = model == "first" ? ks::Model::first_order : ks::Model::second_order;
    cfg.seed = run.seed();
    cfg.keep_theta = stride > 0;
    const auto response = ks::disturbance_response(network, cfg, trials);

    for (int k = 0; k < trials; ++k) {
      const auto& tr = response.traces[static_cast<std::size_t>(k)];
      std::vector<std::string> header{"t", "epsilon"};
      if (stride > 0) {
        for (std::size_t i = 0; i < network.size(); ++i) header.push_back("theta_" + std::to_string(i));
      }
      CsvWriter csv(run.output("trace_" + std::to_string(k) + ".csv"), header);
      for (std::size_t s = 0; s < tr.t.size(); ++s) {
        std::vector<std::string> cells{num(tr.t[s]), num(tr.epsilon[s])};
        if (stride > 0) {
          if (s % static_cast<std::size_t>(stride) != 0) continue;
          for (const double th : tr.theta[s]) cells.push_back(num(th));
        }
        csv.put(cells);
      }
    }
    CsvWriter rates(run.output("rates.csv"), {"trial", "rate"});
    for (int k = 0; k < trials; ++k) rates.row(k, response.rates[static_cast<std::size_t>(k)]);
    run.write_manifest();
    std::cout << "median_rate," << num(response.median_rate) << '\n';
    return 0;
  }
};

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeCmd {
  Run run;
  std::string study;
  std::string net;
  // rmse / ensemble
  std::size_t n = 50;
  double p = 0.1;
  int samples = 20;
  std::vector<double> norms{1, 2, 3, 4, 5, 6, 7, 8};
  int instances = 100;
  double omega_norm = 3.0;
  double c_fraction = 0.99;
  int exact_every = 0;
  // contrast
  std::size_t module_size = 15;
  double p_in = 0.2;
  std::size_t bridges = 1;
  std::uint64_t graph_seed = 1;
  double stress = 0.97;
  int directions = 30;
  // alignment
  int bins = 10;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("analyze", "Studies of optimized frequency assignments");
    add_common(sub, run, true);
    sub->add_option("--study", study, "rmse | ensemble | contrast | alignment")
        ->required()
        ->check(CLI::IsMember({"rmse", "ensemble", "contrast", "alignment"}));
    sub->add_option("--net", net, "Network file (alignment)");
    sub->add_option("--n", n, "ER size (rmse, ensemble)")->capture_default_str();
    sub->add_option("--p", p, "ER edge probability (rmse, ensemble)")->capture_default_str();
    sub->add_option("--samples", samples, "Graphs per norm (rmse)")->capture_default_str();
    sub->add_option("--norms", norms, "||omega||_2 values (rmse)")->capture_default_str();
    sub->add_option("--instances", instances, "Ensemble size")->capture_default_str();
    sub->add_option("--omega-norm", omega_norm, "||omega_0||_2 before destressing (ensemble)")->capture_default_str();
    sub->add_option("--c-fraction", c_fraction, "c as a fraction of ||omega_0||^2 (ensemble)")->capture_default_str();
    sub->add_option("--exact-every", exact_every, "Exact-state trace cadence (ensemble)")->capture_default_str();
    sub->add_option("--module-size", module_size, "Nodes per module (contrast)")->capture_default_str();
    sub->add_option("--p-in", p_in, "Intra-module edge probability (contrast)")->capture_default_str();
    sub->add_option("--bridges", bridges, "Inter-module edges (contrast)")->capture_default_str();
    sub->add_option("--graph-seed", graph_seed, "Two-module graph seed (contrast)")->capture_default_str();
    sub->add_option("--stress", stress, "Largest |dphi| of the stressed assignment (contrast)")->capture_default_str();
    sub->add_option("--directions", directions, "Random search directions (contrast)")->capture_default_str();
    sub->add_option("--bins", bins, "Eigen-index bins (alignment)")->capture_default_str();
  }

  int rmse() {
    CsvWriter raw(run.output("rmse.csv"), {"norm", "sample", "rmse"});
    CsvWriter mean(run.output("rmse_mean.csv"), {"norm", "mean", "count"});
    for (const double norm : norms) {
      double sum = 0.0;
      int count = 0;
      for (int s = 0; s < samples; ++s) {
        const auto base = ks::generate_er(n, p, run.seed() + static_cast<std::uint64_t>(s));
        double value = std::numeric_limits<double>::quiet_NaN();
        try {
          value = ks::flow_decomposition_error(base.with_omega(base.omega().normalized() * norm)).rmse;
          sum += value;
          ++count;
        } catch (const ks::NumericalError&) {
          // no phase-locked state at this load
        }
        raw.row(norm, s, value);
      }
      mean.row(norm, count ? sum / count : std::numeric_limits<double>::quiet_NaN(), count);
    }
    return 0;
  }

  int ensemble() {
    ks::EnsembleConfig cfg;
    cfg.instances = instances;
    cfg.n = n;
    cfg.p = p;
    cfg.omega_norm = omega_norm;
    cfg.c_fraction = c_fraction;
    cfg.seed = run.seed();
    cfg.optimizer.exact_every = exact_every;
    const auto s = ks::run_property_ensemble(cfg);

    const auto& lr = s.lambda2_vs_r;
    CsvWriter l2r(run.output("lambda2_r.csv"),
                  {"instance", "lambda2_before", "lambda2_after", "r_before", "r_after", "d_lambda2", "d_r"});
    for (Eigen::Index i = 0; i < lr.d_r.size(); ++i) {
      l2r.row(i, lr.lambda2_before[i], lr.lambda2_after[i], lr.r_before[i], lr.r_after[i], lr.d_lambda2[i], lr.d_r[i]);
    }
    CsvWriter nb(run.output("neighbor.csv"), {"instance", "correlation", "fraction_negative"});
    for (Eigen::Index i = 0; i < s.neighbor_correlation.size(); ++i) {
      nb.row(i, s.neighbor_correlation[i], s.fraction_negative[i]);
    }

    // Pooled phase-difference changes over all instances.
    std::vector<double> changes;
    for (const auto& inst : s.instances) {
      const auto h = ks::phase_diff_histogram(ks::solve_steady_state(inst.before), ks::solve_steady_state(inst.after),
                                              inst.before);
      changes.insert(changes.end(), h.changes.begin(), h.changes.end());
    }
    const Eigen::VectorXd all = Eigen::Map<Eigen::VectorXd>(changes.data(), static_cast<Eigen::Index>(changes.size()));
    const double m = all.size() && all.cwiseAbs().maxCoeff() > 0.0 ? all.cwiseAbs().maxCoeff() : 1.0;
    const int nbins = 21;
    std::vector<int> counts(nbins, 0);
    for (const double c : changes) {
      const int b = std::clamp(static_cast<int>(std::floor((c + m) / (2 * m) * nbins)), 0, nbins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    CsvWriter hist(run.output("phase_hist.csv"), {"lo", "hi", "count"});
    for (int b = 0; b < nbins; ++b) {
      hist.row(-m + 2 * m * b / nbins, -m + 2 * m * (b + 1) / nbins, counts[static_cast<std::size_t>(b)]);
    }

    CsvWriter align(run.output("alignment.csv"),
                    {"bin", "optimized_mean", "optimized_std", "random_mean", "random_std"});
    for (Eigen::Index b = 0; b < s.optimized_alignment.mean.size(); ++b) {
      align.row(b, s.optimized_alignment.mean[b], s.optimized_alignment.stddev[b], s.random_alignment.mean[b],
                s.random_alignment.stddev[b]);
    }

    json summary = {{"lambda2_r_correlation", lr.correlation ? json(*lr.correlation) : json(nullptr)},
                    {"neighbor_correlation_mean", s.neighbor_correlation_mean},
                    {"pooled_fraction_negative", s.pooled_fraction_negative},
                    {"optimized_alignment", std::vector<double>(s.optimized_alignment.mean.begin(), s.optimized_alignment.mean.end())},
                    {"random_alignment", std::vector<double>(s.random_alignment.mean.begin(), s.random_alignment.mean.end())}};
    std::ofstream(run.output("summary.json")) << summary.dump(1) << '\n';
    std::cout << "lambda2_r_correlation," << (lr.correlation ? num(*lr.correlation) : "nan")
              << "\nneighbor_correlation_mean," << num(s.neighbor_correlation_mean) << "\npooled_fraction_negative,"
              << num(s.pooled_fraction_negative) << '\n';
    return 0;
  }

  int contrast() {
    const auto graph = ks::generate_two_module(module_size, p_in, bridges, graph_seed);
    ks::ContrastSearch search;
    search.bridge_stress = stress;
    search.random_directions = directions;
    search.seed = run.seed();
    const auto c = ks::two_module_contrast(graph, module_size, search);
    ks::save_network_json(c.stressed, run.output("stressed.json"));
    ks::save_network_json(c.relaxed, run.output("relaxed.json"));
    json summary = {{"found", c.found},
                    {"r_stressed", c.r_stressed},
                    {"r_relaxed", c.r_relaxed},
                    {"lambda2_stressed", c.lambda2_stressed},
                    {"lambda2_relaxed", c.lambda2_relaxed}};
    std::ofstream(run.output("summary.json")) << summary.dump(1) << '\n';
    std::cout << "found," << (c.found ? "true" : "false") << "\nr_stressed," << num(c.r_stressed) << "\nr_relaxed,"
              << num(c.r_relaxed) << "\nlambda2_stressed," << num(c.lambda2_stressed) << "\nlambda2_relaxed,"
              << num(c.lambda2_relaxed) << '\n';
    if (!c.found) std::cerr << "no pair with lower r and higher lambda2 found\n";
    return c.found ? 0 : 2;
  }

  int alignment() {
    if (net.empty()) throw ks::ValidationError("--net is required for the alignment study");
    const auto network = load(run, net);
    const auto a = ks::alignment_spectrum(network, network.omega(), bins);
    const auto s = ks::eig_laplacian(ks::build_graph_laplacian(network).laplacian);
    CsvWriter proj(run.output("projections.csv"), {"index", "eigenvalue", "projection"});
    for (Eigen::Index i = 0; i < a.projections.size(); ++i) proj.row(i, s.eigenvalues[i], a.projections[i]);
    CsvWriter binned(run.output("bins.csv"), {"bin", "sum"});
    for (Eigen::Index b = 0; b < a.bins.size(); ++b) binned.row(b, a.bins[b]);
    const auto nb = ks::neighbor_correlation(network, network.omega());
    json summary = {{"neighbor_correlation", nb.correlation ? json(*nb.correlation) : json(nullptr)},
                    {"bins", std::vector<double>(a.bins.begin(), a.bins.end())}};
    std::ofstream(run.output("summary.json")) << summary.dump(1) << '\n';
    return 0;
  }

  int exec() {
    int code = 0;
    if (study == "rmse") code = rmse();
    if (study == "ensemble") code = ensemble();
    if (study == "contrast") code = contrast();
    if (study == "alignment") code = alignment();
    run.write_manifest();
    return code;
  }
};

// ---------------------------------------------------------------------------
// generate

struct GenerateCmd {
  Run run;
  std::vector<double> er, two_module;
  std::optional<std::size_t> tree;
  std::optional<double> omega_norm, stress;
  bool split_modules = false;
  bool destress = false;
  std::string file;

  void setup(CLI::App& app) {
    auto* sub = app.add_subcommand("generate", "Random test networks");
    run.app = sub;
    sub->add_option("--seed", run.seed_flag, "RNG seed (falls back to $KURASTAB_SEED, then 0)");
    auto* e = sub->add_option("--er", er, "Erdos-Renyi: N P")->expected(2);
    auto* m = sub->add_option("--two-module", two_module, "Two ER modules: N_PER_MODULE P_IN BRIDGES")->expected(3);
    auto* t = sub->add_option("--tree", tree, "Random recursive tree: N");
    e->excludes(m, t);
    m->excludes(t);
    sub->add_flag("--split-modules", split_modules, "Two-module only: omega = +1 / -1 by module")->needs(m);
    auto* norm = sub->add_option("--omega-norm", omega_norm, "Scale omega to this Euclidean norm");
    sub->add_option("--stress", stress, "Scale omega so the largest |dphi| equals this")->excludes(norm);
    sub->add_flag("--destress", destress, "Scale omega down until every |dphi| < 1");
    sub->add_option("-o,--out", file, "Output network JSON")->required();
  }

  int exec() {
    const auto seed = run.seed();
    std::optional<ks::Network> net;
    if (er.size() == 2) {
      if (er[0] < 2 || er[0] != std::floor(er[0])) throw ks::ValidationError("--er N must be an integer >= 2");
      net = ks::generate_er(static_cast<std::size_t>(er[0]), er[1], seed);
    } else if (two_module.size() == 3) {
      if (two_module[0] != std::floor(two_module[0]) || two_module[2] != std::floor(two_module[2])) {
        throw ks::ValidationError("--two-module sizes must be integers");
      }
      const auto per = static_cast<std::size_t>(two_module[0]);
      net = ks::generate_two_module(per, two_module[1], static_cast<std::size_t>(two_module[2]), seed);
      if (split_modules) {
        Eigen::VectorXd w(static_cast<Eigen::Index>(2 * per));
        for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = ks::module_of(static_cast<std::size_t>(i), per) == 0 ? 1.0 : -1.0;
        net = net->with_omega(w);
      }
    } else if (tree) {
      net = ks::generate_tree(*tree, seed);
    } else {
      throw ks::ValidationError("choose one of --er, --two-module, --tree");
    }
    if (omega_norm) {
      if (!(*omega_norm >= 0.0)) throw ks::ValidationError("--omega-norm must be non-negative");
      const double current = net->omega().norm();
      if (current > 0.0) net = net->with_omega(net->omega() * (*omega_norm / current));
    }
    if (stress) net = ks::scale_to_stress(*net, *stress);
    if (destress) net = ks::destress(*net);

    const fs::path path(file);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    ks::save_network_json(*net, path);
    run.outputs.push_back(path.string());
    fs::path manifest = path;
    manifest.replace_extension(".manifest.json");
    run.write_manifest(manifest);
    std::cout << "nodes," << net->size() << "\nedges," << net->edge_count() << '\n';
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchronization stability of oscillator networks"};
  app.set_version_flag("--version", KURASTAB_VERSION);
  app.require_subcommand(1);

  SteadyStateCmd steady;
  Lambda2Cmd lambda2;
  GradCheckCmd grad;
  OptimizeCmd optimize;
  SimulateCmd simulate;
  AnalyzeCmd analyze;
  GenerateCmd generate;
  steady.setup(app);
  lambda2.setup(app);
  grad.setup(app);
  optimize.setup(app);
  simulate.setup(app);
  analyze.setup(app);
  generate.setup(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (steady.run.app->parsed()) return steady.exec();
    if (lambda2.run.app->parsed()) return lambda2.exec();
    if (grad.run.app->parsed()) return grad.exec();
    if (optimize.run.app->parsed()) return optimize.exec();
    if (simulate.run.app->parsed()) return simulate.exec();
    if (analyze.run.app->parsed()) return analyze.exec();
    if (generate.run.app->parsed()) return generate.exec();
  } catch (const ks::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ks::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
