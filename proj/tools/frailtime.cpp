// frailtime: fit | survival | profile1d | simulate

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "frailtime/frailtime.hpp"

namespace ft = frailtime;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

// Bad flag values are usage errors, distinct from bad data.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = ft::detail::parse_double(item);
    if (!v) throw UsageError(flag + ": '" + item + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError(flag + " is empty");
  return out;
}

std::array<double, 5> parse_range(const std::string& text, const std::string& flag) {
  const auto v = parse_list(text, flag);
  if (v.size() != 5) throw UsageError(flag + " needs 5 comma-separated values (phi,beta,mu1,nu,gamma)");
  std::array<double, 5> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

ft::TimeGrid parse_grid(const std::string& text) {
  try {
    return ft::TimeGrid(parse_list(text, "--time-axis"));
  } catch (const std::invalid_argument& ex) {
    throw UsageError(std::string("--time-axis: ") + ex.what());
  }
}

ft::FormulaSpec parse_formula_flag(const std::string& text) {
  try {
    return ft::parse_formula(text);
  } catch (const ft::DataError& ex) {
    throw UsageError(std::string("--formula: ") + ex.what());
  }
}

ft::ParamBounds make_bounds(const std::array<double, 5>& lo, const std::array<double, 5>& hi,
                            const ft::ParamLayout& layout) {
  try {
    return ft::expand_bounds(lo, hi, layout);
  } catch (const std::invalid_argument& ex) {
    throw UsageError(std::string("parameter ranges: ") + ex.what());
  }
}

// FRAILTIME_THREADS caps the worker count; small problems stay single-threaded.
std::size_t thread_count(std::size_t units) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (units < 2000) n = 1;
  if (const char* env = std::getenv("FRAILTIME_THREADS")) {
    const auto cap = ft::detail::parse_double(env);
    if (!cap || *cap < 1) throw UsageError("FRAILTIME_THREADS must be a positive integer");
    n = std::min(n, static_cast<std::size_t>(*cap));
  }
  return n;
}

// Data-level invalid_argument (e.g. a time before a_0) is a data error.
template <class F>
auto as_data(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& ex) {
    throw ft::DataError(ex.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path() && !fs::exists(p.parent_path()))
    throw ft::DataError("output directory '" + p.parent_path().string() + "' does not exist");
  ft::write_text_file(path, text);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

void print_summary(const ft::FitResult& r, std::ostream& os) {
  const std::string rule(79, '-');
  const auto& lay = r.layout();
  os << "Output of the Adapted Paik time-dependent frailty model\n" << rule << '\n';
  os << "Call:  " << r.formula.to_string() << '\n';
  os << "with cluster variable ' " << r.formula.cluster << " ' ( " << r.group_names.size() << " clusters).\n";
  os << rule << '\n';
  os << "Log-likelihood:             " << fixed(r.loglik, 7) << '\n';
  os << "AIC:                        " << fixed(r.aic, 8) << '\n';
  os << "Status of the algorithm:    " << (r.converged ? "TRUE" : "FALSE");
  if (r.converged) os << " (Convergence in  " << r.n_run << "  runs).\n";
  else os << " (no convergence after  " << r.n_run << "  runs).\n";
  os << rule << '\n';
  os << "Overall number of parameters  " << lay.size() << ",\n";
  os << "divided as (phi, betar, mu1, nu, gammak) = ( " << lay.L << " , " << lay.R << " , 1 , 1 , " << lay.L
     << " ),\n";
  os << "with: number of intervals = " << lay.L << "\n      number of regressors = " << lay.R << " .\n";
  os << rule << '\n';
  os << "Estimated regressors (standard error):\n";
  const auto off = lay.offset(ft::Category::beta);
  for (std::size_t r_ = 0; r_ < lay.R; ++r_) {
    const auto& se = r.se[off + r_];
    os << r.covariate_names[r_] << " : " << fixed(r.params[off + r_], 4) << " ("
       << (se ? fixed(*se, 3) : std::string("undefined")) << ")\n";
  }
  os << rule << '\n';
}

ft::Table load_table(const std::string& path) { return ft::read_csv(path); }

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data, formula, time_axis, range_min, range_max, out = "fit.json", plot_dir, posterior = "Z";
  std::optional<std::string> status;
  bool standardize = false, partial_sd = false;
  std::uint64_t seed = 0;
  ft::FitOptions opt;
};

int cmd_fit(const FitArgs& a) {
  const auto spec = parse_formula_flag(a.formula);
  const auto grid = parse_grid(a.time_axis);
  const auto lo = parse_range(a.range_min, "--range-min");
  const auto hi = parse_range(a.range_max, "--range-max");
  ft::FitOptions opt = a.opt;
  opt.seed = a.seed;
  opt.full_sd = !a.partial_sd;
  try {
    opt.validate();
    if (opt.literal_z196) (void)ft::confidence_z(opt.level, true);
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
  if (a.posterior != "Z" && a.posterior != "eps" && a.posterior != "alpha")
    throw UsageError("--posterior must be Z, eps or alpha");

  const auto table = load_table(a.data);
  ft::BuildOptions bo{a.standardize, a.status, grid.end()};
  const auto ds = ft::build_dataset(table, spec, bo);
  (void)make_bounds(lo, hi, ft::ParamLayout::make(grid.intervals(), ds.regressors()));
  for (double t : ds.time) as_data([&] { grid.check_time(t); return 0; });

  auto r = ft::fit(ds, grid, lo, hi, opt, thread_count(ds.units()));
  r.formula = spec;
  r.status_column = a.status;
  print_summary(r, std::cout);
  write_file(a.out, ft::fit_json(r).dump(2) + "\n");

  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    const fs::path dir(a.plot_dir);
    ft::write_text_file((dir / "baseline_hazard.svg").string(), ft::svg::baseline_hazard_plot(grid, r.baseline_hazard));
    ft::write_text_file((dir / "frailty_sd.svg").string(),
                        ft::svg::frailty_sd_plot(grid, r.dispersion().sd, opt.full_sd));
    std::string post;
    if (a.posterior == "alpha") post = ft::svg::alpha_plot(grid, r.posterior.alpha);
    else if (a.posterior == "eps")
      post = ft::svg::group_curves_plot(grid, r.posterior.eps, "Posterior frailty estimates (eps)");
    else post = ft::svg::group_curves_plot(grid, r.posterior.Z, "Posterior frailty estimates (Z)");
    ft::write_text_file((dir / "posterior_frailty.svg").string(), post);
    const auto surv = ft::conditional_survival(r.params, r.posterior.Z, ds, grid);
    ft::write_text_file((dir / "survival.svg").string(), ft::svg::survival_plot(grid, surv, r.group_names));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SurvivalArgs {
  std::string fit, data, out_csv = "survival.csv", out_svg;
};

// Encode new data with the fit's encoding and index its clusters by the fit's labels.
ft::Dataset dataset_for_fit(const ft::FitResult& r, const ft::Table& table) {
  ft::BuildOptions bo{r.encoding.standardize, r.status_column, r.grid().end()};
  auto ds = ft::apply_encoding(table, r.formula, r.encoding, bo);
  if (ds.covariate_names != r.covariate_names) throw ft::DataError("data covariates do not match the fit");
  std::vector<std::size_t> remap(ds.groups());
  for (std::size_t g = 0; g < ds.groups(); ++g) {
    const auto it = std::find(r.group_names.begin(), r.group_names.end(), ds.group_names[g]);
    if (it == r.group_names.end()) throw ft::DataError("cluster '" + ds.group_names[g] + "' is not part of the fit");
    remap[g] = static_cast<std::size_t>(it - r.group_names.begin());
  }
  for (auto& c : ds.cluster_of) c = remap[c];
  ds.group_names = r.group_names;
  return ds;
}

int cmd_survival(const SurvivalArgs& a) {
  const auto r = ft::fit_from_json(ft::read_json_file(a.fit));
  const auto ds = dataset_for_fit(r, load_table(a.data));
  const auto grid = r.grid();
  const auto t = as_data([&] { return ft::conditional_survival(r.params, r.posterior.Z, ds, grid); });
  write_file(a.out_csv, ft::survival_csv(t));
  if (!a.out_svg.empty()) write_file(a.out_svg, ft::svg::survival_plot(grid, t, r.group_names));
  return kOk;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::string data, formula, time_axis, range_min, range_max, fixed_from, out_csv = "profile.csv", out_svg, out_json;
  std::optional<std::string> status;
  bool standardize = false, even_grid = false;
  std::size_t index = 0, n_iter = 1, n_points = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int cmd_profile1d(const ProfileArgs& a) {
  std::optional<ft::FitResult> base;
  if (!a.fixed_from.empty()) base = ft::fit_from_json(ft::read_json_file(a.fixed_from));
  if (!base && (a.formula.empty() || a.time_axis.empty() || a.range_min.empty() || a.range_max.empty()))
    throw UsageError("without --fixed-from, --formula, --time-axis, --range-min and --range-max are required");

  const auto table = load_table(a.data);
  ft::Dataset ds;
  ft::TimeGrid grid = a.time_axis.empty() ? base->grid() : parse_grid(a.time_axis);
  if (base && a.formula.empty() && a.time_axis.empty()) {
    ds = dataset_for_fit(*base, table);
  } else {
    const auto spec = a.formula.empty() ? base->formula : parse_formula_flag(a.formula);
    ft::BuildOptions bo{a.standardize, a.status ? a.status : (base ? base->status_column : std::nullopt), grid.end()};
    ds = ft::build_dataset(table, spec, bo);
  }
  const auto data = as_data([&] { return ft::ModelData(ds, grid, thread_count(ds.units())); });
  const auto lo = a.range_min.empty() ? base->bounds.category_min : parse_range(a.range_min, "--range-min");
  const auto hi = a.range_max.empty() ? base->bounds.category_max : parse_range(a.range_max, "--range-max");
  const auto bounds = make_bounds(lo, hi, data.layout());

  ft::Profile1DOptions po;
  po.index = a.index;
  po.use_fixed = base.has_value();
  if (base) {
    if (!(base->layout() == data.layout())) throw ft::DataError("fit layout does not match the profiled data");
    po.fixed_params = base->params;
  }
  po.n_iter = a.n_iter;
  po.n_points = a.n_points;
  po.tol = a.tol;
  po.seed = a.seed;
  po.even_grid = a.even_grid;
  if (a.index >= data.layout().size())
    throw UsageError("--index " + std::to_string(a.index) + " out of range (n_p = " +
                     std::to_string(data.layout().size()) + ")");
  if (po.fixed_params && !po.fixed_params->within(bounds))
    throw UsageError("the fitted parameters lie outside the requested ranges");

  const auto res = ft::profile_1d(data, bounds, po);
  const auto cat = data.layout().category_of(a.index);
  const auto name = std::string(ft::category_name(cat)) + "[" +
                    std::to_string(a.index - data.layout().offset(cat) + 1) + "]";
  std::cout << "Parameter index " << a.index << " (" << name << "), range [" << fixed(res.lo, 10) << ", "
            << fixed(res.hi, 10) << "]\n";
  std::cout << "EstimatedParameter     :";
  for (const auto& it : res.iterations) std::cout << ' ' << fixed(it.x_star, 7);
  std::cout << "\nOptimizedLoglikelihood :";
  for (const auto& it : res.iterations) std::cout << ' ' << fixed(it.ll_star, 10);
  std::cout << '\n';

  write_file(a.out_csv, ft::profile_csv(res));
  if (!a.out_svg.empty()) write_file(a.out_svg, ft::svg::profile_plot(res, name));
  if (!a.out_json.empty()) write_file(a.out_json, ft::profile_json(res).dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string out_dir, time_axis, units = "40", covariates, phi, beta, gamma, censor = "sentinel";
  std::size_t groups = 1;
  double mu1 = 0.5, nu = 0.2;
  std::optional<double> fixed_frailty;
  std::uint64_t seed = 0;
};

std::vector<ft::CovariateGenerator> parse_covariates(const std::string& text, std::size_t R) {
  std::vector<ft::CovariateGenerator> out;
  if (text.empty()) {
    for (std::size_t r = 0; r < R; ++r) out.push_back({"x" + std::to_string(r + 1), ft::CovariateGenerator::Kind::normal});
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string p;
    while (std::getline(is, p, ':')) parts.push_back(p);
    if (parts.size() < 2) throw UsageError("--covariates entries look like name:normal or name:bernoulli:p");
    ft::CovariateGenerator g;
    g.name = parts[0];
    if (parts[1] == "normal" && parts.size() == 2) {
      g.kind = ft::CovariateGenerator::Kind::normal;
    } else if (parts[1] == "bernoulli" && parts.size() <= 3) {
      g.kind = ft::CovariateGenerator::Kind::bernoulli;
      if (parts.size() == 3) {
        const auto v = ft::detail::parse_double(parts[2]);
        if (!v) throw UsageError("bad bernoulli probability in --covariates");
        g.p = *v;
      }
    } else {
      throw UsageError("unknown covariate generator '" + item + "'");
    }
    out.push_back(std::move(g));
  }
  return out;
}

int cmd_simulate(const SimulateArgs& a) {
  const auto grid = parse_grid(a.time_axis);
  const std::size_t L = grid.intervals();
  const auto beta = parse_list(a.beta, "--beta");
  const auto phi = a.phi.empty() ? std::vector<double>(L, -1.0) : parse_list(a.phi, "--phi");
  const auto gamma = a.gamma.empty() ? std::vector<double>(L, 0.2) : parse_list(a.gamma, "--gamma");
  if (phi.size() != L || gamma.size() != L) throw UsageError("--phi and --gamma need one value per interval");
  if (a.censor != "sentinel" && a.censor != "end") throw UsageError("--censor must be sentinel or end");

  ft::SimSpec spec;
  std::vector<double> v = phi;
  v.insert(v.end(), beta.begin(), beta.end());
  v.push_back(a.mu1);
  v.push_back(a.nu);
  v.insert(v.end(), gamma.begin(), gamma.end());
  spec.truth = ft::ParamVector(ft::ParamLayout::make(L, beta.size()), v);
  spec.time_axis.assign(grid.boundaries().begin(), grid.boundaries().end());
  spec.N = a.groups;
  spec.units_per_group.clear();
  for (double u : parse_list(a.units, "--units-per-group")) {
    if (!(u >= 1) || u != std::floor(u)) throw UsageError("--units-per-group needs positive integers");
    spec.units_per_group.push_back(static_cast<std::size_t>(u));
  }
  spec.covariates = parse_covariates(a.covariates, beta.size());
  spec.censor_at_end = a.censor == "sentinel";
  spec.seed = a.seed;
  spec.fixed_frailty = a.fixed_frailty;
  try {
    spec.validate();
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }

  const auto sim = ft::simulate_dataset(spec);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  ft::write_text_file((dir / "data.csv").string(), ft::to_csv(sim.table));
  ft::write_text_file((dir / "truth.json").string(), ft::truth_json(spec, sim.frailties).dump(2) + "\n");
  std::size_t events = 0;
  for (const auto& s : sim.table.column("status")) events += s == "1";
  std::cout << "Simulated " << sim.table.rows() << " units in " << spec.N << " groups, " << events
            << " events; wrote " << (dir / "data.csv").string() << " and " << (dir / "truth.json").string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-dependent shared frailty Cox model (Adapted Paik): fit, predict, profile, simulate"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit the model and write the result JSON");
  fit->add_option("--data", fa.data, "Input CSV")->required();
  fit->add_option("--formula", fa.formula, "e.g. 'time ~ x1 + x2 + cluster(group)'")->required();
  fit->add_option("--time-axis", fa.time_axis, "Comma-separated boundaries a_0,...,a_L")->required();
  fit->add_option("--range-min", fa.range_min, "Category minima phi,beta,mu1,nu,gamma")->required();
  fit->add_option("--range-max", fa.range_max, "Category maxima phi,beta,mu1,nu,gamma")->required();
  fit->add_option("--status", fa.status, "Event indicator column (otherwise time > a_L means censored)");
  fit->add_flag("--standardize", fa.standardize, "Standardize numeric covariates");
  fit->add_option("--n-extrarun", fa.opt.n_extrarun, "Extra runs beyond n_p")->capture_default_str();
  fit->add_option("--tol-ll", fa.opt.tol_ll, "Run-to-run log-likelihood tolerance")->capture_default_str();
  fit->add_option("--tol-optimize", fa.opt.tol_optimize, "1D Brent tolerance")->capture_default_str();
  fit->add_option("--h-dd", fa.opt.h_dd, "Finite-difference step for the Hessian")->capture_default_str();
  fit->add_option("--level", fa.opt.level, "Confidence level")->capture_default_str();
  fit->add_option("--seed", fa.seed, "Random seed")->required();
  fit->add_flag("--verbose", fa.opt.verbose, "Log per-run log-likelihoods to stderr");
  fit->add_flag("--literal-z196", fa.opt.literal_z196, "Use z = 1.96 for parameter CIs (level 0.95 only)");
  fit->add_flag("--partial-sd", fa.partial_sd, "Plot the time-varying frailty sd only");
  fit->add_option("--posterior", fa.posterior, "Posterior plot: Z, eps or alpha")->capture_default_str();
  fit->add_option("--out", fa.out, "Result JSON")->capture_default_str();
  fit->add_option("--plot-dir", fa.plot_dir, "Write SVG figures here");

  SurvivalArgs sa;
  auto* surv = app.add_subcommand("survival", "Conditional survival per unit from a fitted model");
  surv->add_option("--fit", sa.fit, "Fit JSON")->required();
  surv->add_option("--data", sa.data, "Input CSV")->required();
  surv->add_option("--out-csv", sa.out_csv, "Survival table")->capture_default_str();
  surv->add_option("--out-svg", sa.out_svg, "Survival figure");

  ProfileArgs pa;
  auto* prof = app.add_subcommand("profile1d", "One-dimensional log-likelihood analysis");
  prof->add_option("--data", pa.data, "Input CSV")->required();
  prof->add_option("--index", pa.index, "0-based parameter index")->required();
  prof->add_option("--fixed-from", pa.fixed_from, "Fit JSON; other parameters are held at its optimum");
  prof->add_option("--formula", pa.formula, "Model formula (defaults to the fit's)");
  prof->add_option("--time-axis", pa.time_axis, "Time axis (defaults to the fit's)");
  prof->add_option("--range-min", pa.range_min, "Category minima (defaults to the fit's)");
  prof->add_option("--range-max", pa.range_max, "Category maxima (defaults to the fit's)");
  prof->add_option("--status", pa.status, "Event indicator column");
  prof->add_flag("--standardize", pa.standardize, "Standardize numeric covariates");
  prof->add_option("--n-iter", pa.n_iter, "Iterations")->capture_default_str();
  prof->add_option("--n-points", pa.n_points, "Curve samples per iteration")->capture_default_str();
  prof->add_option("--tol", pa.tol, "Brent tolerance")->capture_default_str();
  prof->add_option("--seed", pa.seed, "Random seed")->capture_default_str();
  prof->add_flag("--grid", pa.even_grid, "Evenly spaced curve samples");
  prof->add_option("--out-csv", pa.out_csv, "Profile samples")->capture_default_str();
  prof->add_option("--out-svg", pa.out_svg, "Profile figure");
  prof->add_option("--out-json", pa.out_json, "Maximizers as JSON");

  SimulateArgs ma;
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic clustered dataset");
  sim->add_option("--out-dir", ma.out_dir, "Directory for data.csv and truth.json")->required();
  sim->add_option("--time-axis", ma.time_axis, "Comma-separated boundaries")->required();
  sim->add_option("--groups", ma.groups, "Number of groups")->required();
  sim->add_option("--units-per-group", ma.units, "One count, or one per group")->capture_default_str();
  sim->add_option("--covariates", ma.covariates, "name:normal or name:bernoulli:p, comma-separated");
  sim->add_option("--beta", ma.beta, "Regression coefficients")->required();
  sim->add_option("--phi", ma.phi, "Baseline log-hazards (default -1 each)");
  sim->add_option("--mu1", ma.mu1, "Share of the time-constant frailty")->capture_default_str();
  sim->add_option("--nu", ma.nu, "alpha dispersion")->capture_default_str();
  sim->add_option("--gamma", ma.gamma, "eps dispersions (default 0.2 each)");
  sim->add_option("--censor", ma.censor, "sentinel (a_L + 10%) or end (a_L)")->capture_default_str();
  sim->add_option("--fixed-frailty", ma.fixed_frailty, "Use this Z for every group and interval");
  sim->add_option("--seed", ma.seed, "Random seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*fit) return cmd_fit(fa);
    if (*surv) return cmd_survival(sa);
    if (*prof) return cmd_profile1d(pa);
    if (*sim) return cmd_simulate(ma);
  } catch (const UsageError& ex) {
    std::cerr << "frailtime: usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const ft::DataError& ex) {
    std::cerr << "frailtime: data error: " << ex.what() << '\n';
    return kData;
  } catch (const ft::NumericalError& ex) {
    std::cerr << "frailtime: numerical failure: " << ex.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& ex) {
    std::cerr << "frailtime: I/O error: " << ex.what() << '\n';
    return kData;
  } catch (const std::exception& ex) {
    std::cerr << "frailtime: error: " << ex.what() << '\n';
    return kData;
  }
  return kUsage;
}
