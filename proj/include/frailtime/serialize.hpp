#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "frailtime/analysis1d.hpp"
#include "frailtime/dataio.hpp"
#include "frailtime/error.hpp"
#include "frailtime/fit.hpp"
#include "frailtime/numeric.hpp"
#include "frailtime/simulate.hpp"

namespace frailtime {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline json optional_array(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

// Row-major nested arrays: one inner array per group.
inline json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

inline Eigen::MatrixXd matrix_from(const json& a, std::size_t rows, std::size_t cols, const char* what) {
  if (!a.is_array() || a.size() != rows) throw DataError(std::string(what) + ": wrong number of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!a[i].is_array() || a[i].size() != cols) throw DataError(std::string(what) + ": wrong number of columns");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!a[i][j].is_number()) throw DataError(std::string(what) + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
    }
  }
  return m;
}

inline std::vector<double> numbers_from(const json& a, std::size_t n, const char* what) {
  if (!a.is_array() || a.size() != n)
    throw DataError(std::string(what) + ": expected " + std::to_string(n) + " entries");
  std::vector<double> out;
  for (const auto& x : a) {
    if (!x.is_number()) throw DataError(std::string(what) + ": non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::vector<std::optional<double>> optionals_from(const json& a, std::size_t n, const char* what) {
  if (!a.is_array() || a.size() != n)
    throw DataError(std::string(what) + ": expected " + std::to_string(n) + " entries");
  std::vector<std::optional<double>> out;
  for (const auto& x : a) {
    if (x.is_null()) out.emplace_back();
    else if (x.is_number()) out.emplace_back(x.get<double>());
    else throw DataError(std::string(what) + ": entries must be numbers or null");
  }
  return out;
}

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::vector<std::string> strings_from(const json& a, const char* what) {
  if (!a.is_array()) throw DataError(std::string(what) + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& x : a) {
    if (!x.is_string()) throw DataError(std::string(what) + ": expected strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

inline std::size_t count_from(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) throw DataError(std::string(key) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace detail

inline json encoding_json(const Encoding& enc) {
  json cols = json::array();
  for (const auto& c : enc.columns) {
    json e{{"source", c.source}, {"kind", c.kind == ColumnEncoding::Kind::numeric ? "numeric" : "categorical"}};
    if (c.kind == ColumnEncoding::Kind::numeric) {
      e["center"] = c.center;
      e["scale"] = c.scale;
    } else {
      e["levels"] = c.levels;
    }
    cols.push_back(std::move(e));
  }
  return json{{"standardize", enc.standardize}, {"columns", std::move(cols)}};
}

inline Encoding encoding_from(const json& j) {
  Encoding enc;
  const auto& s = detail::field(j, "standardize");
  if (!s.is_boolean()) throw DataError("Encoding.standardize must be a boolean");
  enc.standardize = s.get<bool>();
  const auto& cols = detail::field(j, "columns");
  if (!cols.is_array()) throw DataError("Encoding.columns must be an array");
  for (const auto& c : cols) {
    ColumnEncoding e;
    const auto& src = detail::field(c, "source");
    if (!src.is_string()) throw DataError("Encoding source must be a string");
    e.source = src.get<std::string>();
    const auto kind = detail::field(c, "kind");
    if (kind == "numeric") {
      e.kind = ColumnEncoding::Kind::numeric;
      const auto& center = detail::field(c, "center");
      const auto& scale = detail::field(c, "scale");
      if (!center.is_number() || !scale.is_number()) throw DataError("numeric encoding needs center and scale");
      e.center = center.get<double>();
      e.scale = scale.get<double>();
    } else if (kind == "categorical") {
      e.kind = ColumnEncoding::Kind::categorical;
      e.levels = detail::strings_from(detail::field(c, "levels"), "Encoding levels");
      if (e.levels.size() < 2) throw DataError("categorical encoding needs at least two levels");
    } else {
      throw DataError("unknown encoding kind");
    }
    enc.columns.push_back(std::move(e));
  }
  return enc;
}

inline json fit_json(const FitResult& r) {
  const auto& lay = r.layout();
  const auto& pf = r.posterior;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["formula"] = r.formula.to_string();
  j["Regressors"] = r.covariate_names;
  j["NRegressors"] = lay.R;
  j["ClusterVariable"] = r.formula.cluster;
  j["NClusters"] = r.group_names.size();
  j["ClusterLabels"] = r.group_names;
  j["NUnits"] = r.n_units;
  j["TimeDomain"] = r.time_axis;
  j["NIntervals"] = lay.L;
  j["NParameters"] = lay.size();
  const auto sizes = lay.category_sizes();
  j["ParametersCategories"] = std::vector<std::size_t>(sizes.begin(), sizes.end());
  j["ParametersRange"] = {
      {"CategoriesRangeMin", r.bounds.category_min}, {"CategoriesRangeMax", r.bounds.category_max},
      {"ParametersRangeMin", r.bounds.lo},          {"ParametersRangeMax", r.bounds.hi}};
  j["Loglikelihood"] = r.loglik;
  j["AIC"] = r.aic;
  j["Status"] = r.converged;
  j["NRun"] = r.n_run;
  j["RunLoglikelihoods"] = r.trace.run_lls;
  j["OptimalParameters"] = std::vector<double>(r.params.values().begin(), r.params.values().end());
  j["StandardErrorParameters"] = detail::optional_array(r.se);
  j["HessianDiagonal"] = detail::optional_array(r.hessian);
  j["ParametersCI"] = {{"Level", r.options.level},
                       {"Quantile", r.z},
                       {"ParametersCILeft", detail::optional_array(r.ci.lo)},
                       {"ParametersCIRight", detail::optional_array(r.ci.hi)}};
  j["BaselineHazard"] = r.baseline_hazard;
  j["FrailtyDispersion"] = {{"FrailtyVariance", r.dispersion_full.variance},
                            {"FrailtyStandardDeviation", r.dispersion_full.sd},
                            {"FrailtyVariancePartial", r.dispersion_partial.variance},
                            {"FrailtyStandardDeviationPartial", r.dispersion_partial.sd}};
  j["PosteriorFrailtyEstimates"] = {{"alpha", detail::vector_json(pf.alpha)},
                                    {"eps", detail::matrix_json(pf.eps)},
                                    {"Z", detail::matrix_json(pf.Z)},
                                    {"alphaMax", pf.alpha_max},
                                    {"epsMax", pf.eps_max},
                                    {"MeanZ", pf.mean_Z()}};
  j["PosteriorFrailtyVariance"] = {{"alphaVar", detail::vector_json(pf.var_alpha)},
                                   {"epsVar", detail::matrix_json(pf.var_eps)},
                                   {"ZVar", detail::matrix_json(pf.var_Z)}};
  j["PosteriorFrailtyCI"] = {{"ZLeft", detail::matrix_json(pf.ci_lo)}, {"ZRight", detail::matrix_json(pf.ci_hi)}};
  j["Encoding"] = encoding_json(r.encoding);
  j["StatusColumn"] = r.status_column ? json(*r.status_column) : json(nullptr);
  j["Options"] = {{"n_extrarun", r.options.n_extrarun}, {"tol_ll", r.options.tol_ll},
                  {"tol_optimize", r.options.tol_optimize}, {"h_dd", r.options.h_dd},
                  {"level", r.options.level},       {"seed", r.options.seed},
                  {"literal_z196", r.options.literal_z196}};
  return j;
}

/**
 * Structural check of a fit document: required fields, types and mutually
 * consistent lengths. Throws DataError naming the first problem.
 */
inline void validate_fit_json(const json& j) {
  using namespace detail;
  const auto& ver = field(j, "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion)
    throw DataError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  if (!field(j, "formula").is_string()) throw DataError("formula must be a string");
  (void)parse_formula(j.at("formula").get<std::string>());
  const auto R = count_from(j, "NRegressors");
  const auto L = count_from(j, "NIntervals");
  const auto N = count_from(j, "NClusters");
  const auto np = count_from(j, "NParameters");
  if (L < 1 || R < 1 || N < 1) throw DataError("NIntervals, NRegressors and NClusters must be positive");
  if (np != 2 * L + R + 2) throw DataError("NParameters is inconsistent with NIntervals and NRegressors");
  if (strings_from(field(j, "Regressors"), "Regressors").size() != R) throw DataError("Regressors length mismatch");
  if (!field(j, "ClusterVariable").is_string()) throw DataError("ClusterVariable must be a string");
  if (strings_from(field(j, "ClusterLabels"), "ClusterLabels").size() != N)
    throw DataError("ClusterLabels length mismatch");
  (void)numbers_from(field(j, "TimeDomain"), L + 1, "TimeDomain");
  const auto cats = numbers_from(field(j, "ParametersCategories"), 5, "ParametersCategories");
  if (cats != std::vector<double>{double(L), double(R), 1, 1, double(L)})
    throw DataError("ParametersCategories inconsistent with the layout");
  const auto& range = field(j, "ParametersRange");
  (void)numbers_from(field(range, "CategoriesRangeMin"), 5, "CategoriesRangeMin");
  (void)numbers_from(field(range, "CategoriesRangeMax"), 5, "CategoriesRangeMax");
  (void)numbers_from(field(range, "ParametersRangeMin"), np, "ParametersRangeMin");
  (void)numbers_from(field(range, "ParametersRangeMax"), np, "ParametersRangeMax");
  if (!field(j, "Loglikelihood").is_number() || !field(j, "AIC").is_number())
    throw DataError("Loglikelihood and AIC must be numbers");
  if (!field(j, "Status").is_boolean()) throw DataError("Status must be a boolean");
  (void)count_from(j, "NRun");
  (void)numbers_from(field(j, "OptimalParameters"), np, "OptimalParameters");
  (void)optionals_from(field(j, "StandardErrorParameters"), np, "StandardErrorParameters");
  const auto& ci = field(j, "ParametersCI");
  (void)optionals_from(field(ci, "ParametersCILeft"), np, "ParametersCILeft");
  (void)optionals_from(field(ci, "ParametersCIRight"), np, "ParametersCIRight");
  (void)numbers_from(field(j, "BaselineHazard"), L, "BaselineHazard");
  const auto& fd = field(j, "FrailtyDispersion");
  for (const char* k : {"FrailtyVariance", "FrailtyStandardDeviation", "FrailtyVariancePartial",
                        "FrailtyStandardDeviationPartial"})
    (void)numbers_from(field(fd, k), L, k);
  const auto& pe = field(j, "PosteriorFrailtyEstimates");
  (void)numbers_from(field(pe, "alpha"), N, "alpha");
  (void)matrix_from(field(pe, "eps"), N, L, "eps");
  (void)matrix_from(field(pe, "Z"), N, L, "Z");
  const auto& pv = field(j, "PosteriorFrailtyVariance");
  (void)numbers_from(field(pv, "alphaVar"), N, "alphaVar");
  (void)matrix_from(field(pv, "epsVar"), N, L, "epsVar");
  (void)matrix_from(field(pv, "ZVar"), N, L, "ZVar");
  const auto& pc = field(j, "PosteriorFrailtyCI");
  (void)matrix_from(field(pc, "ZLeft"), N, L, "ZLeft");
  (void)matrix_from(field(pc, "ZRight"), N, L, "ZRight");
  const auto enc = encoding_from(field(j, "Encoding"));
  if (enc.columns.empty()) throw DataError("Encoding has no columns");
  const auto& status = field(j, "StatusColumn");
  if (!status.is_null() && !status.is_string()) throw DataError("StatusColumn must be a string or null");
}

/**
 * Rebuild the parts of a FitResult needed downstream (survival, profiling).
 * The Hessian, trace and variance blocks are restored as stored.
 */
inline FitResult fit_from_json(const json& j) {
  using namespace detail;
  validate_fit_json(j);
  FitResult r;
  r.formula = parse_formula(j.at("formula").get<std::string>());
  r.encoding = encoding_from(j.at("Encoding"));
  if (j.at("StatusColumn").is_string()) r.status_column = j.at("StatusColumn").get<std::string>();
  const auto L = j.at("NIntervals").get<std::size_t>();
  const auto R = j.at("NRegressors").get<std::size_t>();
  const auto N = j.at("NClusters").get<std::size_t>();
  const auto layout = ParamLayout::make(L, R);
  const auto np = layout.size();
  r.time_axis = numbers_from(j.at("TimeDomain"), L + 1, "TimeDomain");
  (void)r.grid();
  const auto& range = j.at("ParametersRange");
  std::array<double, 5> cmin{}, cmax{};
  const auto vmin = numbers_from(range.at("CategoriesRangeMin"), 5, "CategoriesRangeMin");
  const auto vmax = numbers_from(range.at("CategoriesRangeMax"), 5, "CategoriesRangeMax");
  std::copy(vmin.begin(), vmin.end(), cmin.begin());
  std::copy(vmax.begin(), vmax.end(), cmax.begin());
  try {
    r.bounds = expand_bounds(cmin, cmax, layout);
  } catch (const std::invalid_argument& ex) {
    throw DataError(std::string("stored ranges are invalid: ") + ex.what());
  }
  r.group_names = strings_from(j.at("ClusterLabels"), "ClusterLabels");
  r.covariate_names = strings_from(j.at("Regressors"), "Regressors");
  r.n_units = j.contains("NUnits") && j.at("NUnits").is_number_unsigned() ? j.at("NUnits").get<std::size_t>() : 0;
  if (j.contains("Options") && j.at("Options").is_object()) {
    const auto& o = j.at("Options");
    r.options.n_extrarun = o.value("n_extrarun", r.options.n_extrarun);
    r.options.tol_ll = o.value("tol_ll", r.options.tol_ll);
    r.options.tol_optimize = o.value("tol_optimize", r.options.tol_optimize);
    r.options.h_dd = o.value("h_dd", r.options.h_dd);
    r.options.level = o.value("level", r.options.level);
    r.options.seed = o.value("seed", r.options.seed);
    r.options.literal_z196 = o.value("literal_z196", r.options.literal_z196);
  }

  r.params = ParamVector(layout, numbers_from(j.at("OptimalParameters"), np, "OptimalParameters"));
  r.loglik = j.at("Loglikelihood").get<double>();
  r.aic = j.at("AIC").get<double>();
  r.converged = j.at("Status").get<bool>();
  r.n_run = j.at("NRun").get<std::size_t>();
  r.trace.n_run = r.n_run;
  r.trace.converged = r.converged;
  if (j.contains("RunLoglikelihoods") && j.at("RunLoglikelihoods").is_array())
    r.trace.run_lls = numbers_from(j.at("RunLoglikelihoods"), j.at("RunLoglikelihoods").size(), "RunLoglikelihoods");
  r.se = optionals_from(j.at("StandardErrorParameters"), np, "StandardErrorParameters");
  if (j.contains("HessianDiagonal")) r.hessian = optionals_from(j.at("HessianDiagonal"), np, "HessianDiagonal");
  const auto& ci = j.at("ParametersCI");
  r.ci.lo = optionals_from(ci.at("ParametersCILeft"), np, "ParametersCILeft");
  r.ci.hi = optionals_from(ci.at("ParametersCIRight"), np, "ParametersCIRight");
  if (ci.contains("Quantile") && ci.at("Quantile").is_number()) r.z = ci.at("Quantile").get<double>();
  r.baseline_hazard = numbers_from(j.at("BaselineHazard"), L, "BaselineHazard");
  const auto& fd = j.at("FrailtyDispersion");
  r.dispersion_full = {numbers_from(fd.at("FrailtyVariance"), L, "FrailtyVariance"),
                       numbers_from(fd.at("FrailtyStandardDeviation"), L, "FrailtyStandardDeviation")};
  r.dispersion_partial = {numbers_from(fd.at("FrailtyVariancePartial"), L, "FrailtyVariancePartial"),
                          numbers_from(fd.at("FrailtyStandardDeviationPartial"), L, "FrailtyStandardDeviationPartial")};

  auto& pf = r.posterior;
  const auto& pe = j.at("PosteriorFrailtyEstimates");
  const auto alpha = numbers_from(pe.at("alpha"), N, "alpha");
  pf.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(N));
  pf.eps = matrix_from(pe.at("eps"), N, L, "eps");
  pf.Z = matrix_from(pe.at("Z"), N, L, "Z");
  if (pe.contains("alphaMax")) pf.alpha_max = pe.at("alphaMax").get<double>();
  if (pe.contains("epsMax")) pf.eps_max = pe.at("epsMax").get<double>();
  const auto& pv = j.at("PosteriorFrailtyVariance");
  const auto var_alpha = numbers_from(pv.at("alphaVar"), N, "alphaVar");
  pf.var_alpha = Eigen::Map<const Eigen::VectorXd>(var_alpha.data(), static_cast<Eigen::Index>(N));
  pf.var_eps = matrix_from(pv.at("epsVar"), N, L, "epsVar");
  pf.var_Z = matrix_from(pv.at("ZVar"), N, L, "ZVar");
  const auto& pc = j.at("PosteriorFrailtyCI");
  pf.ci_lo = matrix_from(pc.at("ZLeft"), N, L, "ZLeft");
  pf.ci_hi = matrix_from(pc.at("ZRight"), N, L, "ZRight");
  return r;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw DataError("'" + path + "' is not valid JSON: " + ex.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::string survival_csv(const SurvivalTable& t) {
  std::string out = "group";
  for (Eigen::Index k = 0; k < t.S.cols(); ++k) out += ",S_" + std::to_string(k + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < t.S.rows(); ++i) {
    out += csv_field(t.group[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < t.S.cols(); ++k) out += "," + numeric::format_double(t.S(i, k));
    out += '\n';
  }
  return out;
}

// One row per curve sample plus one flagged row per iteration for its maximizer.
inline std::string profile_csv(const Profile1DResult& p) {
  std::string out = "iter,x,ll,maximizer\n";
  for (std::size_t it = 0; it < p.iterations.size(); ++it) {
    const auto& r = p.iterations[it];
    const auto iter = std::to_string(it + 1);
    for (std::size_t i = 0; i < r.x.size(); ++i)
      out += iter + "," + numeric::format_double(r.x[i]) + "," + numeric::format_double(r.ll[i]) + ",0\n";
    out += iter + "," + numeric::format_double(r.x_star) + "," + numeric::format_double(r.ll_star) + ",1\n";
  }
  return out;
}

inline json profile_json(const Profile1DResult& p) {
  json xs = json::array(), lls = json::array();
  for (const auto& it : p.iterations) {
    xs.push_back(it.x_star);
    lls.push_back(it.ll_star);
  }
  return json{{"schema_version", kSchemaVersion},
              {"Index", p.index},
              {"Range", {p.lo, p.hi}},
              {"EstimatedParameter", std::move(xs)},
              {"OptimizedLoglikelihood", std::move(lls)}};
}

inline json truth_json(const SimSpec& spec, const Frailties& f) {
  json covs = json::array();
  for (const auto& c : spec.covariates) {
    json e{{"name", c.name}, {"kind", c.kind == CovariateGenerator::Kind::normal ? "normal" : "bernoulli"}};
    if (c.kind == CovariateGenerator::Kind::bernoulli) e["p"] = c.p;
    covs.push_back(std::move(e));
  }
  const auto sizes = spec.truth.layout().category_sizes();
  return json{{"schema_version", kSchemaVersion},
              {"TimeDomain", spec.time_axis},
              {"NClusters", spec.N},
              {"UnitsPerGroup", spec.units_per_group},
              {"Covariates", std::move(covs)},
              {"ParametersCategories", std::vector<std::size_t>(sizes.begin(), sizes.end())},
              {"TrueParameters", std::vector<double>(spec.truth.values().begin(), spec.truth.values().end())},
              {"mu2", spec.truth.mu2()},
              {"CensorAtEnd", spec.censor_at_end},
              {"Seed", spec.seed},
              {"alpha", detail::vector_json(f.alpha)},
              {"eps", detail::matrix_json(f.eps)},
              {"Z", detail::matrix_json(f.Z)}};
}

}  // namespace frailtime
