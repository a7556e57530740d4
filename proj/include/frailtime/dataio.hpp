#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>

#include "frailtime/error.hpp"

namespace frailtime {

// ---------------------------------------------------------------------------
// Formula
// ---------------------------------------------------------------------------

struct FormulaSpec {
  std::string response;
  std::vector<std::string> covariates;
  std::string cluster;

  std::string to_string() const {
    std::string s = response + " ~ ";
    for (const auto& c : covariates) s += c + " + ";
    return s + "cluster(" + cluster + ")";
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// Grammar: <response> ~ <term> (+ <term>)*, exactly one term being cluster(<name>).
inline FormulaSpec parse_formula(std::string_view text) {
  const auto tilde = text.find('~');
  if (tilde == std::string_view::npos) throw DataError("formula is missing '~'");
  if (text.find('~', tilde + 1) != std::string_view::npos) throw DataError("formula has more than one '~'");

  FormulaSpec spec;
  spec.response = std::string(detail::trim(text.substr(0, tilde)));
  if (!detail::is_identifier(spec.response)) throw DataError("formula response '" + spec.response + "' is not a name");

  std::optional<std::string> cluster;
  std::string_view rhs = text.substr(tilde + 1);
  std::set<std::string> seen;
  while (true) {
    const auto plus = rhs.find('+');
    const auto term = detail::trim(rhs.substr(0, plus));
    if (term.empty()) throw DataError("formula has an empty term");
    if (term.starts_with("cluster(") && term.ends_with(")")) {
      const auto name = detail::trim(term.substr(8, term.size() - 9));
      if (!detail::is_identifier(name)) throw DataError("cluster() term needs a column name");
      if (cluster) throw DataError("formula has more than one cluster() term");
      cluster = std::string(name);
    } else {
      if (!detail::is_identifier(term)) throw DataError("formula term '" + std::string(term) + "' is not a name");
      if (!seen.insert(std::string(term)).second) throw DataError("duplicate formula term '" + std::string(term) + "'");
      spec.covariates.emplace_back(term);
    }
    if (plus == std::string_view::npos) break;
    rhs = rhs.substr(plus + 1);
  }
  if (!cluster) throw DataError("formula has no cluster() term");
  if (spec.covariates.empty()) throw DataError("formula has no covariates");
  spec.cluster = *cluster;
  if (spec.cluster == spec.response || seen.contains(spec.cluster))
    throw DataError("cluster variable must differ from response and covariates");
  if (seen.contains(spec.response)) throw DataError("response also appears as a covariate");
  return spec;
}

// ---------------------------------------------------------------------------
// Column-oriented table and CSV
// ---------------------------------------------------------------------------

class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> names, std::vector<std::vector<std::string>> columns)
      : names_(std::move(names)), columns_(std::move(columns)) {
    if (names_.size() != columns_.size()) throw DataError("table header/column count mismatch");
    for (const auto& c : columns_)
      if (c.size() != rows()) throw DataError("ragged table columns");
  }

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool has(std::string_view name) const { return std::find(names_.begin(), names_.end(), name) != names_.end(); }

  const std::vector<std::string>& column(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw DataError("missing column '" + std::string(name) + "'");
    return columns_[static_cast<std::size_t>(it - names_.begin())];
  }

  // All cells parse as numbers, or nullopt.
  std::optional<std::vector<double>> numeric(std::string_view name) const {
    const auto& raw = column(name);
    std::vector<double> out;
    out.reserve(raw.size());
    for (const auto& cell : raw) {
      const auto v = detail::parse_double(cell);
      if (!v) return std::nullopt;
      out.push_back(*v);
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> columns_;
};

// RFC 4180: quoted fields may hold commas, doubled quotes and line breaks.
inline Table parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool any = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    any = true;
    if (c == '"') {
      if (!field.empty()) throw DataError("stray quote inside unquoted CSV field");
      in_quotes = true;
      field_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      if (field_quoted) throw DataError("characters after closing quote in CSV field");
      field.push_back(c);
    }
  }
  if (in_quotes) throw DataError("unterminated quoted CSV field");
  if (any || !field.empty() || !record.empty()) end_record();

  if (records.empty()) throw DataError("CSV has no header row");
  const auto& header = records.front();
  std::vector<std::vector<std::string>> columns(header.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw DataError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                      " fields, header has " + std::to_string(header.size()));
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (detail::trim(records[r][c]).empty())
        throw DataError("empty field in CSV row " + std::to_string(r + 1) + ", column '" + header[c] + "'");
      columns[c].push_back(std::move(records[r][c]));
    }
  }
  std::set<std::string> unique(header.begin(), header.end());
  if (unique.size() != header.size()) throw DataError("duplicate CSV column names");
  return Table(header, std::move(columns));
}

inline std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.names().size(); ++c) out += (c ? "," : "") + csv_field(t.names()[c]);
  out += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.names().size(); ++c) out += (c ? "," : "") + csv_field(t.column(t.names()[c])[r]);
    out += '\n';
  }
  return out;
}

inline Table read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct ColumnEncoding {
  enum class Kind { numeric, categorical };
  std::string source;
  Kind kind = Kind::numeric;
  double center = 0.0;  // numeric: subtracted
  double scale = 1.0;   // numeric: divided by
  std::vector<std::string> levels;  // categorical: sorted, levels[0] is the reference
};

struct Encoding {
  bool standardize = false;
  std::vector<ColumnEncoding> columns;
};

struct Dataset {
  Eigen::MatrixXd design;  // n x R
  std::vector<std::size_t> cluster_of;
  std::vector<double> time;
  std::vector<std::uint8_t> event;
  std::vector<std::string> group_names;
  std::vector<std::string> covariate_names;
  Encoding encoding;

  std::size_t units() const { return time.size(); }
  std::size_t groups() const { return group_names.size(); }
  std::size_t regressors() const { return covariate_names.size(); }
};

// Explicit status wins; otherwise anything past the study end is censored.
inline std::vector<std::uint8_t> resolve_censoring(std::span<const double> time, double grid_end,
                                                   const std::optional<std::vector<std::uint8_t>>& status) {
  if (status) {
    if (status->size() != time.size()) throw DataError("status column length differs from time column");
    return *status;
  }
  std::vector<std::uint8_t> event(time.size());
  for (std::size_t i = 0; i < time.size(); ++i) event[i] = time[i] <= grid_end ? 1 : 0;
  return event;
}

struct BuildOptions {
  bool standardize = false;
  std::optional<std::string> status_column;
  double grid_end = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::vector<std::uint8_t> parse_status(const std::vector<std::string>& raw, const std::string& name) {
  std::vector<std::uint8_t> out;
  out.reserve(raw.size());
  for (const auto& cell : raw) {
    const auto t = trim(cell);
    if (t == "1" || t == "TRUE" || t == "true") out.push_back(1);
    else if (t == "0" || t == "FALSE" || t == "false") out.push_back(0);
    else throw DataError("status column '" + name + "' holds non-binary value '" + std::string(t) + "'");
  }
  return out;
}

// Shared tail of build_dataset/apply_encoding: response, clusters, censoring.
inline void fill_outcome(Dataset& ds, const Table& table, const FormulaSpec& spec, const BuildOptions& opt) {
  const auto t = table.numeric(spec.response);
  if (!t) throw DataError("response column '" + spec.response + "' is not numeric");
  for (double v : *t)
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError("response column '" + spec.response + "' must be positive");
  ds.time = *t;

  std::map<std::string, std::size_t> index;
  const auto& labels = table.column(spec.cluster);
  ds.cluster_of.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto label = std::string(trim(labels[i]));
    auto [it, inserted] = index.try_emplace(label, ds.group_names.size());
    if (inserted) ds.group_names.push_back(label);
    ds.cluster_of[i] = it->second;
  }

  std::optional<std::vector<std::uint8_t>> status;
  if (opt.status_column) status = parse_status(table.column(*opt.status_column), *opt.status_column);
  ds.event = resolve_censoring(ds.time, opt.grid_end, status);
}

inline void encode_columns(Dataset& ds, const Table& table, const Encoding& enc) {
  const auto n = static_cast<Eigen::Index>(table.rows());
  std::size_t width = 0;
  for (const auto& c : enc.columns) width += c.kind == ColumnEncoding::Kind::numeric ? 1 : c.levels.size() - 1;
  ds.design.resize(n, static_cast<Eigen::Index>(width));
  ds.covariate_names.clear();

  Eigen::Index col = 0;
  for (const auto& c : enc.columns) {
    if (c.kind == ColumnEncoding::Kind::numeric) {
      const auto v = table.numeric(c.source);
      if (!v) throw DataError("column '" + c.source + "' was numeric at fit time but is not numeric now");
      for (Eigen::Index i = 0; i < n; ++i) ds.design(i, col) = ((*v)[i] - c.center) / c.scale;
      ds.covariate_names.push_back(c.source);
      ++col;
      continue;
    }
    const auto& raw = table.column(c.source);
    for (std::size_t l = 1; l < c.levels.size(); ++l) ds.covariate_names.push_back(c.source + c.levels[l]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto level = std::string(trim(raw[i]));
      const auto it = std::find(c.levels.begin(), c.levels.end(), level);
      if (it == c.levels.end()) throw DataError("unknown level '" + level + "' in column '" + c.source + "'");
      const auto pos = static_cast<Eigen::Index>(it - c.levels.begin());
      for (Eigen::Index l = 1; l < static_cast<Eigen::Index>(c.levels.size()); ++l)
        ds.design(i, col + l - 1) = (pos == l) ? 1.0 : 0.0;
    }
    col += static_cast<Eigen::Index>(c.levels.size()) - 1;
  }
}

}  // namespace detail

/**
 * Build the model dataset from a raw table.
 *
 * String-valued covariates become g-1 indicator columns named <col><level>
 * with the lexicographically smallest level as reference. Numeric covariates
 * are centred and scaled by the sample mean / standard deviation of the
 * supplied table when opt.standardize is set. Groups are numbered by first
 * appearance of their label.
 */
inline Dataset build_dataset(const Table& table, const FormulaSpec& spec, const BuildOptions& opt = {}) {
  if (table.rows() == 0) throw DataError("table has no rows");
  for (const auto& name : spec.covariates) (void)table.column(name);
  (void)table.column(spec.response);
  (void)table.column(spec.cluster);

  Encoding enc;
  enc.standardize = opt.standardize;
  for (const auto& name : spec.covariates) {
    ColumnEncoding c;
    c.source = name;
    if (const auto v = table.numeric(name)) {
      c.kind = ColumnEncoding::Kind::numeric;
      if (opt.standardize) {
        const double n = static_cast<double>(v->size());
        if (v->size() < 2) throw DataError("cannot standardize column '" + name + "' with fewer than two rows");
        double mean = 0.0;
        for (double x : *v) mean += x;
        mean /= n;
        double ss = 0.0;
        for (double x : *v) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / (n - 1.0));
        if (!(sd > 0.0)) throw DataError("cannot standardize constant column '" + name + "'");
        c.center = mean;
        c.scale = sd;
      }
    } else {
      c.kind = ColumnEncoding::Kind::categorical;
      std::set<std::string> levels;
      for (const auto& cell : table.column(name)) levels.insert(std::string(detail::trim(cell)));
      if (levels.size() < 2) throw DataError("categorical column '" + name + "' is constant");
      c.levels.assign(levels.begin(), levels.end());
    }
    enc.columns.push_back(std::move(c));
  }

  Dataset ds;
  detail::encode_columns(ds, table, enc);
  detail::fill_outcome(ds, table, spec, opt);
  ds.encoding = std::move(enc);
  return ds;
}

// Re-encode a table with an encoding captured at fit time (no re-estimation).
inline Dataset apply_encoding(const Table& table, const FormulaSpec& spec, const Encoding& enc,
                              const BuildOptions& opt = {}) {
  if (table.rows() == 0) throw DataError("table has no rows");
  Dataset ds;
  detail::encode_columns(ds, table, enc);
  detail::fill_outcome(ds, table, spec, opt);
  ds.encoding = enc;
  return ds;
}

}  // namespace frailtime
