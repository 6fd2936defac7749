#include "bnpreg/dataframe.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bnpreg/error.hpp"
#include "bnpreg/text.hpp"

namespace bnpreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::string value_label(double v) { return format_double(v); }

}  // namespace

std::vector<bool> Column::missing_mask() const {
  std::vector<bool> mask(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mask[i] = is_missing(values[i]);
  return mask;
}

std::size_t Column::count_present() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](double v) { return !is_missing(v); }));
}

DataTable::DataTable(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().values.size();
  std::unordered_set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) invalid("empty_column_name", "column names must be non-empty");
    if (!seen.insert(c.name).second) invalid("duplicate_column", "duplicate column name " + c.name);
    if (c.values.size() != n_rows_) {
      invalid("ragged_columns", "column " + c.name + " has the wrong number of rows");
    }
  }
}

bool DataTable::has(const std::string& column) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == column; });
}

const Column& DataTable::column(const std::string& column) const {
  for (const auto& c : columns_) {
    if (c.name == column) return c;
  }
  fail(ErrorKind::validation, "unknown_column", "no column named " + column);
}

std::vector<std::string> DataTable::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

DataTable DataTable::with_column(Column col) const {
  if (!columns_.empty() && col.values.size() != n_rows_) {
    invalid("ragged_columns", "new column " + col.name + " has the wrong number of rows");
  }
  if (col.name.empty()) invalid("empty_column_name", "column names must be non-empty");
  if (has(col.name)) {
    const std::string base = col.name;
    for (int k = 2;; ++k) {
      std::string candidate = base + "_" + std::to_string(k);
      if (!has(candidate)) {
        col.name = std::move(candidate);
        break;
      }
    }
  }
  DataTable out = *this;
  if (out.columns_.empty()) out.n_rows_ = col.values.size();
  out.columns_.push_back(std::move(col));
  return out;
}

DataTable DataTable::with_record(TransformRecord rec) const {
  DataTable out = *this;
  out.lineage_.push_back(std::move(rec));
  return out;
}

DataTable DataTable::renamed(const std::string& from, const std::string& to) const {
  if (to.empty()) invalid("empty_column_name", "column names must be non-empty");
  if (from != to && has(to)) invalid("duplicate_column", "column " + to + " already exists");
  (void)column(from);
  DataTable out = *this;
  for (auto& c : out.columns_) {
    if (c.name == from) c.name = to;
  }
  return out;
}

DataTable parse_csv(const std::string& text, const std::string& name) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) invalid("empty_file", "the file has no header row");

  std::vector<Column> columns;
  for (const auto& field : split_fields(lines[0])) columns.push_back({unquote(field), {}});
  const std::size_t width = columns.size();

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != width) {
      invalid("ragged_row", "row " + std::to_string(r + 1) + " has " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto token = trim(fields[c]);
      double v = kNaN;
      if (!token.empty() && token != "NaN") {
        if (!parse_double(token, v) || !std::isfinite(v)) {
          invalid("non_numeric_cell", "row " + std::to_string(r + 1) + ", column " +
                                          columns[c].name + ": cannot parse '" +
                                          std::string(token) + "'");
        }
      }
      columns[c].values.push_back(v);
    }
  }
  return DataTable(name, std::move(columns));
}

DataTable load_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.stem().string());
}

std::string to_csv(const DataTable& table) {
  std::string out;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += cols[c].name;
  }
  out += '\n';
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      const double v = cols[c].values[r];
      if (!is_missing(v)) out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const DataTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(table));
}

DataTable zscore(const DataTable& table, const std::string& column) {
  const auto& src = table.column(column);
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : src.values) {
    if (!is_missing(v)) {
      sum += v;
      ++n;
    }
  }
  if (n < 2) invalid("degenerate_column", "z-score needs at least two values in " + column);
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : src.values) {
    if (!is_missing(v)) ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) invalid("degenerate_column", "column " + column + " has zero variance");
  Column out{"Z:" + column, src.values};
  for (double& v : out.values) {
    if (!is_missing(v)) v = (v - mean) / sd;
  }
  return table.with_column(std::move(out)).with_record({"zscore", {column}, 0.0, ""});
}

DataTable dummy_code(const DataTable& table, const std::string& column, double reference) {
  const auto& src = table.column(column);
  std::set<double> levels;
  for (double v : src.values) {
    if (!is_missing(v)) levels.insert(v);
  }
  if (!levels.count(reference)) {
    invalid("invalid_reference", "reference value " + value_label(reference) +
                                     " is not observed in " + column);
  }
  DataTable out = table;
  for (double level : levels) {
    if (level == reference) continue;
    Column d{"D:" + column + "=" + value_label(level), src.values};
    for (double& v : d.values) {
      if (!is_missing(v)) v = (v == level) ? 1.0 : 0.0;
    }
    out = out.with_column(std::move(d));
  }
  return out.with_record({"dummy", {column}, reference, ""});
}

DataTable lag(const DataTable& table, const std::string& column, std::size_t k) {
  const auto& src = table.column(column);
  if (k == 0) invalid("bad_lag", "lag must be positive");
  if (k >= table.n_rows()) invalid("bad_lag", "lag must be smaller than the row count");
  Column out{"L" + std::to_string(k) + ":" + column, std::vector<double>(table.n_rows(), kNaN)};
  for (std::size_t i = k; i < table.n_rows(); ++i) out.values[i] = src.values[i - k];
  return table.with_column(std::move(out))
      .with_record({"lag", {column}, static_cast<double>(k), ""});
}

DataTable interact(const DataTable& table, const std::string& a, const std::string& b) {
  const auto& ca = table.column(a);
  const auto& cb = table.column(b);
  Column out{a + "*" + b, std::vector<double>(table.n_rows())};
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    out.values[i] = ca.values[i] * cb.values[i];  // NaN propagates
  }
  return table.with_column(std::move(out)).with_record({"interact", {a, b}, 0.0, ""});
}

DataTable vectorize(const DataTable& table, const std::vector<std::string>& responses,
                    const std::string& id_column) {
  if (responses.size() < 2) invalid("too_few_responses", "vectorize needs at least two responses");
  const auto& ids = table.column(id_column);
  {
    std::set<double> seen;
    for (double v : ids.values) {
      if (is_missing(v)) invalid("missing_id", "id column has missing values");
      if (!seen.insert(v).second) invalid("duplicate_id", "duplicate id " + value_label(v));
    }
  }
  std::set<std::string> response_set(responses.begin(), responses.end());
  if (response_set.size() != responses.size()) {
    invalid("duplicate_response", "response columns must be distinct");
  }
  if (response_set.count(id_column)) invalid("id_is_response", "id column cannot be a response");
  for (const auto& r : responses) (void)table.column(r);

  const std::size_t n = table.n_rows();
  const std::size_t J = responses.size();
  std::vector<Column> cols;
  Column id_out{id_column, {}};
  Column y_out{"Y", {}};
  std::vector<Column> items;
  for (const auto& r : responses) items.push_back({"item:" + r, {}});
  std::vector<Column> rest;
  for (const auto& c : table.columns()) {
    if (c.name != id_column && !response_set.count(c.name)) rest.push_back({c.name, {}});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      id_out.values.push_back(ids.values[i]);
      y_out.values.push_back(table.column(responses[j]).values[i]);
      for (std::size_t l = 0; l < J; ++l) items[l].values.push_back(l == j ? -1.0 : 0.0);
      for (auto& c : rest) c.values.push_back(table.column(c.name).values[i]);
    }
  }
  cols.push_back(std::move(id_out));
  // The stacked response takes a fresh name if "Y" is already a covariate.
  std::set<std::string> taken{id_column};
  for (const auto& c : rest) taken.insert(c.name);
  for (int k = 2; taken.count(y_out.name); ++k) y_out.name = "Y_" + std::to_string(k);
  cols.push_back(std::move(y_out));
  for (auto& c : items) cols.push_back(std::move(c));
  for (auto& c : rest) cols.push_back(std::move(c));

  DataTable out(table.name(), std::move(cols));
  for (const auto& rec : table.lineage()) out = out.with_record(rec);
  TransformRecord rec{"vectorize", responses, 0.0, id_column};
  return out.with_record(rec);
}

DataTable recode_missing(const DataTable& table, const std::string& column, double code) {
  const auto& src = table.column(column);
  Column out{"M:" + column, src.values};
  for (double& v : out.values) {
    if (v == code) v = kNaN;
  }
  return table.with_column(std::move(out)).with_record({"recode_missing", {column}, code, ""});
}

DataTable rename_column(const DataTable& table, const std::string& from, const std::string& to) {
  return table.renamed(from, to).with_record({"rename", {from}, 0.0, to});
}

DataTable apply_transform(const DataTable& table, const TransformRecord& rec) {
  auto need = [&](std::size_t k) {
    if (rec.columns.size() != k) {
      invalid("bad_transform", "transform " + rec.op + " expects " + std::to_string(k) +
                                   " column(s)");
    }
  };
  if (rec.op == "zscore") {
    need(1);
    return zscore(table, rec.columns[0]);
  }
  if (rec.op == "dummy") {
    need(1);
    return dummy_code(table, rec.columns[0], rec.number);
  }
  if (rec.op == "lag") {
    need(1);
    if (!(rec.number >= 1.0) || rec.number != std::floor(rec.number)) {
      invalid("bad_lag", "lag must be a positive integer");
    }
    return lag(table, rec.columns[0], static_cast<std::size_t>(rec.number));
  }
  if (rec.op == "interact") {
    need(2);
    return interact(table, rec.columns[0], rec.columns[1]);
  }
  if (rec.op == "vectorize") return vectorize(table, rec.columns, rec.text);
  if (rec.op == "recode_missing") {
    need(1);
    return recode_missing(table, rec.columns[0], rec.number);
  }
  if (rec.op == "rename") {
    need(1);
    return rename_column(table, rec.columns[0], rec.text);
  }
  invalid("unknown_transform", "unknown transform " + rec.op);
}

DataTable replay_lineage(const DataTable& source, const std::vector<TransformRecord>& lineage) {
  DataTable t = source;
  for (const auto& rec : lineage) t = apply_transform(t, rec);
  return t;
}

void RoleAssignment::validate(const DataTable& table) const {
  if (dependent.empty()) invalid("missing_dependent", "a dependent variable must be assigned");
  if (!table.has(dependent)) invalid("unknown_column", "no column named " + dependent);
  std::set<std::string> cov;
  for (const auto& c : covariates) {
    if (!table.has(c)) invalid("unknown_column", "no column named " + c);
    if (!cov.insert(c).second) invalid("duplicate_covariate", "covariate listed twice: " + c);
  }
  if (cov.count(dependent)) invalid("dependent_is_covariate", "the dependent cannot be a covariate");
  for (const auto* opt : {&group, &weights, &censor_lb, &censor_ub}) {
    if (!*opt) continue;
    if (!table.has(**opt)) invalid("unknown_column", "no column named " + **opt);
    if (cov.count(**opt)) {
      invalid("role_is_covariate", "column " + **opt + " cannot also be a covariate");
    }
    if (**opt == dependent) invalid("role_is_dependent", "column " + **opt + " is the dependent");
  }
  if (censor_lb.has_value() != censor_ub.has_value()) {
    invalid("half_censoring", "both censoring bound columns must be assigned");
  }
}

double CensorStatus::lower() const {
  return (kind == CensorKind::right || kind == CensorKind::interval)
             ? lb
             : -std::numeric_limits<double>::infinity();
}

double CensorStatus::upper() const {
  return (kind == CensorKind::left || kind == CensorKind::interval)
             ? ub
             : std::numeric_limits<double>::infinity();
}

std::vector<CensorStatus> parse_censoring(const DataTable& table, const std::string& lb_col,
                                          const std::string& ub_col, const std::string& y_col) {
  const auto& lb = table.column(lb_col).values;
  const auto& ub = table.column(ub_col).values;
  const std::vector<double>* y = y_col.empty() ? nullptr : &table.column(y_col).values;
  std::vector<CensorStatus> out(table.n_rows());
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    const std::string row = "row " + std::to_string(i + 1);
    if (is_missing(lb[i]) || is_missing(ub[i])) {
      invalid("missing_bound", row + ": censoring bounds must not be missing");
    }
    const bool lo_open = lb[i] == kCensorSentinel;
    const bool hi_open = ub[i] == kCensorSentinel;
    CensorStatus s;
    s.lb = lb[i];
    s.ub = ub[i];
    if (lo_open && hi_open) {
      s.kind = CensorKind::uncensored;
    } else if (hi_open) {
      s.kind = CensorKind::right;
    } else if (lo_open) {
      s.kind = CensorKind::left;
    } else {
      s.kind = CensorKind::interval;
      if (!(lb[i] < ub[i])) invalid("invalid_interval", row + ": lower bound must be below upper");
    }
    if (y && !is_missing((*y)[i])) {
      const double v = (*y)[i];
      if (v < s.lower() || v > s.upper()) {
        invalid("censor_inconsistent", row + ": y lies outside its censoring bounds");
      }
    }
    out[i] = s;
  }
  return out;
}

}  // namespace bnpreg
