#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bnpreg {

// Missing cells are stored as NaN; every statistic skips them.
inline bool is_missing(double v) { return std::isnan(v); }

struct Column {
  std::string name;
  std::vector<double> values;

  std::vector<bool> missing_mask() const;
  std::size_t count_present() const;
};

// Record of one applied transform, enough to replay it on the source table.
struct TransformRecord {
  std::string op;  // zscore, dummy, lag, interact, vectorize, recode_missing, rename
  std::vector<std::string> columns;
  double number = 0.0;  // reference value, lag, missing code
  std::string text;     // id column or new name
};

class DataTable {
 public:
  DataTable() = default;
  DataTable(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<TransformRecord>& lineage() const { return lineage_; }

  bool has(const std::string& column) const;
  const Column& column(const std::string& column) const;
  std::vector<std::string> names() const;

  // Returns a copy with `col` appended. A clashing name gets a numeric
  // suffix; the final name is what the returned table holds last.
  DataTable with_column(Column col) const;
  DataTable with_record(TransformRecord rec) const;
  DataTable renamed(const std::string& from, const std::string& to) const;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
  std::vector<TransformRecord> lineage_;
};

DataTable parse_csv(const std::string& text, const std::string& name = "data");
DataTable load_csv(const std::filesystem::path& path);
std::string to_csv(const DataTable& table);
void write_csv(const DataTable& table, const std::filesystem::path& path);

DataTable zscore(const DataTable& table, const std::string& column);
DataTable dummy_code(const DataTable& table, const std::string& column, double reference);
DataTable lag(const DataTable& table, const std::string& column, std::size_t k);
DataTable interact(const DataTable& table, const std::string& a, const std::string& b);
DataTable vectorize(const DataTable& table, const std::vector<std::string>& responses,
                    const std::string& id_column);
// New column where cells equal to `code` become missing.
DataTable recode_missing(const DataTable& table, const std::string& column, double code);
DataTable rename_column(const DataTable& table, const std::string& from, const std::string& to);

DataTable apply_transform(const DataTable& table, const TransformRecord& rec);
DataTable replay_lineage(const DataTable& source, const std::vector<TransformRecord>& lineage);

struct RoleAssignment {
  std::string dependent;
  std::vector<std::string> covariates;  // constant term is implicit
  std::optional<std::string> group;
  std::optional<std::string> weights;
  std::optional<std::string> censor_lb;
  std::optional<std::string> censor_ub;

  void validate(const DataTable& table) const;
};

inline constexpr double kCensorSentinel = -9999.0;

enum class CensorKind { uncensored, left, right, interval };

struct CensorStatus {
  CensorKind kind = CensorKind::uncensored;
  double lb = kCensorSentinel;
  double ub = kCensorSentinel;
  // Finite bounds for sampling; infinite where the side is open.
  double lower() const;
  double upper() const;
};

// Classifies each row. Rows with a missing y are only checked for bound
// consistency when y is present.
std::vector<CensorStatus> parse_censoring(const DataTable& table, const std::string& lb_col,
                                          const std::string& ub_col,
                                          const std::string& y_col = "");

}  // namespace bnpreg
