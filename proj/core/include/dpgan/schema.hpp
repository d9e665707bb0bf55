#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "dpgan/rng.hpp"

namespace dpgan {

struct ContinuousKind {
  double min = 0.0;
  double max = 1.0;
};

struct CategoricalKind {
  std::vector<std::string> levels;  // ordered; defines the one-hot layout
};

/// Fixed-length series of pre-normalized values in [-1, 1], one CSV cell per
/// step (header cells are name_0 .. name_{length-1}).
struct SeriesKind {
  std::size_t length = 1;
};

struct Column {
  std::string name;
  std::variant<ContinuousKind, CategoricalKind, SeriesKind> kind;

  bool is_continuous() const { return std::holds_alternative<ContinuousKind>(kind); }
  bool is_categorical() const { return std::holds_alternative<CategoricalKind>(kind); }
  bool is_series() const { return std::holds_alternative<SeriesKind>(kind); }
  const ContinuousKind& continuous() const { return std::get<ContinuousKind>(kind); }
  const CategoricalKind& categorical() const { return std::get<CategoricalKind>(kind); }
  const SeriesKind& series() const { return std::get<SeriesKind>(kind); }

  /// Cells this column occupies in a raw table row (series expand).
  std::size_t raw_width() const { return is_series() ? series().length : 1; }
  /// Cells this column occupies in an encoded row.
  std::size_t encoded_width() const {
    if (is_categorical()) return categorical().levels.size();
    return raw_width();
  }
};

/// Ordered column descriptions. Always an explicit sidecar, never inferred
/// from data.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<Column> columns);  // validates, throws DataError

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_[i]; }
  std::size_t column_count() const { return columns_.size(); }
  std::size_t find(const std::string& name) const;  // throws DataError if absent

  std::size_t raw_width() const { return raw_width_; }
  std::size_t encoded_width() const { return encoded_width_; }
  std::size_t raw_offset(std::size_t col) const { return raw_offsets_[col]; }
  std::size_t encoded_offset(std::size_t col) const { return encoded_offsets_[col]; }

  std::string serialize() const;
  static Schema parse(const std::string& text);
  static Schema load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const Schema& other) const;

 private:
  std::vector<Column> columns_;
  std::vector<std::size_t> raw_offsets_;
  std::vector<std::size_t> encoded_offsets_;
  std::size_t raw_width_ = 0;
  std::size_t encoded_width_ = 0;
};

/// Typed rows under a schema. Continuous and series cells hold their value;
/// categorical cells hold the level index.
class Table {
 public:
  Table() = default;
  explicit Table(Schema schema) : schema_(std::move(schema)) {}

  const Schema& schema() const { return schema_; }
  std::size_t n_rows() const { return schema_.raw_width() == 0 ? 0 : cells_.size() / schema_.raw_width(); }
  std::size_t width() const { return schema_.raw_width(); }

  double cell(std::size_t row, std::size_t flat_col) const { return cells_[row * width() + flat_col]; }
  double& cell(std::size_t row, std::size_t flat_col) { return cells_[row * width() + flat_col]; }
  const double* row(std::size_t r) const { return cells_.data() + r * width(); }

  void append_row(const std::vector<double>& cells);
  Table select_rows(const std::vector<std::size_t>& indices) const;

  std::vector<double>& cells() { return cells_; }
  const std::vector<double>& cells() const { return cells_; }

 private:
  Schema schema_;
  std::vector<double> cells_;
};

/// One-hot / normalized numeric matrix, N x encoded_width.
struct EncodedDataset {
  Schema schema;
  std::size_t n_rows = 0;
  std::vector<double> rows;  // row-major

  std::size_t width() const { return schema.encoded_width(); }
  const double* row(std::size_t r) const { return rows.data() + r * width(); }
  double* row(std::size_t r) { return rows.data() + r * width(); }
};

Table load_csv(const std::string& path, const Schema& schema);
void save_csv(const Table& table, const std::string& path);

EncodedDataset encode(const Table& table);
Table decode(const EncodedDataset& encoded);

/// Splits on a binary categorical label so that every output is exactly
/// class-balanced (the minority class count governs). Deterministic per
/// seed; outputs are disjoint.
std::pair<Table, Table> balanced_split(const Table& table, const std::string& label_column, double test_fraction,
                                       std::uint64_t seed);

}  // namespace dpgan
