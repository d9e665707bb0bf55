#include "dpgan/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "dpgan/error.hpp"

namespace dpgan {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw DataError(where + ": unparseable number '" + s + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void check_token(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError(what + " must be nonempty");
  if (s.find_first_of(",|\n\r") != std::string::npos) {
    throw DataError(what + " '" + s + "' contains a reserved character");
  }
}

}  // namespace

Schema::Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
  std::unordered_set<std::string> names;
  raw_offsets_.reserve(columns_.size());
  encoded_offsets_.reserve(columns_.size());
  for (const Column& c : columns_) {
    check_token(c.name, "schema: column name");
    if (!names.insert(c.name).second) throw DataError("schema: duplicate column name '" + c.name + "'");
    if (c.is_continuous() && !(c.continuous().min < c.continuous().max)) {
      throw DataError("schema: column '" + c.name + "' needs min < max");
    }
    if (c.is_categorical()) {
      const auto& levels = c.categorical().levels;
      if (levels.size() < 2) throw DataError("schema: column '" + c.name + "' needs >= 2 levels");
      std::unordered_set<std::string> seen;
      for (const std::string& l : levels) {
        check_token(l, "schema: level");
        if (!seen.insert(l).second) throw DataError("schema: column '" + c.name + "' has duplicate level '" + l + "'");
      }
    }
    if (c.is_series() && c.series().length < 1) {
      throw DataError("schema: column '" + c.name + "' needs series length >= 1");
    }
    raw_offsets_.push_back(raw_width_);
    encoded_offsets_.push_back(encoded_width_);
    raw_width_ += c.raw_width();
    encoded_width_ += c.encoded_width();
  }
}

std::size_t Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw DataError("schema: no column named '" + name + "'");
}

std::string Schema::serialize() const {
  std::ostringstream os;
  for (const Column& c : columns_) {
    os << c.name << ",";
    if (c.is_continuous()) {
      os << "continuous," << format_number(c.continuous().min) << "," << format_number(c.continuous().max);
    } else if (c.is_categorical()) {
      os << "categorical,";
      const auto& levels = c.categorical().levels;
      for (std::size_t i = 0; i < levels.size(); ++i) {
        if (i) os << "|";
        os << levels[i];
      }
    } else {
      os << "series," << c.series().length;
    }
    os << "\n";
  }
  return os.str();
}

Schema Schema::parse(const std::string& text) {
  std::vector<Column> columns;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string where = "schema line " + std::to_string(line_no);
    std::vector<std::string> parts = split(line, ',');
    if (parts.size() < 2) throw DataError(where + ": expected 'name,kind,...'");
    Column col;
    col.name = parts[0];
    const std::string& kind = parts[1];
    if (kind == "continuous") {
      if (parts.size() != 4) throw DataError(where + ": continuous needs 'name,continuous,min,max'");
      col.kind = ContinuousKind{parse_number(parts[2], where), parse_number(parts[3], where)};
    } else if (kind == "categorical") {
      if (parts.size() != 3) throw DataError(where + ": categorical needs 'name,categorical,l1|l2|...'");
      col.kind = CategoricalKind{split(parts[2], '|')};
    } else if (kind == "series") {
      if (parts.size() != 3) throw DataError(where + ": series needs 'name,series,length'");
      double len = parse_number(parts[2], where);
      if (len < 1 || len != std::floor(len)) throw DataError(where + ": series length must be a positive integer");
      col.kind = SeriesKind{static_cast<std::size_t>(len)};
    } else {
      throw DataError(where + ": unknown kind '" + kind + "'");
    }
    columns.push_back(std::move(col));
  }
  if (columns.empty()) throw DataError("schema: no columns");
  return Schema(std::move(columns));
}

Schema Schema::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("schema: cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return parse(os.str());
}

void Schema::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("schema: cannot write '" + path + "'");
  f << serialize();
}

bool Schema::operator==(const Schema& other) const { return serialize() == other.serialize(); }

void Table::append_row(const std::vector<double>& cells) {
  if (cells.size() != width()) throw DataError("table: row width mismatch");
  cells_.insert(cells_.end(), cells.begin(), cells.end());
}

Table Table::select_rows(const std::vector<std::size_t>& indices) const {
  Table out(schema_);
  out.cells_.reserve(indices.size() * width());
  for (std::size_t r : indices) {
    out.cells_.insert(out.cells_.end(), row(r), row(r) + width());
  }
  return out;
}

namespace {

std::vector<std::string> expected_header(const Schema& schema) {
  std::vector<std::string> h;
  for (const Column& c : schema.columns()) {
    if (c.is_series()) {
      for (std::size_t k = 0; k < c.series().length; ++k) h.push_back(c.name + "_" + std::to_string(k));
    } else {
      h.push_back(c.name);
    }
  }
  return h;
}

}  // namespace

Table load_csv(const std::string& path, const Schema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(f, line)) throw DataError("csv '" + path + "': missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split(line, ',');
  std::vector<std::string> expected = expected_header(schema);
  if (header != expected) {
    throw DataError("csv '" + path + "': header does not match schema (expected " + std::to_string(expected.size()) +
                    " columns starting '" + (expected.empty() ? "" : expected[0]) + "')");
  }

  Table table(schema);
  std::size_t row_no = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;
    std::vector<std::string> cells = split(line, ',');
    if (cells.size() != schema.raw_width()) {
      throw DataError("csv '" + path + "' row " + std::to_string(row_no) + ": expected " +
                      std::to_string(schema.raw_width()) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> parsed(schema.raw_width());
    std::size_t flat = 0;
    for (const Column& c : schema.columns()) {
      std::string where = "csv '" + path + "' row " + std::to_string(row_no) + " column '" + c.name + "'";
      if (c.is_continuous()) {
        double v = parse_number(cells[flat], where);
        if (v < c.continuous().min || v > c.continuous().max) {
          throw DataError(where + ": value " + cells[flat] + " outside declared range [" +
                          format_number(c.continuous().min) + "," + format_number(c.continuous().max) + "]");
        }
        parsed[flat++] = v;
      } else if (c.is_categorical()) {
        const auto& levels = c.categorical().levels;
        auto it = std::find(levels.begin(), levels.end(), cells[flat]);
        if (it == levels.end()) throw DataError(where + ": unknown categorical level '" + cells[flat] + "'");
        parsed[flat++] = static_cast<double>(it - levels.begin());
      } else {
        for (std::size_t k = 0; k < c.series().length; ++k) {
          double v = parse_number(cells[flat], where + " step " + std::to_string(k));
          if (v < -1.0 || v > 1.0) {
            throw DataError(where + " step " + std::to_string(k) + ": series value " + cells[flat] +
                            " outside [-1,1]");
          }
          parsed[flat++] = v;
        }
      }
    }
    table.append_row(parsed);
  }
  return table;
}

void save_csv(const Table& table, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("csv: cannot write '" + path + "'");
  const Schema& schema = table.schema();
  std::vector<std::string> header = expected_header(schema);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) f << ",";
    f << header[i];
  }
  f << "\n";
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    std::size_t flat = 0;
    bool first = true;
    for (const Column& c : schema.columns()) {
      for (std::size_t k = 0; k < c.raw_width(); ++k, ++flat) {
        if (!first) f << ",";
        first = false;
        double v = table.cell(r, flat);
        if (c.is_categorical()) {
          f << c.categorical().levels[static_cast<std::size_t>(v)];
        } else {
          f << format_number(v);
        }
      }
    }
    f << "\n";
  }
}

EncodedDataset encode(const Table& table) {
  const Schema& schema = table.schema();
  EncodedDataset out;
  out.schema = schema;
  out.n_rows = table.n_rows();
  out.rows.assign(out.n_rows * schema.encoded_width(), 0.0);
  for (std::size_t r = 0; r < out.n_rows; ++r) {
    double* dst = out.row(r);
    std::size_t flat = 0;
    for (const Column& c : schema.columns()) {
      if (c.is_continuous()) {
        const auto& k = c.continuous();
        double v = table.cell(r, flat++);
        *dst++ = 2.0 * (v - k.min) / (k.max - k.min) - 1.0;
      } else if (c.is_categorical()) {
        std::size_t idx = static_cast<std::size_t>(table.cell(r, flat++));
        for (std::size_t l = 0; l < c.categorical().levels.size(); ++l) *dst++ = (l == idx) ? 1.0 : 0.0;
      } else {
        for (std::size_t k = 0; k < c.series().length; ++k) *dst++ = table.cell(r, flat++);
      }
    }
  }
  return out;
}

Table decode(const EncodedDataset& encoded) {
  const Schema& schema = encoded.schema;
  Table out(schema);
  std::vector<double> cells(schema.raw_width());
  for (std::size_t r = 0; r < encoded.n_rows; ++r) {
    const double* src = encoded.row(r);
    std::size_t flat = 0;
    for (const Column& c : schema.columns()) {
      if (c.is_continuous()) {
        const auto& k = c.continuous();
        double v = k.min + (*src++ + 1.0) * 0.5 * (k.max - k.min);
        cells[flat++] = std::clamp(v, k.min, k.max);
      } else if (c.is_categorical()) {
        std::size_t levels = c.categorical().levels.size();
        std::size_t hot = levels;
        for (std::size_t l = 0; l < levels; ++l) {
          if (src[l] == 1.0) {
            if (hot != levels) throw DataError("decode: row " + std::to_string(r) + " column '" + c.name + "' has multiple hot entries");
            hot = l;
          } else if (src[l] != 0.0) {
            throw DataError("decode: row " + std::to_string(r) + " column '" + c.name + "' is not one-hot");
          }
        }
        if (hot == levels) throw DataError("decode: row " + std::to_string(r) + " column '" + c.name + "' has no hot entry");
        cells[flat++] = static_cast<double>(hot);
        src += levels;
      } else {
        for (std::size_t k = 0; k < c.series().length; ++k) cells[flat++] = *src++;
      }
    }
    out.append_row(cells);
  }
  return out;
}

std::pair<Table, Table> balanced_split(const Table& table, const std::string& label_column, double test_fraction,
                                       std::uint64_t seed) {
  const Schema& schema = table.schema();
  std::size_t col = schema.find(label_column);
  const Column& c = schema.column(col);
  if (!c.is_categorical() || c.categorical().levels.size() != 2) {
    throw DataError("balanced_split: label column '" + label_column + "' must be categorical with exactly 2 levels");
  }
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw DataError("balanced_split: test_fraction must be in [0,1]");
  }
  std::size_t flat = schema.raw_offset(col);

  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    by_class[table.cell(r, flat) == 0.0 ? 0 : 1].push_back(r);
  }
  Rng rng(Rng::derive_seed(seed, "balanced_split"));
  for (auto& idx : by_class) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  }
  std::size_t m = std::min(by_class[0].size(), by_class[1].size());
  std::size_t k_test = static_cast<std::size_t>(std::llround(static_cast<double>(m) * test_fraction));

  std::vector<std::size_t> train_idx, test_idx;
  for (auto& idx : by_class) {
    for (std::size_t i = 0; i < m; ++i) (i < k_test ? test_idx : train_idx).push_back(idx[i]);
  }
  for (std::size_t i = train_idx.size(); i > 1; --i) std::swap(train_idx[i - 1], train_idx[rng.index(i)]);
  for (std::size_t i = test_idx.size(); i > 1; --i) std::swap(test_idx[i - 1], test_idx[rng.index(i)]);
  return {table.select_rows(train_idx), table.select_rows(test_idx)};
}

}  // namespace dpgan
