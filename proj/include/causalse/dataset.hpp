#pragma once

// Columnar dataset: CSV ingestion with type inference, summary profiling,
// correlation matrices and the data-transformation steps that turn raw
// observations into analysis-ready treatment/outcome columns.
//
// Cells are stored as doubles; NaN marks a missing cell. Categorical columns
// hold integer codes assigned by first appearance, with the labels kept on
// the column. Every operation returns a new value; nothing mutates in place.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "causalse/common.hpp"
#include "causalse/stats.hpp"

namespace causalse {

enum class ColumnKind { Binary, Continuous, Categorical };

inline const char* to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::Binary: return "binary";
        case ColumnKind::Continuous: return "continuous";
        case ColumnKind::Categorical: return "categorical";
    }
    return "?";
}

inline std::optional<ColumnKind> parse_column_kind(const std::string& s) {
    if (s == "binary") return ColumnKind::Binary;
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "categorical") return ColumnKind::Categorical;
    return std::nullopt;
}

inline double missing_cell() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<double> values;            // NaN = missing; codes for categorical
    std::vector<std::string> categories;   // categorical only, code -> label

    const std::string& label_for_code(size_t code) const {
        if (code >= categories.size()) throw Error("column '" + name + "': bad category code");
        return categories[code];
    }
};

class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
        row_count_ = columns_.empty() ? 0 : columns_.front().values.size();
        for (size_t i = 0; i < columns_.size(); ++i) {
            const Column& c = columns_[i];
            if (c.values.size() != row_count_)
                throw Error("column '" + c.name + "' has " + std::to_string(c.values.size()) +
                            " rows, expected " + std::to_string(row_count_));
            if (!index_.emplace(c.name, i).second)
                throw Error("duplicate column name '" + c.name + "'");
            if (c.kind == ColumnKind::Binary) {
                for (double v : c.values)
                    if (!is_missing(v) && v != 0.0 && v != 1.0)
                        throw Error("binary column '" + c.name + "' contains a value other than 0/1");
            }
        }
    }

    size_t row_count() const { return row_count_; }
    size_t column_count() const { return columns_.size(); }
    bool has_column(const std::string& name) const { return index_.count(name) > 0; }

    const Column& column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error("no such column: '" + name + "'");
        return columns_[it->second];
    }

    const std::vector<Column>& columns() const { return columns_; }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        names.reserve(columns_.size());
        for (const Column& c : columns_) names.push_back(c.name);
        return names;
    }

    /// Copy of this dataset with one extra column appended.
    Dataset with_column(Column extra) const {
        if (!columns_.empty() && extra.values.size() != row_count_)
            throw Error("with_column: row count mismatch for '" + extra.name + "'");
        std::vector<Column> cols = columns_;
        cols.push_back(std::move(extra));
        return Dataset(std::move(cols));
    }

    /// Copy keeping only the rows with the given indices (in the given order).
    Dataset select_rows(const std::vector<size_t>& rows) const {
        std::vector<Column> cols;
        cols.reserve(columns_.size());
        for (const Column& c : columns_) {
            Column out;
            out.name = c.name;
            out.kind = c.kind;
            out.categories = c.categories;
            out.values.reserve(rows.size());
            for (size_t r : rows) {
                if (r >= row_count_) throw Error("select_rows: index out of range");
                out.values.push_back(c.values[r]);
            }
            cols.push_back(std::move(out));
        }
        return Dataset(std::move(cols));
    }

private:
    std::vector<Column> columns_;
    std::unordered_map<std::string, size_t> index_;
    size_t row_count_ = 0;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

// RFC-4180 reader: quoted fields may contain commas, quotes ("") and newlines.
inline std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool record_started = false;
    int c;
    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        records.push_back(record);
        record.clear();
        record_started = false;
    };
    while ((c = in.get()) != EOF) {
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                in_quotes = true;
                field_started = true;
                record_started = true;
                break;
            case ',':
                end_field();
                record_started = true;
                break;
            case '\r':
                if (in.peek() == '\n') in.get();
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(ch);
                field_started = true;
                record_started = true;
                break;
        }
    }
    if (in_quotes) throw Error("CSV: unterminated quoted field");
    if (record_started || field_started || !record.empty()) end_record();
    return records;
}

inline bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

using SchemaHints = std::map<std::string, ColumnKind>;

/// Load a CSV file. First row is the header; `NA` or an empty cell is
/// missing. Column kinds come from `hints` when given, otherwise they are
/// inferred: all cells 0/1 -> binary, all numeric -> continuous, anything
/// else -> categorical with codes in first-appearance order.
inline Dataset load_csv(const std::string& path, const SchemaHints& hints = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    auto records = detail::read_csv_records(in);
    if (records.empty()) throw Error("CSV '" + path + "': missing header row");

    const auto& header = records.front();
    std::set<std::string> seen;
    for (const auto& h : header) {
        if (h.empty()) throw Error("CSV '" + path + "': empty column name in header");
        if (!seen.insert(h).second) throw Error("CSV '" + path + "': duplicate column '" + h + "'");
    }
    for (const auto& [name, kind] : hints) {
        (void)kind;
        if (!seen.count(name))
            throw Error("CSV '" + path + "': schema hint for unknown column '" + name + "'");
    }

    const size_t ncols = header.size();
    const size_t nrows = records.size() - 1;
    for (size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != ncols)
            throw Error("CSV '" + path + "': row " + std::to_string(r + 1) + " has " +
                        std::to_string(records[r].size()) + " fields, expected " +
                        std::to_string(ncols));
    }

    std::vector<Column> columns(ncols);
    for (size_t j = 0; j < ncols; ++j) {
        Column& col = columns[j];
        col.name = header[j];

        std::vector<const std::string*> cells(nrows);
        bool all_numeric = true;
        bool all_binary = true;
        bool any_value = false;
        for (size_t r = 0; r < nrows; ++r) {
            const std::string& cell = records[r + 1][j];
            cells[r] = &cell;
            if (cell.empty() || cell == "NA") continue;
            any_value = true;
            double v;
            if (detail::parse_number(cell, v)) {
                if (v != 0.0 && v != 1.0) all_binary = false;
            } else {
                all_numeric = false;
                all_binary = false;
            }
        }

        auto hint = hints.find(col.name);
        if (hint != hints.end()) {
            col.kind = hint->second;
        } else if (!any_value) {
            col.kind = ColumnKind::Continuous;
        } else if (all_binary) {
            col.kind = ColumnKind::Binary;
        } else if (all_numeric) {
            col.kind = ColumnKind::Continuous;
        } else {
            col.kind = ColumnKind::Categorical;
        }

        col.values.reserve(nrows);
        std::unordered_map<std::string, size_t> codes;
        for (size_t r = 0; r < nrows; ++r) {
            const std::string& cell = *cells[r];
            if (cell.empty() || cell == "NA") {
                col.values.push_back(missing_cell());
                continue;
            }
            if (col.kind == ColumnKind::Categorical) {
                auto [it, inserted] = codes.emplace(cell, col.categories.size());
                if (inserted) col.categories.push_back(cell);
                col.values.push_back(static_cast<double>(it->second));
            } else {
                double v;
                if (!detail::parse_number(cell, v))
                    throw Error("CSV '" + path + "': column '" + col.name + "' row " +
                                std::to_string(r + 2) + ": '" + cell + "' is not numeric");
                if (col.kind == ColumnKind::Binary && v != 0.0 && v != 1.0)
                    throw Error("CSV '" + path + "': column '" + col.name + "' row " +
                                std::to_string(r + 2) + ": binary cell must be 0 or 1");
                col.values.push_back(v);
            }
        }
    }
    return Dataset(std::move(columns));
}

/// Write a dataset as CSV. Missing cells become `NA`; categorical cells are
/// written as their labels; doubles use %.17g so values round-trip exactly.
inline void write_csv(const Dataset& ds, std::ostream& out) {
    const auto& cols = ds.columns();
    for (size_t j = 0; j < cols.size(); ++j) {
        if (j) out << ',';
        out << cols[j].name;
    }
    out << '\n';
    for (size_t r = 0; r < ds.row_count(); ++r) {
        for (size_t j = 0; j < cols.size(); ++j) {
            if (j) out << ',';
            const double v = cols[j].values[r];
            if (is_missing(v)) {
                out << "NA";
            } else if (cols[j].kind == ColumnKind::Categorical) {
                out << cols[j].label_for_code(static_cast<size_t>(v));
            } else {
                out << detail::format_double(v);
            }
        }
        out << '\n';
    }
}

inline void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    write_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Profiling
// ---------------------------------------------------------------------------

struct ColumnProfile {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_dev = std::numeric_limits<double>::quiet_NaN(); // population (divide by n)
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    size_t missing_count = 0;
    size_t distinct_count = 0;
};

/// Per-column mean / population std / min / max plus missing and distinct
/// counts. An all-missing column keeps NaN statistics.
inline std::vector<ColumnProfile> profile(const Dataset& ds) {
    std::vector<ColumnProfile> out;
    out.reserve(ds.column_count());
    for (const Column& c : ds.columns()) {
        ColumnProfile p;
        p.name = c.name;
        p.kind = c.kind;
        std::vector<double> present;
        present.reserve(c.values.size());
        for (double v : c.values) {
            if (is_missing(v))
                ++p.missing_count;
            else
                present.push_back(v);
        }
        if (!present.empty()) {
            p.mean = mean_of(present);
            p.std_dev = population_std(present);
            p.min = *std::min_element(present.begin(), present.end());
            p.max = *std::max_element(present.begin(), present.end());
            std::set<double> distinct(present.begin(), present.end());
            p.distinct_count = distinct.size();
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Correlation matrix
// ---------------------------------------------------------------------------

enum class CorrelationMethod { Pearson, Spearman };

inline const char* to_string(CorrelationMethod m) {
    return m == CorrelationMethod::Pearson ? "pearson" : "spearman";
}

struct CorrelationMatrix {
    std::vector<std::string> variable_names;
    CorrelationMethod method = CorrelationMethod::Pearson;
    std::vector<std::vector<double>> entries;          // symmetric, unit diagonal
    std::vector<std::pair<size_t, size_t>> constant_flags; // pairs where a side was constant

    double at(size_t i, size_t j) const { return entries[i][j]; }
};

/// Pairwise correlations with pairwise deletion of missing cells. A pair with
/// a constant column gets correlation 0 and is flagged rather than NaN.
inline CorrelationMatrix correlation_matrix(const Dataset& ds,
                                            const std::vector<std::string>& vars,
                                            CorrelationMethod method) {
    if (ds.row_count() < 2) throw Error("correlation_matrix: need at least 2 rows");
    for (const auto& v : vars) {
        const Column& c = ds.column(v);
        if (c.kind == ColumnKind::Categorical)
            throw Error("correlation_matrix: column '" + v + "' is categorical");
    }
    CorrelationMatrix m;
    m.variable_names = vars;
    m.method = method;
    const size_t k = vars.size();
    m.entries.assign(k, std::vector<double>(k, 0.0));
    for (size_t i = 0; i < k; ++i) {
        for (size_t j = i; j < k; ++j) {
            const auto& xi = ds.column(vars[i]).values;
            const auto& xj = ds.column(vars[j]).values;
            std::vector<double> a, b;
            for (size_t r = 0; r < ds.row_count(); ++r) {
                if (is_missing(xi[r]) || is_missing(xj[r])) continue;
                a.push_back(xi[r]);
                b.push_back(xj[r]);
            }
            if (a.size() < 2)
                throw Error("correlation_matrix: fewer than 2 complete pairs for (" + vars[i] +
                            ", " + vars[j] + ")");
            PairwiseCorrelation r = method == CorrelationMethod::Pearson ? pearson(a, b)
                                                                         : spearman(a, b);
            double value = r.value;
            if (i == j && !r.constant_input) value = 1.0;
            m.entries[i][j] = value;
            m.entries[j][i] = value;
            if (r.constant_input) m.constant_flags.emplace_back(i, j);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Transformation
// ---------------------------------------------------------------------------

struct TransformStep {
    enum class Op { Binarize, ZScore, Rename, Drop } op = Op::ZScore;
    std::string column;
    std::string control_level;   // Binarize
    std::string treatment_level; // Binarize
    std::string new_name;        // Rename target
};

using TransformSpec = std::vector<TransformStep>;

namespace detail {

inline Dataset apply_binarize(const Dataset& ds, const TransformStep& step) {
    const Column& col = ds.column(step.column);
    if (col.kind == ColumnKind::Continuous)
        throw Error("binarize: column '" + step.column +
                    "' is continuous; binarization needs a categorical or binary column");

    auto level_code = [&](const std::string& level) -> double {
        if (col.kind == ColumnKind::Binary) {
            if (level == "0") return 0.0;
            if (level == "1") return 1.0;
            throw Error("binarize: level '" + level + "' absent from binary column '" +
                        step.column + "'");
        }
        for (size_t c = 0; c < col.categories.size(); ++c)
            if (col.categories[c] == level) return static_cast<double>(c);
        throw Error("binarize: level '" + level + "' absent from column '" + step.column + "'");
    };
    const double control = level_code(step.control_level);
    const double treatment = level_code(step.treatment_level);
    if (control == treatment) throw Error("binarize: control and treatment levels coincide");

    std::vector<size_t> keep;
    for (size_t r = 0; r < ds.row_count(); ++r) {
        const double v = col.values[r];
        if (!is_missing(v) && (v == control || v == treatment)) keep.push_back(r);
    }
    Dataset filtered = ds.select_rows(keep);

    std::vector<Column> cols;
    for (const Column& c : filtered.columns()) {
        if (c.name != step.column) {
            cols.push_back(c);
            continue;
        }
        Column b;
        b.name = step.new_name.empty() ? c.name : step.new_name;
        b.kind = ColumnKind::Binary;
        b.values.reserve(c.values.size());
        for (double v : c.values) b.values.push_back(v == treatment ? 1.0 : 0.0);
        cols.push_back(std::move(b));
    }
    return Dataset(std::move(cols));
}

inline Dataset apply_zscore(const Dataset& ds, const TransformStep& step) {
    const Column& col = ds.column(step.column);
    if (col.kind != ColumnKind::Continuous && col.kind != ColumnKind::Binary)
        throw Error("zscore: column '" + step.column + "' is not numeric");
    std::vector<double> present;
    for (double v : col.values)
        if (!is_missing(v)) present.push_back(v);
    if (present.empty()) throw Error("zscore: column '" + step.column + "' is all-missing");
    const double m = mean_of(present);
    const double s = population_std(present);
    if (s == 0.0) throw Error("zscore: column '" + step.column + "' has zero variance");
    std::vector<Column> cols;
    for (const Column& c : ds.columns()) {
        if (c.name != step.column) {
            cols.push_back(c);
            continue;
        }
        Column z;
        z.name = c.name;
        z.kind = ColumnKind::Continuous;
        z.values.reserve(c.values.size());
        for (double v : c.values)
            z.values.push_back(is_missing(v) ? missing_cell() : (v - m) / s);
        cols.push_back(std::move(z));
    }
    return Dataset(std::move(cols));
}

inline Dataset apply_rename(const Dataset& ds, const TransformStep& step) {
    ds.column(step.column); // existence check
    if (step.new_name.empty()) throw Error("rename: empty target name");
    std::vector<Column> cols;
    for (const Column& c : ds.columns()) {
        Column copy = c;
        if (copy.name == step.column) copy.name = step.new_name;
        cols.push_back(std::move(copy));
    }
    return Dataset(std::move(cols));
}

inline Dataset apply_drop(const Dataset& ds, const TransformStep& step) {
    ds.column(step.column); // existence check
    std::vector<Column> cols;
    for (const Column& c : ds.columns())
        if (c.name != step.column) cols.push_back(c);
    return Dataset(std::move(cols));
}

} // namespace detail

/// Apply transformation steps in order; the input dataset is untouched.
inline Dataset transform(const Dataset& ds, const TransformSpec& spec) {
    Dataset current = ds;
    for (const TransformStep& step : spec) {
        switch (step.op) {
            case TransformStep::Op::Binarize: current = detail::apply_binarize(current, step); break;
            case TransformStep::Op::ZScore: current = detail::apply_zscore(current, step); break;
            case TransformStep::Op::Rename: current = detail::apply_rename(current, step); break;
            case TransformStep::Op::Drop: current = detail::apply_drop(current, step); break;
        }
    }
    return current;
}

} // namespace causalse
