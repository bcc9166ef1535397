// table.hpp - typed result tables with RFC-4180 CSV and JSON writers.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace safeprob::experiments {

enum class ColumnType { String, Int, Float };

struct Column {
    std::string name;
    ColumnType type;
};

using Cell = std::variant<std::string, std::int64_t, double>;

const char* type_name(ColumnType t);

class ResultTable {
public:
    explicit ResultTable(std::vector<Column> columns);

    const std::vector<Column>& columns() const { return columns_; }
    const std::vector<std::vector<Cell>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

    /// Throws std::invalid_argument on an arity or type mismatch, or a
    /// non-finite float.
    void add_row(std::vector<Cell> row);

    /// Column index by name; throws std::out_of_range if absent.
    std::size_t index(const std::string& name) const;
    double number(std::size_t row, const std::string& column) const;
    const std::string& text(std::size_t row, const std::string& column) const;

    std::string to_csv() const;
    nlohmann::json to_json() const;

private:
    std::vector<Column> columns_;
    std::vector<std::vector<Cell>> rows_;
};

/// %.17g-style formatting (trailing zeros dropped), independent of the locale.
std::string format_double(double v);

/// RFC-4180 quoting for one field.
std::string csv_escape(const std::string& field);

/// Writes text to path, creating parent directories. Throws std::runtime_error
/// on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace safeprob::experiments
