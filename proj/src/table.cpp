#include "safeprob/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace safeprob::experiments {

const char* type_name(ColumnType t) {
    switch (t) {
        case ColumnType::String: return "string";
        case ColumnType::Int: return "int";
        case ColumnType::Float: return "float";
    }
    return "unknown";
}

ResultTable::ResultTable(std::vector<Column> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw std::invalid_argument("table needs at least one column");
}

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns_.size())
        throw std::invalid_argument("row has " + std::to_string(row.size()) + " cells, table has " +
                                    std::to_string(columns_.size()) + " columns");
    for (std::size_t i = 0; i < row.size(); ++i) {
        const auto& col = columns_[i];
        const bool ok = (col.type == ColumnType::String && std::holds_alternative<std::string>(row[i])) ||
                        (col.type == ColumnType::Int && std::holds_alternative<std::int64_t>(row[i])) ||
                        (col.type == ColumnType::Float && std::holds_alternative<double>(row[i]));
        if (!ok) throw std::invalid_argument("column '" + col.name + "' expects " + type_name(col.type));
        if (col.type == ColumnType::Float && !std::isfinite(std::get<double>(row[i])))
            throw std::invalid_argument("non-finite value in column '" + col.name + "'");
    }
    rows_.push_back(std::move(row));
}

std::size_t ResultTable::index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw std::out_of_range("no column '" + name + "'");
}

double ResultTable::number(std::size_t row, const std::string& column) const {
    const Cell& c = rows_.at(row).at(index(column));
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    throw std::invalid_argument("column '" + column + "' is not numeric");
}

const std::string& ResultTable::text(std::size_t row, const std::string& column) const {
    return std::get<std::string>(rows_.at(row).at(index(column)));
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string ResultTable::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(columns_[i].name);
    }
    out += "\r\n";
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, std::string>) out += csv_escape(v);
                    else if constexpr (std::is_same_v<T, double>) out += format_double(v);
                    else out += std::to_string(v);
                },
                row[i]);
        }
        out += "\r\n";
    }
    return out;
}

nlohmann::json ResultTable::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows_) {
        nlohmann::json rec = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i)
            std::visit([&](const auto& v) { rec[columns_[i].name] = v; }, row[i]);
        arr.push_back(std::move(rec));
    }
    return arr;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace safeprob::experiments
