#ifndef FEDSCALE_TOOLS_REPORT_HPP
#define FEDSCALE_TOOLS_REPORT_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace fedscale::cli {

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row)
    {
        if (row.size() != columns.size()) {
            throw std::logic_error("table row width differs from header");
        }
        rows.push_back(std::move(row));
    }
};

inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c)
{
    struct {
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return v; }
    } visit;
    return std::visit(visit, c);
}

inline nlohmann::json cell_json(const Cell& c)
{
    struct {
        nlohmann::json operator()(double v) const { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
        nlohmann::json operator()(std::int64_t v) const { return v; }
        nlohmann::json operator()(bool v) const { return v; }
        nlohmann::json operator()(const std::string& v) const { return v; }
    } visit;
    return std::visit(visit, c);
}

inline void write_csv(const std::filesystem::path& path, const Table& t)
{
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        out << (i ? "," : "") << t.columns[i];
    }
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_cell(row[i]);
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

inline nlohmann::json table_json(const Table& t)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            obj[t.columns[i]] = cell_json(row[i]);
        }
        arr.push_back(std::move(obj));
    }
    return arr;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

/// Long-format plot table: x, y, series.
struct PlotData {
    std::string name;
    Table table{{"x", "y", "series"}, {}};

    void point(double x, double y, std::string series) { table.add({x, y, std::move(series)}); }
};

struct PipelineOutput {
    Table results;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<PlotData> plots;
    int exit_code = 0;
};

} // namespace fedscale::cli

#endif // FEDSCALE_TOOLS_REPORT_HPP
