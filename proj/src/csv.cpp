#include "tabdc/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tabdc/errors.hpp"

namespace tabdc::data {

namespace {

constexpr const char* kCategoricalPrefix = "categorical:";

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw ConfigError("csv: non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                          ", column '" + column + "'");
    return v;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

RawTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("csv: cannot open file '" + path.string() + "'");
    RawTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("csv: empty file '" + path.string() + "'");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ConfigError("csv: row " + std::to_string(t.rows.size() + 1) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.rows.empty()) throw ConfigError("csv: no data rows in '" + path.string() + "'");
    return t;
}

std::size_t find_column(const RawTable& t, const std::string& name) {
    for (std::size_t j = 0; j < t.header.size(); ++j)
        if (t.header[j] == name) return j;
    throw ConfigError("csv: missing column '" + name + "'");
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

AnyDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                    const std::optional<std::string>& time_column,
                    const std::optional<std::string>& event_column) {
    if (time_column.has_value() != event_column.has_value())
        throw ConfigError("csv: time and event columns must be given together");
    const bool survival = time_column.has_value();

    RawTable t = read_table(path);
    std::size_t label_idx = static_cast<std::size_t>(-1);
    std::size_t time_idx = static_cast<std::size_t>(-1);
    std::size_t event_idx = static_cast<std::size_t>(-1);
    if (survival) {
        time_idx = find_column(t, *time_column);
        event_idx = find_column(t, *event_column);
    } else {
        label_idx = find_column(t, label_column);
    }

    // plan output columns, expanding categorical ones in place
    struct ColPlan {
        std::size_t src;
        bool categorical;
        std::vector<std::string> levels;  // sorted distinct values
        std::string base_name;
    };
    std::vector<ColPlan> plan;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (j == label_idx || j == time_idx || j == event_idx) continue;
        const std::string& h = t.header[j];
        if (h.rfind(kCategoricalPrefix, 0) == 0) {
            ColPlan p{j, true, {}, h.substr(std::string(kCategoricalPrefix).size())};
            std::set<std::string> levels;
            for (const auto& row : t.rows) {
                if (row[j].empty())
                    throw ConfigError("csv: missing value in column '" + h + "'");
                levels.insert(row[j]);
            }
            p.levels.assign(levels.begin(), levels.end());
            for (const auto& lv : p.levels) names.push_back(p.base_name + "=" + lv);
            plan.push_back(std::move(p));
        } else {
            plan.push_back({j, false, {}, h});
            names.push_back(h);
        }
    }
    if (names.empty()) throw ConfigError("csv: no feature columns");

    const std::size_t n = t.rows.size();
    Matrix x(n, names.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t out_j = 0;
        for (const auto& p : plan) {
            const std::string& cell = t.rows[i][p.src];
            if (p.categorical) {
                for (const auto& lv : p.levels) x(i, out_j++) = (cell == lv) ? 1.0 : 0.0;
            } else {
                x(i, out_j++) = parse_cell(cell, i + 1, p.base_name);
            }
        }
    }

    if (survival) {
        SurvivalDataset ds;
        ds.features = std::move(x);
        ds.feature_names = std::move(names);
        ds.times.reserve(n);
        ds.events.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            double tt = parse_cell(t.rows[i][time_idx], i + 1, *time_column);
            if (!(tt > 0.0))
                throw ConfigError("csv: non-positive duration at row " + std::to_string(i + 1));
            double ev = parse_cell(t.rows[i][event_idx], i + 1, *event_column);
            if (ev != 0.0 && ev != 1.0)
                throw ConfigError("csv: event flag must be 0 or 1 at row " + std::to_string(i + 1));
            ds.times.push_back(tt);
            ds.events.push_back(static_cast<int>(ev));
        }
        validate(ds);
        return ds;
    }

    Dataset ds;
    ds.features = std::move(x);
    ds.feature_names = std::move(names);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y = parse_cell(t.rows[i][label_idx], i + 1, label_column);
        if (y != 0.0 && y != 1.0)
            throw ConfigError("csv: label must be 0 or 1 at row " + std::to_string(i + 1));
        ds.labels.push_back(static_cast<int>(y));
    }
    validate(ds);
    return ds;
}

namespace {

void write_header_and_rows(std::ostream& out, const std::vector<std::string>& feature_names,
                           const Matrix& x, const std::vector<std::string>& outcome_names,
                           const std::vector<std::vector<std::string>>& outcome_cells) {
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        if (j) out << ',';
        out << feature_names[j];
    }
    for (const auto& nm : outcome_names) out << ',' << nm;
    out << '\n';
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (j) out << ',';
            out << format_double(x(i, j));
        }
        for (const auto& col : outcome_cells) out << ',' << col[i];
        out << '\n';
    }
}

std::vector<std::string> default_names(std::size_t d, const std::vector<std::string>& given) {
    if (!given.empty()) return given;
    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = "f" + std::to_string(j);
    return names;
}

}  // namespace

void save_csv(const std::filesystem::path& path, const Dataset& ds, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw ConfigError("csv: cannot write '" + path.string() + "'");
    std::vector<std::string> labels(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) labels[i] = std::to_string(ds.labels[i]);
    write_header_and_rows(out, default_names(ds.d(), ds.feature_names), ds.features,
                          {label_column}, {labels});
}

void save_csv(const std::filesystem::path& path, const SurvivalDataset& ds,
              const std::string& time_column, const std::string& event_column) {
    std::ofstream out(path);
    if (!out) throw ConfigError("csv: cannot write '" + path.string() + "'");
    std::vector<std::string> times(ds.n()), events(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        times[i] = format_double(ds.times[i]);
        events[i] = std::to_string(ds.events[i]);
    }
    write_header_and_rows(out, default_names(ds.d(), ds.feature_names), ds.features,
                          {time_column, event_column}, {times, events});
}

}  // namespace tabdc::data
