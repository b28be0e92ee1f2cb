#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "casebias/error.hpp"
#include "casebias/sampling.hpp"

namespace casebias {

struct CaseCountSeries {
    std::vector<std::chrono::year_month_day> dates;
    std::vector<std::int64_t> total_tests;
    std::vector<std::int64_t> positive_tests;
    std::vector<std::size_t> gaps;  // indices i where dates[i] is more than a day after dates[i-1]

    std::size_t size() const { return dates.size(); }
    std::vector<double> positive_fraction() const {
        std::vector<double> p(dates.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i)
            if (total_tests[i] > 0)
                p[i] = static_cast<double>(positive_tests[i]) / static_cast<double>(total_tests[i]);
        return p;
    }
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorKind::InvalidArgument, "missing column '" + name + "'");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline std::chrono::year_month_day parse_iso_date(const std::string& s, std::size_t line) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
        throw Error(ErrorKind::InvalidArgument, line_prefix(line) + "invalid ISO-8601 date '" + s + "'");
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw Error(ErrorKind::InvalidArgument, line_prefix(line) + "invalid calendar date '" + s + "'");
    return ymd;
}

inline std::int64_t parse_count(const std::string& s, const char* field, std::size_t line) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size())
        throw Error(ErrorKind::InvalidArgument,
                    line_prefix(line) + "field '" + field + "' is not an integer: '" + s + "'");
    return v;
}

inline double parse_real(const std::string& s, const char* field, std::size_t line) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size())
        throw Error(ErrorKind::InvalidArgument,
                    line_prefix(line) + "field '" + field + "' is not a number: '" + s + "'");
    return v;
}

}  // namespace detail

inline std::string format_date(const std::chrono::year_month_day& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

/// Reads a comma-separated table with a header row; blank lines are skipped.
inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error(ErrorKind::InvalidArgument, detail::line_prefix(lineno) + "expected " +
                                                        std::to_string(t.header.size()) + " fields, found " +
                                                        std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw Error(ErrorKind::InvalidArgument, "no header row");
    return t;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
    return in;
}

/// Parses date,total_tests,positive_tests. With cumulative = true the first
/// row is the baseline and later rows are first-differenced.
inline CaseCountSeries ingest(std::istream& in, bool cumulative = false) {
    const CsvTable t = read_csv(in);
    const std::vector<std::string> expected{"date", "total_tests", "positive_tests"};
    if (t.header != expected)
        throw Error(ErrorKind::InvalidArgument, "line 1: header must be date,total_tests,positive_tests");
    if (t.rows.empty()) throw Error(ErrorKind::InvalidArgument, "no data rows");

    CaseCountSeries raw;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const std::size_t ln = t.line_numbers[i];
        const auto date = detail::parse_iso_date(r[0], ln);
        if (!raw.dates.empty()) {
            const auto prev = std::chrono::sys_days{raw.dates.back()};
            const auto cur = std::chrono::sys_days{date};
            if (cur == prev)
                throw Error(ErrorKind::InvalidArgument, detail::line_prefix(ln) + "duplicate date " + r[0]);
            if (cur < prev)
                throw Error(ErrorKind::InvalidArgument, detail::line_prefix(ln) + "date " + r[0] + " is out of order");
        }
        const auto total = detail::parse_count(r[1], "total_tests", ln);
        const auto pos = detail::parse_count(r[2], "positive_tests", ln);
        if (!cumulative && (total < 0 || pos < 0))
            throw Error(ErrorKind::InvalidArgument, detail::line_prefix(ln) + "negative count on " + r[0]);
        raw.dates.push_back(date);
        raw.total_tests.push_back(total);
        raw.positive_tests.push_back(pos);
    }

    CaseCountSeries s;
    const std::size_t start = cumulative ? 1 : 0;
    if (cumulative && raw.size() < 2) throw Error(ErrorKind::InvalidArgument, "cumulative input needs two rows");
    for (std::size_t i = start; i < raw.size(); ++i) {
        std::int64_t total = raw.total_tests[i], pos = raw.positive_tests[i];
        if (cumulative) {
            total -= raw.total_tests[i - 1];
            pos -= raw.positive_tests[i - 1];
        }
        const std::string date = format_date(raw.dates[i]);
        if (total < 0 || pos < 0)
            throw Error(ErrorKind::InvalidArgument, "negative daily value on " + date);
        if (pos > total)
            throw Error(ErrorKind::InvalidArgument, "positive_tests exceeds total_tests on " + date);
        if (!s.dates.empty() &&
            std::chrono::sys_days{raw.dates[i]} - std::chrono::sys_days{s.dates.back()} > std::chrono::days{1})
            s.gaps.push_back(s.dates.size());
        s.dates.push_back(raw.dates[i]);
        s.total_tests.push_back(total);
        s.positive_tests.push_back(pos);
    }
    return s;
}

inline CaseCountSeries ingest(const std::string& path, bool cumulative = false) {
    auto in = open_input(path);
    return ingest(in, cumulative);
}

/// Reads stratum_id,share,prevalence.
inline std::vector<Stratum> read_strata(std::istream& in) {
    const CsvTable t = read_csv(in);
    const std::vector<std::string> expected{"stratum_id", "share", "prevalence"};
    if (t.header != expected)
        throw Error(ErrorKind::InvalidArgument, "line 1: header must be stratum_id,share,prevalence");
    if (t.rows.empty()) throw Error(ErrorKind::InvalidArgument, "no data rows");
    std::vector<Stratum> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t ln = t.line_numbers[i];
        out.push_back({detail::parse_real(t.rows[i][1], "share", ln), detail::parse_real(t.rows[i][2], "prevalence", ln)});
    }
    return out;
}

}  // namespace casebias
