#include "rulkit/cmapss_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rulkit {
namespace {

// Splits on any run of spaces/tabs; tolerates trailing whitespace and CR.
std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_double(std::string_view tok, const std::string& path, int line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw_parse(path + ":" + std::to_string(line_no) + ": not a number: '" + std::string(tok) + "'");
    if (!std::isfinite(v))
        throw_validation(path + ":" + std::to_string(line_no) + ": non-finite value '" + std::string(tok) + "'");
    return v;
}

long parse_long(std::string_view tok, const std::string& path, int line_no) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw_parse(path + ":" + std::to_string(line_no) + ": not an integer: '" + std::string(tok) + "'");
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: exact LF line endings
    if (!out) throw_io("cannot open file for writing: " + path);
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<EngineTrajectory> parse_trajectories(const std::string& path) {
    std::ifstream in = open_input(path);
    std::map<long, std::vector<CycleRecord>> by_unit;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (static_cast<int>(toks.size()) != kColumnsPerLine)
            throw_parse(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(kColumnsPerLine) + " columns, got " +
                        std::to_string(toks.size()));
        long unit = parse_long(toks[0], path, line_no);
        long cycle = parse_long(toks[1], path, line_no);
        if (unit <= 0) throw_validation(path + ":" + std::to_string(line_no) + ": unit id must be positive");
        if (cycle <= 0) throw_validation(path + ":" + std::to_string(line_no) + ": cycle must be positive");
        CycleRecord rec;
        rec.cycle = static_cast<int>(cycle);
        for (int i = 0; i < kNumSettings; ++i) rec.settings[i] = parse_double(toks[2 + i], path, line_no);
        for (int i = 0; i < kNumSensors; ++i) rec.sensors[i] = parse_double(toks[2 + kNumSettings + i], path, line_no);
        by_unit[unit].push_back(rec);
    }

    std::vector<EngineTrajectory> out;
    out.reserve(by_unit.size());
    for (auto& [unit, cycles] : by_unit) {
        std::sort(cycles.begin(), cycles.end(),
                  [](const CycleRecord& a, const CycleRecord& b) { return a.cycle < b.cycle; });
        for (size_t k = 0; k < cycles.size(); ++k) {
            if (cycles[k].cycle != static_cast<int>(k) + 1)
                throw_validation(path + ": unit " + std::to_string(unit) +
                                 ": cycles not contiguous from 1 (found cycle " +
                                 std::to_string(cycles[k].cycle) + " at position " +
                                 std::to_string(k + 1) + ")");
        }
        EngineTrajectory traj;
        traj.unit_id = static_cast<int>(unit);
        traj.cycles = std::move(cycles);
        out.push_back(std::move(traj));
    }
    return out;
}

RulTruthTable parse_rul_truth(const std::string& path) {
    std::ifstream in = open_input(path);
    RulTruthTable table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = split_tokens(line);
        if (toks.empty()) continue;
        if (toks.size() != 1)
            throw_parse(path + ":" + std::to_string(line_no) + ": expected one value per line");
        long v = parse_long(toks[0], path, line_no);
        if (v < 0)
            throw_validation(path + ":" + std::to_string(line_no) + ": RUL must be non-negative, got " +
                             std::to_string(v));
        table.terminal_rul.push_back(static_cast<int>(v));
    }
    return table;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw_validation("write_table: row " + std::to_string(r) + " has " +
                             std::to_string(rows[r].size()) + " values, header has " +
                             std::to_string(header.size()));
    }
    std::ofstream out = open_output(path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    if (!out) throw_io("write failed: " + path);
}

Table read_table(const std::string& path) {
    std::ifstream in = open_input(path);
    Table table;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            size_t pos = line.find(',', start);
            cells.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (line_no == 1) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw_parse(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " cells, got " +
                        std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, path, line_no));
        table.rows.push_back(std::move(row));
    }
    if (line_no == 0) throw_parse(path + ": empty table file");
    return table;
}

void write_trajectories(const std::string& path, const std::vector<EngineTrajectory>& trajectories) {
    std::ofstream out = open_output(path);
    for (const auto& traj : trajectories) {
        for (const auto& rec : traj.cycles) {
            out << traj.unit_id << ' ' << rec.cycle;
            for (double s : rec.settings) out << ' ' << format_double(s);
            for (double s : rec.sensors) out << ' ' << format_double(s);
            out << '\n';
        }
    }
    if (!out) throw_io("write failed: " + path);
}

void write_rul_truth(const std::string& path, const RulTruthTable& truth) {
    std::ofstream out = open_output(path);
    for (int v : truth.terminal_rul) out << v << '\n';
    if (!out) throw_io("write failed: " + path);
}

}  // namespace rulkit
