#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rulkit/common.hpp"

namespace rulkit {

inline constexpr int kNumSettings = 3;
inline constexpr int kNumSensors = 21;
// unit id + cycle + settings + sensors
inline constexpr int kColumnsPerLine = 2 + kNumSettings + kNumSensors;

struct CycleRecord {
    int cycle = 0;  // 1-based, contiguous within an engine
    std::array<double, kNumSettings> settings{};
    std::array<double, kNumSensors> sensors{};  // s1..s21
};

struct EngineTrajectory {
    int unit_id = 0;
    std::vector<CycleRecord> cycles;  // sorted ascending, cycle k at index k-1

    int length() const { return static_cast<int>(cycles.size()); }
};

// Terminal RUL per test engine, in file order (entry i belongs to the i-th
// engine of the matching test split).
struct RulTruthTable {
    std::vector<int> terminal_rul;

    int size() const { return static_cast<int>(terminal_rul.size()); }
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Parses a C-MAPSS-format text file: one observation per line, 26
// whitespace-separated columns (unit, cycle, setting1-3, s1-s21).
// Trajectories come back grouped by unit id, unit ids ascending, cycles
// sorted ascending and validated to be contiguous from 1.
std::vector<EngineTrajectory> parse_trajectories(const std::string& path);

// One non-negative integer per line; blank lines are skipped.
RulTruthTable parse_rul_truth(const std::string& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Comma-separated values, UTF-8, '.' decimal separator, one header line.
// Numbers are written with shortest round-trip precision so that
// read_table(write_table(x)) == x bit-exactly.
void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

Table read_table(const std::string& path);

// Writers for the C-MAPSS text format itself (used by the synthetic
// generator); emitted files parse back bit-exactly.
void write_trajectories(const std::string& path, const std::vector<EngineTrajectory>& trajectories);
void write_rul_truth(const std::string& path, const RulTruthTable& truth);

}  // namespace rulkit
