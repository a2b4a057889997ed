#pragma once

// Confusion tables and the per-protocol headline F1 scores.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "fecl/corpus.hpp"

namespace fecl {

struct ConfusionTable {
    /// counts[gold][predicted]
    std::array<std::array<std::int64_t, kNumStances>, kNumStances> counts{};

    void add(Stance gold, Stance predicted) {
        ++counts[static_cast<std::size_t>(gold)][static_cast<std::size_t>(predicted)];
    }
    std::int64_t total() const;
    std::int64_t support(Stance s) const;

    static ConfusionTable from(std::span<const Stance> gold, std::span<const Stance> predicted);
    bool operator==(const ConfusionTable&) const = default;
};

using ClassScores = std::array<double, kNumStances>;

/// F1 from raw counts; 0 when precision + recall is 0.
double f1_score(std::int64_t tp, std::int64_t fp, std::int64_t fn);

ClassScores f1_per_class(const ConfusionTable& table);

enum class HeadlineProtocol {
    ZeroShot,     // mean F1 of FAVOR and AGAINST
    Vast,         // mean F1 of all three classes
    CrossTarget,  // mean of micro- and macro-F1 over FAVOR and AGAINST
};
std::string_view to_string(HeadlineProtocol p);
HeadlineProtocol parse_headline_protocol(std::string_view name);

/// How cross-target micro-F1 is computed.
enum class MicroMode {
    Binary,      // instances with gold FAVOR/AGAINST only
    ThreeClass,  // every instance, all three classes
};

double headline_metric(const ConfusionTable& table, HeadlineProtocol protocol, MicroMode micro = MicroMode::Binary);

struct MetricReport {
    HeadlineProtocol protocol = HeadlineProtocol::ZeroShot;
    MicroMode micro = MicroMode::Binary;
    ClassScores per_class_f1{};
    double headline = 0.0;
    std::array<std::int64_t, kNumStances> support{};
    std::uint64_t run_seed = 0;
    ConfusionTable table;

    static MetricReport build(const ConfusionTable& table, HeadlineProtocol protocol, MicroMode micro,
                              std::uint64_t run_seed);
    /// One-line JSON record.
    std::string to_json_line() const;
    static MetricReport from_json_line(const std::string& line);
};

}  // namespace fecl
