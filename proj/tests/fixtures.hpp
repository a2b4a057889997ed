#pragma once

// Stand-in dataset files with the published per-target label counts, in the
// raw label vocabulary of each dataset.

#include <fstream>
#include <string>
#include <vector>

#include "fecl/random.hpp"

namespace fecl::fixtures {

struct TargetCounts {
    std::string target;
    int favor, against, neutral;
    int dropped = 0;  // rows carrying a label the scheme discards
};

inline const std::vector<TargetCounts>& sem16_counts() {
    static const std::vector<TargetCounts> c = {{"DT", 148, 299, 260}, {"HC", 163, 565, 256},
                                                {"FM", 268, 511, 170}, {"LA", 167, 544, 222},
                                                {"AT", 124, 464, 145}, {"CC", 335, 26, 203}};
    return c;
}

inline const std::vector<TargetCounts>& wtwt_counts() {
    static const std::vector<TargetCounts> c = {{"CA", 2469, 518, 5520, 120}, {"CE", 773, 253, 947, 80},
                                                {"AC", 970, 1969, 3098, 60}, {"AH", 1038, 1106, 2804, 40}};
    return c;
}

inline const std::vector<TargetCounts>& covid_counts() {
    static const std::vector<TargetCounts> c = {
        {"WA", 515, 220, 172}, {"SC", 430, 102, 85}, {"AF", 384, 266, 307}, {"SH", 151, 201, 396}};
    return c;
}

/// Writes a CSV with columns text,target,label in shuffled row order.
inline void write_csv(const std::string& path, const std::vector<TargetCounts>& counts, const std::string& favor,
                      const std::string& against, const std::string& neutral, const std::string& dropped,
                      std::uint64_t seed) {
    std::vector<std::string> rows;
    int serial = 0;
    for (const auto& t : counts) {
        auto emit = [&](int n, const std::string& label) {
            for (int i = 0; i < n; ++i) {
                rows.push_back("\"post " + std::to_string(serial++) + " about " + t.target + ", with a comma\"," +
                               t.target + "," + label);
            }
        };
        emit(t.favor, favor);
        emit(t.against, against);
        emit(t.neutral, neutral);
        emit(t.dropped, dropped);
    }
    Rng rng(seed);
    shuffle(rows, rng);
    std::ofstream out(path);
    out << "text,target,label\n";
    for (const auto& r : rows) out << r << '\n';
}

}  // namespace fecl::fixtures
