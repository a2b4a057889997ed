#pragma once

// Stance instances, label normalization and the evaluation split protocols.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fecl {

enum class Stance { Favor = 0, Against = 1, Neutral = 2 };
inline constexpr int kNumStances = 3;

std::string_view to_string(Stance s);
std::optional<Stance> parse_stance(std::string_view name);

/// Header or column layout does not match what was asked for.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A row's content is invalid (unmappable label, empty text, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Instance {
    std::string id;
    std::string text;
    std::string target;
    std::optional<Stance> label;
    std::optional<std::string> masked_text;
    /// VAST only: true when the test topic also occurs in training (few-shot).
    std::optional<bool> seen;
};

struct LabelScheme {
    /// Keys are compared case-insensitively after trimming.
    std::map<std::string, Stance> mapping;
    std::set<std::string> drop;

    /// Throws ContractError if `drop` overlaps `mapping`.
    void validate() const;
    bool should_drop(std::string_view raw) const;
    std::optional<Stance> map(std::string_view raw) const;

    static LabelScheme sem16();
    static LabelScheme wtwt();
    static LabelScheme covid19();
    static LabelScheme vast();
    /// Canonical FAVOR/AGAINST/NEUTRAL names as written by save_bundle.
    static LabelScheme canonical();
    static LabelScheme by_name(std::string_view name);
};

/// Column names of a delimited dataset file.
struct ColumnSpec {
    std::string text = "text";
    std::string target = "target";
    std::string label = "label";
    std::string id;      // empty: ids are generated as "<file stem>:<row>"
    std::string seen;    // empty: no seen marker
    std::string masked;  // empty: no masked text column
    char delimiter = ',';
};

enum class Protocol { ZeroShot, FewShot, CrossTarget };
std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view name);

struct DatasetBundle {
    std::vector<Instance> train;
    std::vector<Instance> dev;
    std::vector<Instance> test;
    Protocol protocol = Protocol::ZeroShot;
    std::uint64_t seed = 0;
};

std::vector<Instance> load_dataset(const std::string& path, const ColumnSpec& columns, const LabelScheme& scheme);

/// Distinct targets in first-occurrence order.
std::vector<std::string> targets_of(const std::vector<Instance>& instances);

/// floor(fraction * n), robust to representation error in `fraction`.
std::size_t fraction_count(double fraction, std::size_t n);

DatasetBundle make_zero_shot_split(const std::vector<Instance>& instances, const std::string& held_out_target,
                                   double dev_fraction, std::uint64_t seed);

DatasetBundle make_cross_target_split(const std::vector<Instance>& instances, const std::string& source_target,
                                      const std::string& dest_target, double dev_fraction, std::uint64_t seed);

enum class VastSubset { Zero, Few, All };
VastSubset parse_vast_subset(std::string_view name);

DatasetBundle make_vast_split(const std::string& train_path, const std::string& dev_path,
                              const std::string& test_path, const ColumnSpec& columns, const LabelScheme& scheme,
                              VastSubset subset);

/// Throws DataError when a protocol invariant of the bundle is violated.
void check_bundle(const DatasetBundle& bundle);

/// Writes train.tsv, dev.tsv, test.tsv and manifest.json into `dir`.
void save_bundle(const std::string& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::string& dir);

/// Column layout used by save_bundle / load_bundle.
ColumnSpec bundle_columns();

}  // namespace fecl
