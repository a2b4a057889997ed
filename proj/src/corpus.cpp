#include "fecl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "fecl/delimited.hpp"
#include "fecl/log.hpp"
#include "fecl/random.hpp"
#include "fecl/tensor.hpp"
#include "fecl/text.hpp"

namespace fecl {

namespace fs = std::filesystem;

std::string_view to_string(Stance s) {
    switch (s) {
        case Stance::Favor: return "FAVOR";
        case Stance::Against: return "AGAINST";
        case Stance::Neutral: return "NEUTRAL";
    }
    return "?";
}

std::optional<Stance> parse_stance(std::string_view name) {
    const auto key = text::to_lower(text::trim(name));
    if (key == "favor") return Stance::Favor;
    if (key == "against") return Stance::Against;
    if (key == "neutral") return Stance::Neutral;
    return std::nullopt;
}

void LabelScheme::validate() const {
    for (const auto& d : drop) {
        if (mapping.contains(d)) throw ContractError("LabelScheme: '" + d + "' is both mapped and dropped");
    }
}

bool LabelScheme::should_drop(std::string_view raw) const {
    return drop.contains(text::to_lower(text::trim(raw)));
}

std::optional<Stance> LabelScheme::map(std::string_view raw) const {
    const auto it = mapping.find(text::to_lower(text::trim(raw)));
    if (it == mapping.end()) return std::nullopt;
    return it->second;
}

LabelScheme LabelScheme::sem16() {
    return {{{"favor", Stance::Favor}, {"against", Stance::Against}, {"none", Stance::Neutral},
             {"neutral", Stance::Neutral}},
            {}};
}

LabelScheme LabelScheme::wtwt() {
    return {{{"support", Stance::Favor}, {"refute", Stance::Against}, {"comment", Stance::Neutral}},
            {"unrelated"}};
}

LabelScheme LabelScheme::covid19() {
    return {{{"favor", Stance::Favor}, {"in-favor", Stance::Favor}, {"against", Stance::Against},
             {"none", Stance::Neutral}, {"neither", Stance::Neutral}},
            {}};
}

LabelScheme LabelScheme::vast() {
    return {{{"0", Stance::Against}, {"1", Stance::Favor}, {"2", Stance::Neutral}}, {}};
}

LabelScheme LabelScheme::canonical() {
    return {{{"favor", Stance::Favor}, {"against", Stance::Against}, {"neutral", Stance::Neutral}}, {}};
}

LabelScheme LabelScheme::by_name(std::string_view name) {
    const auto key = text::to_lower(name);
    if (key == "sem16") return sem16();
    if (key == "wtwt" || key == "wt-wt") return wtwt();
    if (key == "covid19" || key == "covid-19") return covid19();
    if (key == "vast") return vast();
    if (key == "canonical" || key == "synthetic") return canonical();
    throw ContractError("unknown label scheme '" + std::string(name) + "'");
}

std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::ZeroShot: return "zero_shot";
        case Protocol::FewShot: return "few_shot";
        case Protocol::CrossTarget: return "cross_target";
    }
    return "?";
}

Protocol parse_protocol(std::string_view name) {
    const auto key = text::to_lower(name);
    if (key == "zero_shot" || key == "zero-shot") return Protocol::ZeroShot;
    if (key == "few_shot" || key == "few-shot") return Protocol::FewShot;
    if (key == "cross_target" || key == "cross-target") return Protocol::CrossTarget;
    throw ContractError("unknown protocol '" + std::string(name) + "'");
}

namespace {

int require_column(const delimited::Table& table, const std::string& name, const std::string& path) {
    const int idx = table.column(name);
    if (idx < 0) throw SchemaError(path + ": missing column '" + name + "'");
    return idx;
}

std::optional<bool> parse_seen(std::string_view raw, std::size_t row, const std::string& path) {
    const auto v = text::to_lower(text::trim(raw));
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    if (v.empty()) return std::nullopt;
    throw DataError(path + ": row " + std::to_string(row) + ": bad seen marker '" + std::string(raw) + "'");
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ", ";
        out += s;
    }
    return out;
}

void require_target(const std::vector<Instance>& instances, const std::string& target) {
    for (const auto& inst : instances) {
        if (inst.target == target) return;
    }
    throw DataError("unknown target '" + target + "'; available: " + join(targets_of(instances)));
}

}  // namespace

std::vector<Instance> load_dataset(const std::string& path, const ColumnSpec& columns, const LabelScheme& scheme) {
    scheme.validate();
    const auto table = delimited::read_file(path, columns.delimiter);
    std::vector<Instance> out;
    if (table.header.empty()) return out;

    const int text_col = require_column(table, columns.text, path);
    const int target_col = require_column(table, columns.target, path);
    const int label_col = columns.label.empty() ? -1 : require_column(table, columns.label, path);
    const int id_col = columns.id.empty() ? -1 : require_column(table, columns.id, path);
    const int seen_col = columns.seen.empty() ? -1 : require_column(table, columns.seen, path);
    const int masked_col = columns.masked.empty() ? -1 : require_column(table, columns.masked, path);
    const auto stem = fs::path(path).stem().string();

    // Data rows are numbered from 1 in ids and messages; the header is not counted.
    for (std::size_t r = 1; r <= table.rows.size(); ++r) {
        const auto& row = table.rows[r - 1];
        auto cell = [&](int col) -> std::string_view {
            if (col < 0) return {};
            if (static_cast<std::size_t>(col) >= row.size()) {
                throw SchemaError(path + ": row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                                  " fields, header has " + std::to_string(table.header.size()));
            }
            return row[static_cast<std::size_t>(col)];
        };

        Instance inst;
        if (label_col >= 0) {
            const auto raw = cell(label_col);
            if (scheme.should_drop(raw)) continue;
            const auto mapped = scheme.map(raw);
            if (!mapped && !text::trim(raw).empty()) {
                throw DataError(path + ": row " + std::to_string(r) + ": unmappable label '" + std::string(raw) +
                                "'");
            }
            inst.label = mapped;
        }
        inst.text = std::string(text::trim(cell(text_col)));
        inst.target = std::string(text::trim(cell(target_col)));
        if (inst.text.empty()) throw DataError(path + ": row " + std::to_string(r) + ": empty text");
        if (inst.target.empty()) throw DataError(path + ": row " + std::to_string(r) + ": empty target");
        inst.id = id_col >= 0 ? std::string(cell(id_col)) : stem + ":" + std::to_string(r);
        if (seen_col >= 0) inst.seen = parse_seen(cell(seen_col), r, path);
        if (masked_col >= 0 && !cell(masked_col).empty()) inst.masked_text = std::string(cell(masked_col));
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<std::string> targets_of(const std::vector<Instance>& instances) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& inst : instances) {
        if (seen.insert(inst.target).second) out.push_back(inst.target);
    }
    return out;
}

std::size_t fraction_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

DatasetBundle make_zero_shot_split(const std::vector<Instance>& instances, const std::string& held_out_target,
                                   double dev_fraction, std::uint64_t seed) {
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ContractError("dev_fraction must be in (0, 1)");
    require_target(instances, held_out_target);

    DatasetBundle bundle;
    bundle.protocol = Protocol::ZeroShot;
    bundle.seed = seed;
    std::vector<Instance> rest;
    for (const auto& inst : instances) {
        (inst.target == held_out_target ? bundle.test : rest).push_back(inst);
    }
    Rng rng(seed);
    shuffle(rest, rng);
    const std::size_t n_dev = fraction_count(dev_fraction, rest.size());
    bundle.dev.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_dev));
    bundle.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_dev), rest.end());
    check_bundle(bundle);
    return bundle;
}

DatasetBundle make_cross_target_split(const std::vector<Instance>& instances, const std::string& source_target,
                                      const std::string& dest_target, double dev_fraction, std::uint64_t seed) {
    if (source_target == dest_target) {
        throw ContractError("cross-target split needs distinct targets; use the zero-shot protocol instead");
    }
    if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ContractError("dev_fraction must be in (0, 1)");
    require_target(instances, source_target);
    require_target(instances, dest_target);

    DatasetBundle bundle;
    bundle.protocol = Protocol::CrossTarget;
    bundle.seed = seed;
    std::vector<Instance> dest;
    for (const auto& inst : instances) {
        if (inst.target == source_target) bundle.train.push_back(inst);
        if (inst.target == dest_target) dest.push_back(inst);
    }
    Rng rng(seed);
    shuffle(dest, rng);
    const std::size_t n_dev = fraction_count(dev_fraction, dest.size());
    bundle.dev.assign(dest.begin(), dest.begin() + static_cast<std::ptrdiff_t>(n_dev));
    bundle.test.assign(dest.begin() + static_cast<std::ptrdiff_t>(n_dev), dest.end());
    check_bundle(bundle);
    return bundle;
}

VastSubset parse_vast_subset(std::string_view name) {
    const auto key = text::to_lower(name);
    if (key == "zero") return VastSubset::Zero;
    if (key == "few") return VastSubset::Few;
    if (key == "all") return VastSubset::All;
    throw ContractError("unknown VAST subset '" + std::string(name) + "' (zero|few|all)");
}

DatasetBundle make_vast_split(const std::string& train_path, const std::string& dev_path,
                              const std::string& test_path, const ColumnSpec& columns, const LabelScheme& scheme,
                              VastSubset subset) {
    if (columns.seen.empty()) throw SchemaError("VAST split requires a seen-marker column");
    DatasetBundle bundle;
    bundle.train = load_dataset(train_path, columns, scheme);
    bundle.dev = load_dataset(dev_path, columns, scheme);
    auto test = load_dataset(test_path, columns, scheme);
    for (const auto& inst : test) {
        if (!inst.seen) throw SchemaError(test_path + ": instance " + inst.id + " lacks a seen marker");
    }
    if (subset == VastSubset::All) {
        bundle.test = std::move(test);
    } else {
        const bool want_seen = subset == VastSubset::Few;
        for (auto& inst : test) {
            if (*inst.seen == want_seen) bundle.test.push_back(std::move(inst));
        }
    }
    bundle.protocol = subset == VastSubset::Zero ? Protocol::ZeroShot : Protocol::FewShot;
    if (bundle.test.empty()) {
        log::warn("VAST subset selected no test instances (" + test_path + ")");
    }
    if (bundle.protocol == Protocol::ZeroShot) check_bundle(bundle);
    return bundle;
}

void check_bundle(const DatasetBundle& bundle) {
    std::unordered_set<std::string> seen_targets;
    for (const auto* part : {&bundle.train, &bundle.dev}) {
        for (const auto& inst : *part) seen_targets.insert(inst.target);
    }
    if (bundle.protocol == Protocol::ZeroShot) {
        for (const auto& inst : bundle.test) {
            if (seen_targets.contains(inst.target)) {
                throw DataError("zero-shot leakage: test target '" + inst.target + "' occurs in train/dev");
            }
        }
    }
    if (bundle.protocol == Protocol::CrossTarget) {
        const auto train_targets = targets_of(bundle.train);
        std::vector<Instance> dest = bundle.dev;
        dest.insert(dest.end(), bundle.test.begin(), bundle.test.end());
        const auto dest_targets = targets_of(dest);
        if (train_targets.size() > 1 || dest_targets.size() > 1) {
            throw DataError("cross-target bundle must have a single source and a single destination target");
        }
        if (!train_targets.empty() && !dest_targets.empty() && train_targets[0] == dest_targets[0]) {
            throw DataError("cross-target bundle: source and destination target coincide");
        }
    }
}

ColumnSpec bundle_columns() {
    ColumnSpec c;
    c.id = "id";
    c.target = "target";
    c.text = "text";
    c.label = "label";
    c.masked = "masked_text";
    c.seen = "seen";
    c.delimiter = '\t';
    return c;
}

namespace {

void write_split(const fs::path& path, const std::vector<Instance>& instances) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    delimited::write_row(out, {"id", "target", "text", "label", "masked_text", "seen"}, '\t');
    for (const auto& inst : instances) {
        delimited::write_row(out,
                             {inst.id, inst.target, inst.text,
                              inst.label ? text::to_lower(to_string(*inst.label)) : std::string{},
                              inst.masked_text.value_or(""),
                              inst.seen ? (*inst.seen ? "1" : "0") : std::string{}},
                             '\t');
    }
}

}  // namespace

void save_bundle(const std::string& dir, const DatasetBundle& bundle) {
    fs::create_directories(dir);
    write_split(fs::path(dir) / "train.tsv", bundle.train);
    write_split(fs::path(dir) / "dev.tsv", bundle.dev);
    write_split(fs::path(dir) / "test.tsv", bundle.test);
    nlohmann::json manifest = {
        {"format_version", 1},
        {"protocol", std::string(to_string(bundle.protocol))},
        {"seed", bundle.seed},
        {"counts", {{"train", bundle.train.size()}, {"dev", bundle.dev.size()}, {"test", bundle.test.size()}}},
        {"targets",
         {{"train", targets_of(bundle.train)}, {"dev", targets_of(bundle.dev)}, {"test", targets_of(bundle.test)}}},
    };
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

DatasetBundle load_bundle(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("cannot open " + (fs::path(dir) / "manifest.json").string());
    const auto manifest = nlohmann::json::parse(in);
    DatasetBundle bundle;
    bundle.protocol = parse_protocol(manifest.at("protocol").get<std::string>());
    bundle.seed = manifest.at("seed").get<std::uint64_t>();
    const auto columns = bundle_columns();
    const auto scheme = LabelScheme::canonical();
    bundle.train = load_dataset((fs::path(dir) / "train.tsv").string(), columns, scheme);
    bundle.dev = load_dataset((fs::path(dir) / "dev.tsv").string(), columns, scheme);
    bundle.test = load_dataset((fs::path(dir) / "test.tsv").string(), columns, scheme);
    const auto& counts = manifest.at("counts");
    if (counts.at("train").get<std::size_t>() != bundle.train.size() ||
        counts.at("dev").get<std::size_t>() != bundle.dev.size() ||
        counts.at("test").get<std::size_t>() != bundle.test.size()) {
        throw DataError(dir + ": split sizes do not match manifest counts");
    }
    return bundle;
}

}  // namespace fecl
