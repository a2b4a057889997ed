#include "fecl/metrics.hpp"

#include <json.hpp>

#include "fecl/tensor.hpp"
#include "fecl/text.hpp"

namespace fecl {

namespace {
constexpr auto F = static_cast<std::size_t>(Stance::Favor);
constexpr auto A = static_cast<std::size_t>(Stance::Against);
constexpr auto N = static_cast<std::size_t>(Stance::Neutral);

std::int64_t row_total(const ConfusionTable& t, std::size_t g) {
    std::int64_t s = 0;
    for (auto c : t.counts[g]) s += c;
    return s;
}
}  // namespace

std::int64_t ConfusionTable::total() const {
    std::int64_t s = 0;
    for (const auto& row : counts) {
        for (auto c : row) s += c;
    }
    return s;
}

std::int64_t ConfusionTable::support(Stance s) const { return row_total(*this, static_cast<std::size_t>(s)); }

ConfusionTable ConfusionTable::from(std::span<const Stance> gold, std::span<const Stance> predicted) {
    if (gold.size() != predicted.size()) throw ContractError("ConfusionTable::from: length mismatch");
    ConfusionTable t;
    for (std::size_t i = 0; i < gold.size(); ++i) t.add(gold[i], predicted[i]);
    return t;
}

double f1_score(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

ClassScores f1_per_class(const ConfusionTable& table) {
    ClassScores out{};
    for (std::size_t c = 0; c < kNumStances; ++c) {
        const std::int64_t tp = table.counts[c][c];
        std::int64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < kNumStances; ++o) {
            if (o == c) continue;
            fp += table.counts[o][c];
            fn += table.counts[c][o];
        }
        out[c] = f1_score(tp, fp, fn);
    }
    return out;
}

std::string_view to_string(HeadlineProtocol p) {
    switch (p) {
        case HeadlineProtocol::ZeroShot: return "zero_shot";
        case HeadlineProtocol::Vast: return "vast";
        case HeadlineProtocol::CrossTarget: return "cross_target";
    }
    return "?";
}

HeadlineProtocol parse_headline_protocol(std::string_view name) {
    const auto key = text::to_lower(name);
    if (key == "zero_shot" || key == "zero-shot") return HeadlineProtocol::ZeroShot;
    if (key == "vast") return HeadlineProtocol::Vast;
    if (key == "cross_target" || key == "cross-target") return HeadlineProtocol::CrossTarget;
    throw ContractError("unknown headline protocol '" + std::string(name) + "'");
}

double headline_metric(const ConfusionTable& table, HeadlineProtocol protocol, MicroMode micro) {
    switch (protocol) {
        case HeadlineProtocol::ZeroShot: {
            const auto f1 = f1_per_class(table);
            return (f1[F] + f1[A]) / 2.0;
        }
        case HeadlineProtocol::Vast: {
            const auto f1 = f1_per_class(table);
            return (f1[F] + f1[A] + f1[N]) / 3.0;
        }
        case HeadlineProtocol::CrossTarget: {
            const auto& c = table.counts;
            if (micro == MicroMode::Binary) {
                // Only rows with gold FAVOR/AGAINST take part.
                const double macro = (f1_score(c[F][F], c[A][F], c[F][A] + c[F][N]) +
                                      f1_score(c[A][A], c[F][A], c[A][F] + c[A][N])) /
                                     2.0;
                const std::int64_t tp = c[F][F] + c[A][A];
                const std::int64_t fp = c[A][F] + c[F][A];
                const std::int64_t fn = c[F][A] + c[F][N] + c[A][F] + c[A][N];
                return (f1_score(tp, fp, fn) + macro) / 2.0;
            }
            const auto f1 = f1_per_class(table);
            const double macro = (f1[F] + f1[A]) / 2.0;
            const std::int64_t tp = c[F][F] + c[A][A] + c[N][N];
            const std::int64_t wrong = table.total() - tp;
            return (f1_score(tp, wrong, wrong) + macro) / 2.0;
        }
    }
    throw ContractError("headline_metric: unknown protocol");
}

MetricReport MetricReport::build(const ConfusionTable& table, HeadlineProtocol protocol, MicroMode micro,
                                 std::uint64_t run_seed) {
    MetricReport r;
    r.protocol = protocol;
    r.micro = micro;
    r.table = table;
    r.per_class_f1 = f1_per_class(table);
    r.headline = headline_metric(table, protocol, micro);
    for (std::size_t c = 0; c < kNumStances; ++c) r.support[c] = table.support(static_cast<Stance>(c));
    r.run_seed = run_seed;
    return r;
}

std::string MetricReport::to_json_line() const {
    nlohmann::json j;
    j["protocol"] = std::string(to_string(protocol));
    j["micro"] = micro == MicroMode::Binary ? "binary" : "three_class";
    j["run_seed"] = run_seed;
    j["headline"] = headline;
    for (std::size_t c = 0; c < kNumStances; ++c) {
        const auto name = std::string(to_string(static_cast<Stance>(c)));
        j["per_class_f1"][name] = per_class_f1[c];
        j["support"][name] = support[c];
    }
    j["confusion"] = table.counts;
    return j.dump();
}

MetricReport MetricReport::from_json_line(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    ConfusionTable table;
    table.counts = j.at("confusion").get<decltype(table.counts)>();
    const auto micro = j.at("micro").get<std::string>() == "binary" ? MicroMode::Binary : MicroMode::ThreeClass;
    auto r = build(table, parse_headline_protocol(j.at("protocol").get<std::string>()), micro,
                   j.at("run_seed").get<std::uint64_t>());
    return r;
}

}  // namespace fecl
