#include <doctest.h>

#include <fstream>
#include <set>

#include "fecl/corpus.hpp"
#include "fecl/delimited.hpp"
#include "fecl/log.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace fecl;
using fecl::testing::TempDir;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::vector<Instance> make_instances(const std::vector<std::pair<std::string, int>>& per_target) {
    std::vector<Instance> out;
    for (const auto& [target, n] : per_target) {
        for (int i = 0; i < n; ++i) {
            out.push_back({target + ":" + std::to_string(i), "text " + std::to_string(i), target, Stance::Favor, {}, {}});
        }
    }
    return out;
}

}  // namespace

TEST_CASE("label schemes") {
    const auto wtwt = LabelScheme::wtwt();
    CHECK(wtwt.map("support") == Stance::Favor);
    CHECK(wtwt.map(" Refute ") == Stance::Against);
    CHECK(wtwt.map("comment") == Stance::Neutral);
    CHECK(wtwt.should_drop("unrelated"));
    CHECK_FALSE(wtwt.map("unrelated").has_value());
    CHECK(LabelScheme::sem16().map("NONE") == Stance::Neutral);
    CHECK(LabelScheme::vast().map("0") == Stance::Against);
    CHECK(LabelScheme::covid19().map("in-favor") == Stance::Favor);
    CHECK_THROWS_AS(LabelScheme::by_name("nope"), ContractError);
    LabelScheme clash{{{"x", Stance::Favor}}, {"x"}};
    CHECK_THROWS_AS(clash.validate(), ContractError);
}

TEST_CASE("stance names round-trip") {
    for (auto s : {Stance::Favor, Stance::Against, Stance::Neutral}) CHECK(parse_stance(to_string(s)) == s);
    CHECK_FALSE(parse_stance("maybe").has_value());
}

TEST_CASE("load_dataset drops unrelated rows and maps labels") {
    TempDir dir("corpus");
    const auto path = dir.file("wtwt.csv");
    write_file(path, "text,target,label\n\"  merger talk, again \",CA,support\nnoise,CA,unrelated\nno way,CE,refute\n");
    const auto rows = load_dataset(path, {}, LabelScheme::wtwt());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == Stance::Favor);
    CHECK(rows[0].text == "merger talk, again");
    CHECK(rows[0].id == "wtwt:1");
    CHECK(rows[1].label == Stance::Against);
}

TEST_CASE("load_dataset edge cases") {
    TempDir dir("corpus_edge");
    const auto empty = dir.file("empty.csv");
    write_file(empty, "");
    CHECK(load_dataset(empty, {}, LabelScheme::canonical()).empty());

    const auto missing = dir.file("missing.csv");
    write_file(missing, "text,label\nhello,favor\n");
    CHECK_THROWS_AS(load_dataset(missing, {}, LabelScheme::canonical()), SchemaError);

    const auto bad = dir.file("bad.csv");
    write_file(bad, "text,target,label\nhello,T,favor\nworld,T,perhaps\n");
    try {
        load_dataset(bad, {}, LabelScheme::canonical());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }

    const auto blank = dir.file("blank.csv");
    write_file(blank, "text,target,label\n   ,T,favor\n");
    CHECK_THROWS_AS(load_dataset(blank, {}, LabelScheme::canonical()), DataError);

    const auto tsv = dir.file("data.tsv");
    write_file(tsv, "id\tbody\ttopic\tstance\nx1\thello there\tT\tagainst\n");
    ColumnSpec cols;
    cols.id = "id";
    cols.text = "body";
    cols.target = "topic";
    cols.label = "stance";
    cols.delimiter = '\t';
    const auto rows = load_dataset(tsv, cols, LabelScheme::canonical());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].id == "x1");
    CHECK(rows[0].label == Stance::Against);
}

TEST_CASE("zero-shot split arithmetic and partition") {
    const auto all = make_instances({{"A", 40}, {"B", 60}, {"C", 25}});
    const auto bundle = make_zero_shot_split(all, "C", 0.15, 7);
    CHECK(bundle.test.size() == 25);
    CHECK(bundle.dev.size() == 15);
    CHECK(bundle.train.size() == 85);
    CHECK(bundle.train.size() + bundle.dev.size() + bundle.test.size() == all.size());
    for (const auto& inst : bundle.test) CHECK(inst.target == "C");
    check_bundle(bundle);

    const auto again = make_zero_shot_split(all, "C", 0.15, 7);
    REQUIRE(again.train.size() == bundle.train.size());
    for (std::size_t i = 0; i < again.train.size(); ++i) CHECK(again.train[i].id == bundle.train[i].id);
    const auto other = make_zero_shot_split(all, "C", 0.15, 8);
    bool differs = false;
    for (std::size_t i = 0; i < other.train.size(); ++i) differs |= other.train[i].id != bundle.train[i].id;
    CHECK(differs);

    try {
        make_zero_shot_split(all, "Z", 0.15, 7);
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("A") != std::string::npos);
    }
    CHECK_THROWS_AS(make_zero_shot_split(all, "C", 0.0, 7), ContractError);
    CHECK_THROWS_AS(make_zero_shot_split(all, "C", 1.0, 7), ContractError);
}

TEST_CASE("cross-target split") {
    const auto all = make_instances({{"FM", 949}, {"LA", 10}, {"DT", 5}});
    const auto bundle = make_cross_target_split(all, "FM", "LA", 0.3, 1);
    CHECK(bundle.train.size() == 949);
    CHECK(bundle.dev.size() == 3);
    CHECK(bundle.test.size() == 7);
    for (const auto& inst : bundle.test) CHECK(inst.target == "LA");
    for (const auto& inst : bundle.dev) CHECK(inst.target == "LA");
    check_bundle(bundle);
    CHECK_THROWS_AS(make_cross_target_split(all, "FM", "FM", 0.3, 1), ContractError);
}

TEST_CASE("check_bundle rejects leakage") {
    auto bundle = make_zero_shot_split(make_instances({{"A", 10}, {"B", 10}}), "B", 0.2, 3);
    bundle.train.push_back(bundle.test.front());
    CHECK_THROWS_AS(check_bundle(bundle), DataError);
}

TEST_CASE("hold-out test sizes on stand-in files with published counts") {
    TempDir dir("holdout_sizes");
    fixtures::write_csv(dir.file("sem16.csv"), fixtures::sem16_counts(), "FAVOR", "AGAINST", "NONE", "", 1);
    const auto sem16 = load_dataset(dir.file("sem16.csv"), {}, LabelScheme::sem16());
    CHECK(make_zero_shot_split(sem16, "DT", 0.15, 0).test.size() == 707);
    CHECK(make_cross_target_split(sem16, "FM", "LA", 0.3, 0).train.size() == 949);

    fixtures::write_csv(dir.file("covid.csv"), fixtures::covid_counts(), "in-favor", "against", "neither", "", 2);
    const auto covid = load_dataset(dir.file("covid.csv"), {}, LabelScheme::covid19());
    CHECK(covid.size() == 3229);
    const auto wa = make_zero_shot_split(covid, "WA", 0.15, 0);
    CHECK(wa.test.size() == 907);
    CHECK(wa.dev.size() == 348);  // floor(0.15 * 2322)
}

TEST_CASE("VAST split filters test by seen marker") {
    TempDir dir("vast");
    const std::string header = "text,target,label,seen\n";
    write_file(dir.file("train.csv"), header + "a,t1,0,1\nb,t2,1,0\n");
    write_file(dir.file("dev.csv"), header + "c,t3,2,0\n");
    write_file(dir.file("test.csv"), header + "d,t4,0,0\ne,t1,1,1\nf,t5,2,0\n");
    ColumnSpec cols;
    cols.seen = "seen";
    const auto all = make_vast_split(dir.file("train.csv"), dir.file("dev.csv"), dir.file("test.csv"), cols,
                                     LabelScheme::vast(), VastSubset::All);
    CHECK(all.train.size() == 2);
    CHECK(all.test.size() == 3);
    const auto zero = make_vast_split(dir.file("train.csv"), dir.file("dev.csv"), dir.file("test.csv"), cols,
                                      LabelScheme::vast(), VastSubset::Zero);
    REQUIRE(zero.test.size() == 2);
    for (const auto& inst : zero.test) CHECK(inst.seen == false);

    write_file(dir.file("test0.csv"), header + "d,t4,0,0\n");
    log::ScopedWarningCapture warnings;
    const auto few = make_vast_split(dir.file("train.csv"), dir.file("dev.csv"), dir.file("test0.csv"), cols,
                                     LabelScheme::vast(), VastSubset::Few);
    CHECK(few.test.empty());
    CHECK(warnings.contains("no test instances"));

    CHECK_THROWS_AS(make_vast_split(dir.file("train.csv"), dir.file("dev.csv"), dir.file("test.csv"), {},
                                    LabelScheme::vast(), VastSubset::All),
                    SchemaError);
}

TEST_CASE("bundle save/load round trip") {
    TempDir dir("bundle");
    auto bundle = make_zero_shot_split(make_instances({{"A", 12}, {"B", 9}}), "B", 0.25, 4);
    bundle.train[0].masked_text = "[MASK] text";
    bundle.train[1].text = "tab\tand \"quotes\", commas";
    save_bundle(dir.path().string(), bundle);
    const auto back = load_bundle(dir.path().string());
    CHECK(back.protocol == bundle.protocol);
    CHECK(back.seed == bundle.seed);
    REQUIRE(back.train.size() == bundle.train.size());
    CHECK(back.train[0].masked_text == bundle.train[0].masked_text);
    CHECK(back.train[1].text == bundle.train[1].text);
    CHECK(back.test.size() == bundle.test.size());
    CHECK(back.dev.size() == bundle.dev.size());
    CHECK(back.test[0].label == bundle.test[0].label);
}

TEST_CASE("delimited reader handles quotes, embedded newlines and a BOM") {
    std::istringstream in("\xEF\xBB\xBFx,y\n\"a,\"\"b\"\"\",\"line1\nline2\"\n\nc,d\n");
    const auto t = delimited::read(in, ',');
    CHECK(t.header == delimited::Row{"x", "y"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "a,\"b\"");
    CHECK(t.rows[0][1] == "line1\nline2");
    CHECK(t.column("y") == 1);
    CHECK(t.column("z") == -1);
}
