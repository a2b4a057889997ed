#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fecl/harness.hpp"
#include "support.hpp"
#include "training_fixture.hpp"

using namespace fecl;
using namespace fecl::testing;

namespace {

/// Smallest end-to-end synthetic configuration; a handful of steps per run.
RunConfig quick_config(std::uint64_t seed) {
    auto c = synthetic_run_config(seed);
    c.synthetic.train_targets = 2;
    c.synthetic.test_targets = 1;
    c.synthetic.train_per_target = 20;
    c.synthetic.test_per_target = 10;
    c.model.encoder.hidden_dim = 8;
    c.model.projection_dim = 8;
    c.model.fusion_dim = 8;
    c.train.epochs = 1;
    c.train.max_steps = 2;
    c.topics.gibbs_iterations = 20;
    return c;
}

DatasetBundle masked_tiny_bundle() { return tiny_bundle(); }

}  // namespace

TEST_CASE("pca: axis variances are ordered and the data is centered") {
    Rng rng(5);
    Tensor data(60, 4);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const double a = 3.0 * standard_normal(rng), b = 1.0 * standard_normal(rng);
        data(i, 0) = a + 0.1 * standard_normal(rng) + 7.0;
        data(i, 1) = -a + b;
        data(i, 2) = b + 0.05 * standard_normal(rng);
        data(i, 3) = 0.01 * standard_normal(rng) - 2.0;
    }
    const auto p = pca_project(data, 2);
    REQUIRE(p.rows() == 60);
    REQUIRE(p.cols() == 2);
    double mean0 = 0, mean1 = 0, var0 = 0, var1 = 0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        mean0 += p(i, 0);
        mean1 += p(i, 1);
        var0 += p(i, 0) * p(i, 0);
        var1 += p(i, 1) * p(i, 1);
    }
    CHECK(std::abs(mean0) < 1e-9);
    CHECK(std::abs(mean1) < 1e-9);
    CHECK(var0 >= var1);
    CHECK(pca_project(data, 2) == p);
    CHECK_THROWS_AS(pca_project(data, 5), ContractError);
}

TEST_CASE("embedding export: shapes, split tags and duplicates") {
    const auto bundle = masked_tiny_bundle();
    FeclModel model(tiny_model_config(), build_vocabulary(bundle));
    std::vector<Instance> rows(bundle.train.begin(), bundle.train.begin() + 4);
    rows.push_back(rows[0]);
    const std::vector<std::string> tags{"train", "train", "test", "test", "train"};

    const auto raw = export_embeddings(model, rows, tags, Projector::None);
    REQUIRE(raw.size() == rows.size());
    for (const auto& r : raw) CHECK(r.coords.size() == static_cast<std::size_t>(model.config().hidden_dim()));
    CHECK(raw[0].coords == raw[4].coords);
    CHECK(raw[2].split == "test");
    CHECK(raw[1].id == rows[1].id);

    const auto flat = export_embeddings(model, rows, tags, Projector::Pca2d);
    REQUIRE(flat.size() == rows.size());
    for (const auto& r : flat) CHECK(r.coords.size() == 2);
    CHECK(flat[0].coords == flat[4].coords);

    CHECK(parse_projector("pca") == Projector::Pca2d);
    CHECK(parse_projector("none") == Projector::None);
    CHECK_THROWS_AS(export_embeddings(model, rows, {"train"}, Projector::None), ContractError);
}

TEST_CASE("probe geometry ranges and degenerate probes") {
    const auto bundle = masked_tiny_bundle();
    FeclModel model(tiny_model_config(), build_vocabulary(bundle));
    std::vector<std::string> probe;
    for (const auto& inst : bundle.train) probe.push_back(*inst.masked_text);
    const auto r = probe_geometry(model, probe, 3, 0);
    CHECK(r.alignment >= 0.0);
    CHECK(r.uniformity <= 0.0);
    CHECK_THROWS_AS(probe_geometry(model, {}, 3, 0), ContractError);

    // Without dropout both views coincide, so alignment is exactly 0.
    auto cfg = tiny_model_config();
    cfg.encoder.dropout_rate = 0.0;
    FeclModel deterministic(cfg, build_vocabulary(bundle));
    const std::vector<std::string> same(6, probe[0]);
    CHECK(probe_geometry(deterministic, same, 3, 0).alignment == 0.0);
}

TEST_CASE("diagnostics trace starts at step 0 and samples every 5 steps") {
    const auto bundle = masked_tiny_bundle();
    std::vector<std::string> probe;
    for (const auto& inst : bundle.dev) probe.push_back(*inst.masked_text);
    auto train = tiny_train_config();
    train.epochs = 10;  // 16 / 8 = 2 steps per epoch; max_steps ends the run first
    train.max_steps = 11;
    Checkpoint final_checkpoint;
    const auto trace = diagnostics_trace(bundle, tiny_model_config(), train, probe, 5, &final_checkpoint);
    REQUIRE(trace.size() == 3);
    CHECK(trace[0].step == 0);
    CHECK(trace[1].step == 5);
    CHECK(trace[2].step == 10);
    for (const auto& t : trace) {
        CHECK(t.alignment >= 0.0);
        CHECK(t.uniformity <= 0.0);
    }
    CHECK(!final_checkpoint.tensors.empty());
}

TEST_CASE("evaluate: determinism, label requirement and an always-neutral model") {
    const auto bundle = masked_tiny_bundle();
    FeclModel model(tiny_model_config(), build_vocabulary(bundle));
    const auto a = evaluate(model, bundle.test, HeadlineProtocol::ZeroShot, MicroMode::Binary, 1);
    const auto b = evaluate(model, bundle.test, HeadlineProtocol::ZeroShot, MicroMode::Binary, 1);
    CHECK(a.to_json_line() == b.to_json_line());
    CHECK(a.headline == headline_metric(a.table, a.protocol, a.micro));

    auto state = model.state();
    state["classifier.w_o"] = Tensor(state["classifier.w_o"].rows(), state["classifier.w_o"].cols());
    state["classifier.b_o"] = Tensor::row({0.0, 0.0, 5.0});
    model.load_state(state);
    CHECK(evaluate(model, bundle.test, HeadlineProtocol::ZeroShot, MicroMode::Binary, 1).headline == 0.0);

    auto unlabeled = bundle.test;
    unlabeled[0].label.reset();
    CHECK_THROWS_AS(evaluate(model, unlabeled, HeadlineProtocol::ZeroShot, MicroMode::Binary, 1), DataError);
}

TEST_CASE("key-value config files") {
    TempDir dir("kv");
    const auto path = dir.file("run.cfg");
    {
        std::ofstream out(path);
        out << "# comment line\n"
            << "protocol = cross_target\n"
            << "source_target = A   # trailing comment\n"
            << "dest_target = B\n"
            << "train.eta = 0.25\n"
            << "train.variant = no_cl\n"
            << "model.hidden_dim = 16\n"
            << "micro = three_class\n"
            << "repeats = 3\n"
            << "synthetic.question_marks = false\n";
    }
    const auto kv = read_key_values(path);
    CHECK(kv.at("source_target") == "A");
    RunConfig c;
    apply_key_values(c, kv);
    CHECK(c.protocol == Protocol::CrossTarget);
    CHECK(c.source_target == "A");
    CHECK(c.train.eta == 0.25);
    CHECK(c.train.variant == Variant::NoCl);
    CHECK(c.model.encoder.hidden_dim == 16);
    CHECK(c.micro == MicroMode::ThreeClass);
    CHECK(c.repeats == 3);
    CHECK_FALSE(c.synthetic.question_marks);

    CHECK_THROWS_AS(apply_key_values(c, {{"train.etaa", "1"}}), ContractError);
    CHECK_THROWS(apply_key_values(c, {{"train.epochs", "many"}}));
    CHECK_THROWS(read_key_values(dir.file("absent.cfg")));
}

TEST_CASE("run_experiment: one report per repeat and a deterministic summary") {
    auto c = quick_config(11);
    c.repeats = 3;
    const auto a = run_experiment(c);
    CHECK(a.reports.size() == 3);
    CHECK(a.summary.completed == 3);
    CHECK(a.summary.errors.empty());
    CHECK(a.reports[1].run_seed == 12);
    const auto b = run_experiment(c);
    CHECK(a.summary.mean == b.summary.mean);
    CHECK(a.summary.stdev == b.summary.stdev);

    c.parallel_repeats = true;
    const auto p = run_experiment(c);
    CHECK(p.summary.mean == a.summary.mean);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.reports[i].to_json_line() == a.reports[i].to_json_line());
}

TEST_CASE("run_experiment with ten repeats writes ten reports and a summary line") {
    auto c = quick_config(100);
    c.repeats = 10;
    c.parallel_repeats = true;
    TempDir dir("experiment");
    c.output_dir = dir.path().string();
    const auto result = run_experiment(c);
    CHECK(result.reports.size() == 10);
    std::ifstream in(dir.path() / "reports.jsonl");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 11);
    CHECK(lines.back().find("\"mean\"") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path() / "run_9" / "manifest.json"));
    // Reloading run 0 and re-evaluating on its rebuilt bundle reproduces its report.
    auto bundle = prepare_bundle(c, 100);
    mask_bundle(bundle, c.topics, c.train.variant, c.random_mask_fraction, 100);
    const auto evaluated = evaluate(Checkpoint::load((dir.path() / "run_0").string()), bundle);
    CHECK(evaluated.table == result.reports[0].table);
    CHECK(evaluated.headline == result.reports[0].headline);
}

TEST_CASE("run_experiment records stage errors in the summary") {
    auto c = quick_config(1);
    c.dataset = DatasetKind::File;
    c.data_path = "/nonexistent/fecl.csv";
    c.held_out_target = "x";
    const auto result = run_experiment(c);
    CHECK(result.reports.empty());
    CHECK(result.summary.completed == 0);
    REQUIRE(result.summary.errors.size() == 1);
    CHECK(result.summary.errors[0].find("seed 1") != std::string::npos);
}

TEST_CASE("summary statistics") {
    std::vector<MetricReport> reports(3);
    reports[0].headline = 0.5;
    reports[1].headline = 0.7;
    reports[2].headline = 0.6;
    const auto s = summarize(reports, {});
    CHECK(s.mean == doctest::Approx(0.6));
    CHECK(s.stdev == doctest::Approx(0.1));
    CHECK(summarize({reports[0]}, {}).stdev == 0.0);
}

TEST_CASE("variants change only the intended setting") {
    TrainConfig full, no_cl, concat;
    no_cl.variant = Variant::NoCl;
    concat.variant = Variant::Concat;
    CHECK(no_cl.effective_eta() == 0.0);
    CHECK(no_cl.fusion_kind() == full.fusion_kind());
    CHECK(concat.effective_eta() == full.effective_eta());
    CHECK(concat.fusion_kind() == FusionKind::Concat);

    auto bundle = tiny_bundle();
    for (auto& split : {&bundle.train, &bundle.dev, &bundle.test}) {
        for (auto& inst : *split) inst.masked_text.reset();
    }
    TopicModelParams topics;
    topics.gibbs_iterations = 10;
    auto random_bundle = bundle;
    mask_bundle(random_bundle, topics, Variant::NoTopicMask, 0.15, 3);
    mask_bundle(bundle, topics, Variant::Full, 0.15, 3);
    CHECK(bundle.train[0].masked_text.has_value());
    CHECK(random_bundle.train[0].masked_text.has_value());
}
