// Command-line front end: data preparation, topic masking, training,
// evaluation, repeated experiments and diagnostics.
//
// Every command reads an optional flat key-value config (--config), then
// applies --set key=value overrides in order, then --seed. Keys are the
// RunConfig keys accepted by apply_key_values.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fecl/harness.hpp"

namespace fs = std::filesystem;
using namespace fecl;

namespace {

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "flat key = value config file");
    cmd->add_option("--set", o.overrides, "key=value override, repeatable");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&o](const std::uint64_t& s) {
            o.seed = s;
            o.seed_given = true;
        },
        "run seed");
}

RunConfig resolve(const CommonOptions& o) {
    RunConfig config;
    if (!o.config_path.empty()) apply_key_values(config, read_key_values(o.config_path));
    for (const auto& item : o.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ContractError("--set expects key=value, got '" + item + "'");
        apply_key_values(config, {{item.substr(0, eq), item.substr(eq + 1)}});
    }
    if (o.seed_given) config.train.seed = o.seed;
    return config;
}

void print_report_table(const MetricReport& r, std::ostream& out) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %8s %8s\n", "class", "F1", "support");
    out << line;
    for (std::size_t c = 0; c < kNumStances; ++c) {
        std::snprintf(line, sizeof line, "%-10s %8.4f %8lld\n", std::string(to_string(static_cast<Stance>(c))).c_str(),
                      r.per_class_f1[c], static_cast<long long>(r.support[c]));
        out << line;
    }
    std::snprintf(line, sizeof line, "%-10s %8.4f   (%s)\n", "headline", r.headline,
                  std::string(to_string(r.protocol)).c_str());
    out << line;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& l : lines) out << l << '\n';
}

DatasetBundle masked_bundle_from(const std::string& dir) {
    auto bundle = load_bundle(dir);
    for (const auto* split : {&bundle.train, &bundle.dev, &bundle.test}) {
        for (const auto& inst : *split) require_masked_text(inst);
    }
    return bundle;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-enhanced contrastive stance detection"};
    app.require_subcommand(1);

    // prepare
    CommonOptions prep_o;
    std::string prep_out;
    auto* prepare = app.add_subcommand("prepare", "load or generate a dataset and write a split bundle");
    add_common(prepare, prep_o);
    prepare->add_option("--out", prep_out, "bundle directory")->required();

    // fit-topics
    CommonOptions topics_o;
    std::string topics_bundle, topics_out;
    auto* fit_topics = app.add_subcommand("fit-topics", "fit per-target topic keywords on a bundle");
    add_common(fit_topics, topics_o);
    fit_topics->add_option("--bundle", topics_bundle, "bundle directory")->required();
    fit_topics->add_option("--out", topics_out, "lexicon file")->required();

    // augment
    CommonOptions aug_o;
    std::string aug_bundle, aug_lexicon, aug_out;
    bool aug_random = false;
    auto* augment = app.add_subcommand("augment", "attach masked texts to every instance of a bundle");
    add_common(augment, aug_o);
    augment->add_option("--bundle", aug_bundle, "bundle directory")->required();
    augment->add_option("--lexicon", aug_lexicon, "lexicon file from fit-topics");
    augment->add_flag("--random", aug_random, "random masking instead of topic masking");
    augment->add_option("--out", aug_out, "output bundle directory")->required();

    // train
    CommonOptions train_o;
    std::string train_bundle, train_out;
    auto* train = app.add_subcommand("train", "train on a masked bundle and write the best-dev checkpoint");
    add_common(train, train_o);
    train->add_option("--bundle", train_bundle, "masked bundle directory")->required();
    train->add_option("--out", train_out, "checkpoint directory")->required();

    // evaluate
    CommonOptions eval_o;
    std::string eval_ckpt, eval_bundle, eval_out;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a masked bundle's test split");
    add_common(evaluate_cmd, eval_o);
    evaluate_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
    evaluate_cmd->add_option("--bundle", eval_bundle, "masked bundle directory")->required();
    evaluate_cmd->add_option("--out", eval_out, "append the JSON report to this file");

    // run
    CommonOptions run_o;
    auto* run = app.add_subcommand("run", "repeated end-to-end experiment with a summary");
    add_common(run, run_o);

    // trace
    CommonOptions trace_o;
    std::string trace_bundle, trace_out;
    std::size_t trace_every = 5, trace_probe = 256;
    auto* trace = app.add_subcommand("trace", "alignment and uniformity of probe sentences during training");
    add_common(trace, trace_o);
    trace->add_option("--bundle", trace_bundle, "masked bundle directory")->required();
    trace->add_option("--out", trace_out, "trace file (one JSON record per line)")->required();
    trace->add_option("--every", trace_every, "steps between records")->check(CLI::PositiveNumber);
    trace->add_option("--probe-size", trace_probe, "number of dev sentences in the probe")->check(CLI::PositiveNumber);

    // export-embeddings
    CommonOptions emb_o;
    std::string emb_ckpt, emb_bundle, emb_out, emb_projector = "none";
    auto* export_cmd = app.add_subcommand("export-embeddings", "write masked-sentence embeddings of train and test");
    add_common(export_cmd, emb_o);
    export_cmd->add_option("--checkpoint", emb_ckpt, "checkpoint directory")->required();
    export_cmd->add_option("--bundle", emb_bundle, "masked bundle directory")->required();
    export_cmd->add_option("--projector", emb_projector, "none | pca");
    export_cmd->add_option("--out", emb_out, "TSV output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*prepare) {
            const auto config = resolve(prep_o);
            config.validate();
            const auto bundle = prepare_bundle(config, config.train.seed);
            save_bundle(prep_out, bundle);
            std::cout << "train " << bundle.train.size() << ", dev " << bundle.dev.size() << ", test "
                      << bundle.test.size() << " -> " << prep_out << '\n';
        } else if (*fit_topics) {
            const auto config = resolve(topics_o);
            const auto bundle = load_bundle(topics_bundle);
            std::vector<Instance> all;
            for (const auto* split : {&bundle.train, &bundle.dev, &bundle.test}) {
                all.insert(all.end(), split->begin(), split->end());
            }
            auto params = config.topics;
            params.seed = config.train.seed;
            const auto lexicon = fit_topic_lexicon(all, params);
            save_lexicon(topics_out, lexicon);
            std::cout << lexicon.per_target.size() << " targets -> " << topics_out << '\n';
        } else if (*augment) {
            const auto config = resolve(aug_o);
            auto bundle = load_bundle(aug_bundle);
            AugmentOptions options;
            options.seed = config.train.seed;
            options.random_fraction = config.random_mask_fraction;
            TopicLexicon lexicon;
            if (aug_random) {
                options.strategy = MaskStrategy::Random;
            } else {
                if (aug_lexicon.empty()) throw ContractError("augment needs --lexicon unless --random is given");
                lexicon = load_lexicon(aug_lexicon);
            }
            for (auto* split : {&bundle.train, &bundle.dev, &bundle.test}) {
                attach_masks(*split, augment_corpus(*split, lexicon, options));
            }
            save_bundle(aug_out, bundle);
            std::cout << "masked bundle -> " << aug_out << '\n';
        } else if (*train) {
            const auto config = resolve(train_o);
            config.train.validate();
            const auto bundle = masked_bundle_from(train_bundle);
            FitOptions options;
            options.protocol = headline_for(bundle.protocol);
            options.micro = config.micro;
            const auto checkpoint = fit(bundle, config.model, config.train, options);
            checkpoint.save(train_out);
            for (const auto& h : checkpoint.history) {
                std::printf("epoch %3d  L_cls %.4f  L_CL %.4f  L_total %.4f  dev %.4f\n", h.epoch, h.cls, h.cl,
                            h.total, h.dev_metric);
            }
            std::cout << "best epoch " << checkpoint.epoch << " -> " << train_out << '\n';
        } else if (*evaluate_cmd) {
            const auto config = resolve(eval_o);
            const auto checkpoint = Checkpoint::load(eval_ckpt);
            const auto bundle = masked_bundle_from(eval_bundle);
            const auto report = evaluate(checkpoint, bundle, config.micro);
            print_report_table(report, std::cout);
            std::cout << report.to_json_line() << '\n';
            if (!eval_out.empty()) {
                std::ofstream out(eval_out, std::ios::app);
                if (!out) throw std::runtime_error("cannot write " + eval_out);
                out << report.to_json_line() << '\n';
            }
        } else if (*run) {
            const auto config = resolve(run_o);
            const auto result = run_experiment(config);
            for (const auto& r : result.reports) {
                std::cout << "seed " << r.run_seed << '\n';
                print_report_table(r, std::cout);
            }
            std::printf("%s: mean %.4f  stdev %.4f  over %d of %d runs\n",
                        std::string(to_string(config.train.variant)).c_str(), result.summary.mean,
                        result.summary.stdev, result.summary.completed, config.repeats);
            for (const auto& e : result.summary.errors) std::cerr << "error: " << e << '\n';
            if (!result.summary.errors.empty()) return 1;
        } else if (*trace) {
            const auto config = resolve(trace_o);
            const auto bundle = masked_bundle_from(trace_bundle);
            std::vector<std::string> probe;
            for (const auto& inst : bundle.dev) {
                if (probe.size() == trace_probe) break;
                probe.push_back(*inst.masked_text);
            }
            const auto records = diagnostics_trace(bundle, config.model, config.train, probe, trace_every);
            std::vector<std::string> lines;
            for (const auto& r : records) {
                lines.push_back(nlohmann::json{{"step", r.step}, {"alignment", r.alignment}, {"uniformity", r.uniformity}}
                                    .dump());
            }
            write_lines(trace_out, lines);
            std::cout << records.size() << " records -> " << trace_out << '\n';
        } else if (*export_cmd) {
            resolve(emb_o);
            const auto checkpoint = Checkpoint::load(emb_ckpt);
            const auto model = restore_model(checkpoint);
            const auto bundle = masked_bundle_from(emb_bundle);
            std::vector<Instance> rows;
            std::vector<std::string> tags;
            for (const auto& inst : bundle.train) {
                rows.push_back(inst);
                tags.push_back("train");
            }
            for (const auto& inst : bundle.test) {
                rows.push_back(inst);
                tags.push_back("test");
            }
            const auto embeddings = export_embeddings(model, rows, tags, parse_projector(emb_projector));
            std::vector<std::string> lines;
            for (const auto& e : embeddings) {
                std::string line = e.id + '\t' + e.split + '\t' + e.target;
                for (double x : e.coords) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "\t%.17g", x);
                    line += buf;
                }
                lines.push_back(std::move(line));
            }
            write_lines(emb_out, lines);
            std::cout << embeddings.size() << " rows -> " << emb_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
