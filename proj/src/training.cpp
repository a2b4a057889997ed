#include "fecl/training.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fecl/log.hpp"
#include "fecl/text.hpp"

namespace fecl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::Concat: return "concat";
        case Variant::NoTopicMask: return "no_topicmask";
        case Variant::NoCl: return "no_cl";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    auto key = text::to_lower(name);
    for (auto& c : key) {
        if (c == '-') c = '_';
    }
    if (key == "full") return Variant::Full;
    if (key == "concat") return Variant::Concat;
    if (key == "no_topicmask") return Variant::NoTopicMask;
    if (key == "no_cl") return Variant::NoCl;
    throw ContractError("unknown variant '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (!(eta >= 0.0)) throw ContractError("eta must be >= 0");
    if (!(l2_coefficient >= 0.0)) throw ContractError("l2_coefficient must be >= 0");
    if (!(temperature > 0.0)) throw ContractError("temperature must be > 0");
    if (patience < 0) throw ContractError("patience must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ContractError("Adam moment constants must be in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ContractError("adam_epsilon must be > 0");
}

double cls_loss(const Tensor& predicted, const Tensor& one_hot) {
    if (!predicted.same_shape(one_hot)) throw ContractError("cls_loss: shape mismatch");
    constexpr double kFloor = 1e-12;
    double loss = 0.0;
    bool clamped = false;
    for (std::size_t i = 0; i < predicted.rows(); ++i) {
        for (std::size_t j = 0; j < predicted.cols(); ++j) {
            const double y = one_hot(i, j);
            if (y == 0.0) continue;
            double p = predicted(i, j);
            if (p < kFloor) {
                p = kFloor;
                clamped = true;
            }
            loss -= y * std::log(p);
        }
    }
    if (clamped) log::warn("cls_loss: predicted probability below 1e-12 at a true label was clamped");
    return loss;
}

double total_loss(double cls, double cl, double params_sq_norm, const TrainConfig& config) {
    return cls + config.effective_eta() * cl + config.l2_coefficient * params_sq_norm;
}

double parameter_squared_norm(const ad::ParameterList& params) {
    double s = 0.0;
    for (const auto& p : params) s += squared_norm(p.var.value().values());
    return s;
}

Adam::Adam(ad::ParameterList params, double learning_rate, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    for (const auto& p : params_) {
        m_.emplace_back(p.var.rows(), p.var.cols());
        v_.emplace_back(p.var.rows(), p.var.cols());
    }
}

void Adam::step() {
    ++t_;
    const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto var = params_[k].var;
        const Tensor& g = var.grad_buffer();
        Tensor& w = var.mutable_value();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
        }
    }
}

Trainer::Trainer(FeclModel& model, TrainConfig config)
    : model_(model),
      config_(std::move(config)),
      params_(model.parameters()),
      optimizer_(params_, config_.learning_rate, config_.adam_beta1, config_.adam_beta2, config_.adam_epsilon) {
    config_.validate();
}

Trainer::Forward Trainer::forward(std::span<const Instance> batch, std::uint64_t dropout_seed) const {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    const std::size_t n = batch.size();
    std::vector<ad::Var> views(2 * n);
    std::vector<ad::Var> logits(n);
    std::vector<int> labels(n);
    std::vector<std::exception_ptr> errors(n);

    // Every instance draws its dropout masks from its own generator, so the
    // result does not depend on the thread schedule.
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            const Instance& inst = batch[i];
            if (!inst.label) throw DataError("instance " + inst.id + " has no label");
            const auto& masked = require_masked_text(inst);
            Rng rng(derive_seed(dropout_seed, static_cast<std::uint64_t>(i)));
            views[2 * i] = model_.masked_feature(masked, &rng);
            views[2 * i + 1] = model_.masked_feature(masked, &rng);
            logits[i] = model_.logits(inst.target, inst.text, views[2 * i], &rng);
            labels[i] = static_cast<int>(*inst.label);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    Forward out;
    out.cls = ad::cross_entropy_with_logits(ad::concat_rows(logits), labels);
    auto projections = model_.projection(ad::concat_rows(views));
    if (config_.detach_contrastive) projections = ad::detach(projections);
    out.cl = ad::nt_xent(projections, config_.temperature);
    out.contrastive_rows = projections.rows();
    return out;
}

namespace {

std::string batch_ids(std::span<const Instance> batch) {
    std::string s;
    for (const auto& inst : batch) {
        if (!s.empty()) s += ", ";
        s += inst.id;
    }
    return s;
}

}  // namespace

StepMetrics Trainer::losses(std::span<const Instance> batch) {
    ad::NoGradGuard no_grad;
    const auto f = forward(batch, derive_seed(derive_seed(config_.seed, "dropout"), steps()));
    StepMetrics m{f.cls.item(), f.cl.item(), 0.0, f.contrastive_rows};
    m.total = total_loss(m.cls, m.cl, parameter_squared_norm(params_), config_);
    return m;
}

StepMetrics Trainer::train_step(std::span<const Instance> batch) {
    const auto f = forward(batch, derive_seed(derive_seed(config_.seed, "dropout"), steps()));
    const double eta = config_.effective_eta();
    const double lambda = config_.l2_coefficient;

    StepMetrics m{f.cls.item(), f.cl.item(), 0.0, f.contrastive_rows};
    m.total = total_loss(m.cls, m.cl, parameter_squared_norm(params_), config_);
    if (!std::isfinite(m.total)) {
        throw TrainingError("non-finite loss at step " + std::to_string(steps()) + " (cls=" + std::to_string(m.cls) +
                            ", cl=" + std::to_string(m.cl) + "); batch: " + batch_ids(batch));
    }

    for (auto& p : params_) p.var.zero_grad();
    ad::backward(ad::add(f.cls, ad::scale(f.cl, eta)));

    // d(lambda ||theta||^2) = 2 lambda theta, added outside the graph.
    double grad_sq = 0.0;
    for (auto& p : params_) {
        Tensor& g = p.var.grad_buffer();
        const Tensor& w = p.var.value();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += 2.0 * lambda * w[i];
            grad_sq += g[i] * g[i];
        }
    }
    const double grad_norm = std::sqrt(grad_sq);
    if (config_.grad_clip > 0.0 && grad_norm > config_.grad_clip) {
        const double s = config_.grad_clip / grad_norm;
        for (auto& p : params_) {
            for (auto& x : p.var.grad_buffer().values()) x *= s;
        }
    }
    optimizer_.step();
    return m;
}

int best_epoch(const std::vector<EpochRecord>& history) {
    int best = -1;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (best < 0 || history[i].dev_metric > history[static_cast<std::size_t>(best)].dev_metric) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

HeadlineProtocol headline_for(Protocol protocol) {
    switch (protocol) {
        case Protocol::ZeroShot: return HeadlineProtocol::ZeroShot;
        case Protocol::FewShot: return HeadlineProtocol::Vast;
        case Protocol::CrossTarget: return HeadlineProtocol::CrossTarget;
    }
    throw ContractError("headline_for: unknown protocol");
}

ConfusionTable confusion_on(const FeclModel& model, std::span<const Instance> instances) {
    for (const auto& inst : instances) {
        if (!inst.label) throw DataError("instance " + inst.id + " has no gold label");
    }
    std::vector<Stance> predicted(instances.size());
    std::vector<std::exception_ptr> errors(instances.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < instances.size(); ++i) {
        try {
            predicted[i] = model.predict(instances[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    ConfusionTable table;
    for (std::size_t i = 0; i < instances.size(); ++i) table.add(*instances[i].label, predicted[i]);
    return table;
}

std::shared_ptr<const Vocabulary> build_vocabulary(const DatasetBundle& bundle) {
    std::vector<std::string> texts;
    for (const auto* split : {&bundle.train, &bundle.dev}) {
        for (const auto& inst : *split) {
            texts.push_back(inst.text);
            texts.push_back(inst.target);
            if (inst.masked_text) texts.push_back(*inst.masked_text);
        }
    }
    return std::make_shared<const Vocabulary>(Vocabulary::build(texts));
}

Checkpoint fit(const DatasetBundle& bundle, ModelConfig model_config, const TrainConfig& config,
               const FitOptions& options) {
    config.validate();
    if (bundle.train.empty()) throw DataError("fit: empty training split");
    if (bundle.dev.empty()) throw DataError("fit: empty dev split");
    model_config.fusion = config.fusion_kind();
    model_config.seed = config.seed;

    Checkpoint best;
    best.model = model_config;
    best.train = config;
    best.vocab = build_vocabulary(bundle);

    FeclModel model(model_config, best.vocab);
    best.model = model.config();
    Trainer trainer(model, config);

    std::vector<std::size_t> order(bundle.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    const auto batch_size = static_cast<std::size_t>(config.batch_size);

    if (options.on_progress) options.on_progress(0, model);
    double best_metric = -std::numeric_limits<double>::infinity();
    int since_best = 0;
    bool out_of_steps = false;
    std::vector<EpochRecord> history;
    std::vector<Instance> batch;

    for (int epoch = 0; epoch < config.epochs && !out_of_steps; ++epoch) {
        shuffle(order, shuffle_rng);
        EpochRecord record;
        record.epoch = epoch;
        std::size_t n_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            if (config.max_steps > 0 && trainer.steps() >= config.max_steps) {
                out_of_steps = true;
                break;
            }
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) {
                batch.push_back(bundle.train[order[k]]);
            }
            const auto m = trainer.train_step(batch);
            record.cls += m.cls;
            record.cl += m.cl;
            record.total += m.total;
            ++n_steps;
            if (options.on_progress) options.on_progress(trainer.steps(), model);
        }
        if (n_steps == 0) break;
        record.cls /= static_cast<double>(n_steps);
        record.cl /= static_cast<double>(n_steps);
        record.total /= static_cast<double>(n_steps);
        record.dev_metric = headline_metric(confusion_on(model, bundle.dev), options.protocol, options.micro);
        if (!std::isfinite(record.dev_metric)) {
            throw TrainingError("dev metric is not finite after epoch " + std::to_string(epoch));
        }
        history.push_back(record);

        if (record.dev_metric > best_metric) {
            best_metric = record.dev_metric;
            best.tensors = model.state();
            best.epoch = epoch;
            since_best = 0;
        } else if (config.patience > 0 && ++since_best >= config.patience) {
            break;
        }
    }
    if (history.empty()) {
        best.tensors = model.state();
        best.epoch = 0;
    }
    best.history = std::move(history);
    return best;
}

FeclModel restore_model(const Checkpoint& checkpoint) {
    FeclModel model(checkpoint.model, checkpoint.vocab);
    model.load_state(checkpoint.tensors);
    return model;
}

// ---------------------------------------------------------------------------
// Checkpoint archive

namespace {

constexpr int kCheckpointFormat = 1;

std::string_view fusion_name(FusionKind k) { return k == FusionKind::Concat ? "concat" : "attention"; }

FusionKind parse_fusion(std::string_view s) {
    if (s == "attention") return FusionKind::Attention;
    if (s == "concat") return FusionKind::Concat;
    throw DataError("unknown fusion kind '" + std::string(s) + "'");
}

json to_json(const ModelConfig& c) {
    const auto& e = c.encoder;
    return {{"encoder",
             {{"hidden_dim", e.hidden_dim},
              {"vocab_size", e.vocab_size},
              {"max_sequence_length", e.max_sequence_length},
              {"dropout_rate", e.dropout_rate},
              {"n_layers", e.n_layers},
              {"n_heads", e.n_heads},
              {"ffn_dim", e.ffn_dim},
              {"seed", e.seed}}},
            {"share_encoder", c.share_encoder},
            {"projection_hidden_dim", c.projection_hidden_dim},
            {"projection_dim", c.projection_dim},
            {"fusion_dim", c.fusion_dim},
            {"fusion", fusion_name(c.fusion)},
            {"seed", c.seed}};
}

ModelConfig model_from_json(const json& j) {
    ModelConfig c;
    const auto& e = j.at("encoder");
    c.encoder.hidden_dim = e.at("hidden_dim");
    c.encoder.vocab_size = e.at("vocab_size");
    c.encoder.max_sequence_length = e.at("max_sequence_length");
    c.encoder.dropout_rate = e.at("dropout_rate");
    c.encoder.n_layers = e.at("n_layers");
    c.encoder.n_heads = e.at("n_heads");
    c.encoder.ffn_dim = e.at("ffn_dim");
    c.encoder.seed = e.at("seed");
    c.share_encoder = j.at("share_encoder");
    c.projection_hidden_dim = j.at("projection_hidden_dim");
    c.projection_dim = j.at("projection_dim");
    c.fusion_dim = j.at("fusion_dim");
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.seed = j.at("seed");
    return c;
}

json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"eta", c.eta},
            {"l2_coefficient", c.l2_coefficient},
            {"temperature", c.temperature},
            {"seed", c.seed},
            {"variant", to_string(c.variant)},
            {"patience", c.patience},
            {"grad_clip", c.grad_clip},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"max_steps", c.max_steps},
            {"detach_contrastive", c.detach_contrastive}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate");
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.eta = j.at("eta");
    c.l2_coefficient = j.at("l2_coefficient");
    c.temperature = j.at("temperature");
    c.seed = j.at("seed");
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.patience = j.at("patience");
    c.grad_clip = j.at("grad_clip");
    c.adam_beta1 = j.at("adam_beta1");
    c.adam_beta2 = j.at("adam_beta2");
    c.adam_epsilon = j.at("adam_epsilon");
    c.max_steps = j.at("max_steps");
    c.detach_contrastive = j.at("detach_contrastive");
    return c;
}

// Parameter names are dotted identifiers; they map directly to file names.
std::string tensor_file(const std::string& name) { return "tensors/" + name + ".bin"; }

void write_tensor(const fs::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (double x : t.values()) {
        auto bits = std::bit_cast<std::uint64_t>(x);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        char bytes[8];
        std::memcpy(bytes, &bits, 8);
        out.write(bytes, 8);
    }
    if (!out) throw DataError("write failed for " + path.string());
}

Tensor read_tensor(const fs::path& path, std::size_t rows, std::size_t cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    Tensor t(rows, cols);
    for (auto& x : t.values()) {
        char bytes[8];
        if (!in.read(bytes, 8)) throw DataError("truncated tensor file " + path.string());
        std::uint64_t bits = 0;
        std::memcpy(&bits, bytes, 8);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        x = std::bit_cast<double>(bits);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in " + path.string());
    return t;
}

json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch}, {"L_cls", r.cls}, {"L_CL", r.cl}, {"L_total", r.total}, {"dev_metric", r.dev_metric}};
}

}  // namespace

void Checkpoint::save(const std::string& dir) const {
    if (!vocab) throw ContractError("Checkpoint::save: no vocabulary");
    const fs::path root(dir);
    fs::create_directories(root / "tensors");
    json manifest;
    manifest["format_version"] = kCheckpointFormat;
    manifest["dtype"] = "float64-le";
    manifest["seed"] = train.seed;
    manifest["epoch"] = epoch;
    manifest["config"] = {{"model", to_json(model)}, {"train", to_json(train)}};
    manifest["tensors"] = json::array();
    for (const auto& [name, t] : tensors) {
        const auto file = tensor_file(name);
        write_tensor(root / file, t);
        manifest["tensors"].push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"file", file}});
    }
    vocab->save((root / "vocab.txt").string());
    {
        std::ofstream out(root / "history.jsonl");
        for (const auto& r : history) out << to_json(r).dump() << '\n';
    }
    std::ofstream out(root / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw DataError("cannot write manifest in " + dir);
}

Checkpoint Checkpoint::load(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in) throw DataError("no manifest.json in " + dir);
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed manifest in " + dir + ": " + e.what());
    }
    if (manifest.value("format_version", 0) != kCheckpointFormat) {
        throw DataError("unsupported checkpoint format in " + dir);
    }
    Checkpoint c;
    c.model = model_from_json(manifest.at("config").at("model"));
    c.train = train_from_json(manifest.at("config").at("train"));
    c.epoch = manifest.at("epoch");
    c.vocab = std::make_shared<const Vocabulary>(Vocabulary::load((root / "vocab.txt").string()));
    for (const auto& entry : manifest.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw DataError("tensor '" + name + "' is not two-dimensional");
        c.tensors.emplace(name, read_tensor(root / entry.at("file").get<std::string>(), shape[0], shape[1]));
    }
    std::ifstream hist(root / "history.jsonl");
    std::string line;
    while (std::getline(hist, line)) {
        if (text::trim(line).empty()) continue;
        const auto j = json::parse(line);
        c.history.push_back({j.at("epoch"), j.at("L_cls"), j.at("L_CL"), j.at("L_total"), j.at("dev_metric")});
    }
    return c;
}

}  // namespace fecl
