#include "feast/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "feast/errors.hpp"
#include "feast/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob writer assumes a little-endian host");

namespace feast {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ValueError("config: learning_rate must be finite and >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw ValueError("config: weight_decay must be finite and >= 0");
    if (epochs < 1) throw ValueError("config: epochs must be >= 1");
    if (checkpoint_interval < 0) throw ValueError("config: checkpoint_interval must be >= 0");
    for (double s : noise_levels)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ValueError("config: noise levels must be finite and >= 0");
}

namespace {

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return {};
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

double parse_double_token(const std::string& tok, const std::string& key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw ParseError("config: bad number for " + key + ": '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError("config: bad number for " + key + ": '" + tok + "'");
    return v;
}

long long parse_int_token(const std::string& tok, const std::string& key) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(tok, &used);
    } catch (const std::exception&) {
        throw ParseError("config: bad integer for " + key + ": '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError("config: bad integer for " + key + ": '" + tok + "'");
    return v;
}

} // namespace

TrainConfig parse_train_config(std::istream& in) {
    TrainConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "learning_rate") {
            cfg.learning_rate = parse_double_token(value, key);
        } else if (key == "weight_decay") {
            cfg.weight_decay = parse_double_token(value, key);
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(parse_int_token(value, key));
        } else if (key == "seed") {
            cfg.rng_seed = static_cast<std::uint64_t>(parse_int_token(value, key));
        } else if (key == "checkpoint_interval") {
            cfg.checkpoint_interval = static_cast<int>(parse_int_token(value, key));
        } else if (key == "noise_levels") {
            cfg.noise_levels.clear();
            std::stringstream parts(value);
            std::string tok;
            while (std::getline(parts, tok, ',')) {
                tok = trim(tok);
                if (!tok.empty()) cfg.noise_levels.push_back(parse_double_token(tok, key));
            }
        } else {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                             "'");
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_train_config(in);
}

void sgd_step(ModelParams& params, const ModelParams& grads, const TrainConfig& cfg) {
    std::vector<ParamBlockRef> p = param_blocks(params);
    std::vector<ParamBlockRef> g = param_blocks(const_cast<ModelParams&>(grads));
    if (p.size() != g.size()) throw ShapeError("sgd step: gradient block count mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k].size() != g[k].size())
            throw ShapeError("sgd step: block " + p[k].name + " shape mismatch");
        const double wd = p[k].decay ? cfg.weight_decay : 0.0;
        for (std::size_t t = 0; t < p[k].size(); ++t)
            p[k].data[t] -= cfg.learning_rate * (g[k].data[t] + wd * p[k].data[t]);
    }
}

std::string epoch_record_json(const EpochRecord& rec) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.loss;
    j["accuracy"] = rec.accuracy;
    return j.dump();
}

std::vector<int> predict_labels(const Matrix& logits, const std::vector<int>& valid_classes) {
    const int C = logits.cols();
    std::vector<int> classes;
    if (valid_classes.empty()) {
        classes.resize(C);
        for (int c = 0; c < C; ++c) classes[c] = c;
    } else {
        classes = valid_classes;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        if (classes.front() < 0 || classes.back() >= C)
            throw ValueError("predict: valid class out of range");
    }
    std::vector<int> out(logits.rows());
    for (int i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        int best = classes[0];
        for (int c : classes)
            if (row[c] > row[best]) best = c;
        out[i] = best;
    }
    return out;
}

double dataset_accuracy(const ModelSpec& spec, const ModelParams& params,
                        const std::vector<TrainSample>& dataset) {
    if (dataset.empty()) throw ValueError("accuracy: empty dataset");
    double total = 0.0;
    for (const TrainSample& s : dataset) {
        const ModelForwardResult fwd =
            model_forward(spec, params, s.features, s.graph, s.hierarchy.get());
        const std::vector<int> pred = predict_labels(fwd.logits, s.valid_classes);
        if (pred.size() != s.targets.size()) throw ShapeError("accuracy: target length mismatch");
        int hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == s.targets[i];
        total += static_cast<double>(hits) / static_cast<double>(pred.size());
    }
    return total / static_cast<double>(dataset.size());
}

TrainResult train(const ModelSpec& spec, ModelParams& params,
                  const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                  const TrainHooks& hooks, int start_epoch, const std::string& rng_state) {
    cfg.validate();
    spec.validate();
    if (dataset.empty()) throw ValueError("train: empty dataset");
    if (start_epoch < 0 || start_epoch > cfg.epochs)
        throw ValueError("train: start epoch outside [0, epochs]");
    for (const TrainSample& s : dataset) {
        if (s.features.rows() != s.graph.n) throw ShapeError("train: feature rows != graph nodes");
        if (static_cast<int>(s.targets.size()) != s.features.rows())
            throw ShapeError("train: target count != node count");
        if (!s.noise_scale.empty() &&
            static_cast<int>(s.noise_scale.size()) != s.features.rows())
            throw ShapeError("train: noise scale length != node count");
    }

    Rng rng(cfg.rng_seed);
    if (!rng_state.empty()) rng.set_state(rng_state);

    std::vector<int> order(dataset.size());

    TrainResult result;
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        // Rebuilt from identity so the visit order depends only on the RNG
        // state, which is what lets a resumed run replay the original one.
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (int idx : order) {
            const TrainSample& s = dataset[idx];
            Matrix X = s.features;
            if (!cfg.noise_levels.empty()) {
                const double sigma =
                    cfg.noise_levels[rng.uniform_below(cfg.noise_levels.size())];
                for (int i = 0; i < X.rows(); ++i) {
                    const double mag = sigma * (s.noise_scale.empty() ? 1.0 : s.noise_scale[i]);
                    auto xi = X.row(i);
                    for (double& x : xi) x += rng.normal(0.0, mag);
                }
            }
            const ModelForwardResult fwd =
                model_forward(spec, params, X, s.graph, s.hierarchy.get());
            const SoftmaxLoss sl = softmax_cross_entropy(fwd.logits, s.targets, s.valid_classes);
            if (!std::isfinite(sl.loss))
                throw DivergenceError("training diverged: non-finite loss at epoch " +
                                      std::to_string(epoch));
            const ModelGrads grads =
                model_backward(spec, params, fwd.cache, s.graph, s.hierarchy.get(), sl.dLogits);
            sgd_step(params, grads.params, cfg);
            loss_sum += sl.loss;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(dataset.size());
        rec.accuracy = dataset_accuracy(spec, params, dataset);
        result.history.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 &&
            epoch % cfg.checkpoint_interval == 0 && epoch < cfg.epochs)
            hooks.on_checkpoint(epoch, rng.state());
    }
    result.rng_state = rng.state();
    return result;
}

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'E', 'A', 'S', 'T', 'C', 'K', 'P'};
constexpr int kCheckpointVersion = 1;

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::vector<ParamBlockRef> blocks = param_blocks(const_cast<ModelParams&>(ckpt.params));
    nlohmann::json header;
    header["format_version"] = kCheckpointVersion;
    header["epoch"] = ckpt.epoch;
    header["rng_state"] = ckpt.rng_state;
    header["model_spec"] = nlohmann::json::parse(spec_to_json(ckpt.spec));
    header["blocks"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const ParamBlockRef& b : blocks) {
        nlohmann::json entry;
        entry["name"] = b.name;
        entry["rows"] = b.rows;
        entry["cols"] = b.cols;
        entry["offset"] = offset;
        header["blocks"].push_back(std::move(entry));
        offset += b.size() * sizeof(double);
    }
    header["blob_bytes"] = offset;
    const std::string header_text = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + tmp);
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
        unsigned char len_bytes[4] = {static_cast<unsigned char>(len & 0xff),
                                      static_cast<unsigned char>((len >> 8) & 0xff),
                                      static_cast<unsigned char>((len >> 16) & 0xff),
                                      static_cast<unsigned char>((len >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(len_bytes), 4);
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (const ParamBlockRef& b : blocks)
            out.write(reinterpret_cast<const char*>(b.data),
                      static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!out) throw IoError("checkpoint write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw CheckpointError("not a checkpoint file (bad magic): " + path);

    unsigned char len_bytes[4];
    in.read(reinterpret_cast<char*>(len_bytes), 4);
    if (!in) throw CheckpointError("truncated checkpoint header length");
    const std::uint32_t header_len = static_cast<std::uint32_t>(len_bytes[0]) |
                                     (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                                     (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                                     (static_cast<std::uint32_t>(len_bytes[3]) << 24);
    if (header_len > (64u << 20)) throw CheckpointError("implausible checkpoint header size");

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    if (!in) throw CheckpointError("truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::parse_error&) {
        throw CheckpointError("corrupt checkpoint header (bad JSON)");
    }

    Checkpoint ckpt;
    try {
        ckpt.format_version = header.at("format_version").get<int>();
        if (ckpt.format_version != kCheckpointVersion)
            throw CheckpointError("unsupported checkpoint format version " +
                                  std::to_string(ckpt.format_version));
        ckpt.epoch = header.at("epoch").get<int>();
        ckpt.rng_state = header.at("rng_state").get<std::string>();
        ckpt.spec = spec_from_json(header.at("model_spec").dump());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }

    ckpt.params = params_for_spec(ckpt.spec);
    std::vector<ParamBlockRef> blocks = param_blocks(ckpt.params);
    const auto& listed = header.at("blocks");
    if (listed.size() != blocks.size())
        throw CheckpointError("checkpoint block count does not match the model spec");
    std::uint64_t offset = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& entry = listed[k];
        if (entry.at("name").get<std::string>() != blocks[k].name ||
            entry.at("rows").get<int>() != blocks[k].rows ||
            entry.at("cols").get<int>() != blocks[k].cols ||
            entry.at("offset").get<std::uint64_t>() != offset)
            throw CheckpointError("checkpoint block layout mismatch at " + blocks[k].name);
        offset += blocks[k].size() * sizeof(double);
    }
    if (header.at("blob_bytes").get<std::uint64_t>() != offset)
        throw CheckpointError("checkpoint blob size does not match the block table");

    for (ParamBlockRef& b : blocks) {
        in.read(reinterpret_cast<char*>(b.data),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!in) throw CheckpointError("truncated checkpoint blob");
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw CheckpointError("trailing bytes after checkpoint blob");
    return ckpt;
}

} // namespace feast
