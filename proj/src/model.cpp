#include "feast/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "json.hpp"

#include "feast/errors.hpp"
#include "feast/rng.hpp"

namespace feast {

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::Lin: return "Lin";
    case LayerKind::FeaStConv: return "FeaStConv";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Pool: return "Pool";
    case LayerKind::Unpool: return "Unpool";
    case LayerKind::SkipConcat: return "SkipConcat";
    case LayerKind::GlobalMaxConcat: return "GlobalMaxConcat";
    case LayerKind::Softmax: return "Softmax";
    }
    throw ValueError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    for (LayerKind kind : {LayerKind::Lin, LayerKind::FeaStConv, LayerKind::ReLU, LayerKind::Pool,
                           LayerKind::Unpool, LayerKind::SkipConcat, LayerKind::GlobalMaxConcat,
                           LayerKind::Softmax})
        if (layer_kind_name(kind) == name) return kind;
    throw ParseError("unknown layer kind: " + name);
}

bool ModelSpec::uses_hierarchy() const {
    for (const LayerDesc& d : layers)
        if (d.kind == LayerKind::Pool || d.kind == LayerKind::Unpool) return true;
    return false;
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw ShapeError("model spec: input_dim must be >= 1");
    if (num_classes < 1) throw ShapeError("model spec: num_classes must be >= 1");
    if (layers.empty()) throw ShapeError("model spec: no layers");

    int width = input_dim;
    int level = 0;
    std::vector<int> out_level(layers.size(), 0);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerDesc& d = layers[i];
        const std::string where = "model spec layer " + std::to_string(i);
        switch (d.kind) {
        case LayerKind::Lin:
            if (d.width < 1) throw ShapeError(where + ": Lin width must be >= 1");
            width = d.width;
            break;
        case LayerKind::FeaStConv:
            if (d.width < 1) throw ShapeError(where + ": conv width must be >= 1");
            if (d.num_matrices < 1) throw ShapeError(where + ": conv needs num_matrices >= 1");
            if (d.level != level) throw ShapeError(where + ": conv level mismatch");
            width = d.width;
            break;
        case LayerKind::ReLU:
        case LayerKind::Softmax:
            if (d.width != width) throw ShapeError(where + ": width must match input");
            break;
        case LayerKind::Pool:
            if (d.width != width) throw ShapeError(where + ": pool preserves width");
            if (d.level != level) throw ShapeError(where + ": pool level mismatch");
            ++level;
            break;
        case LayerKind::Unpool:
            if (d.width != width) throw ShapeError(where + ": unpool preserves width");
            if (d.level != level) throw ShapeError(where + ": unpool level mismatch");
            if (level == 0) throw ShapeError(where + ": unpool below level 0");
            --level;
            break;
        case LayerKind::SkipConcat: {
            if (d.source_layer < 0 || d.source_layer >= static_cast<int>(i))
                throw ShapeError(where + ": skip source must be an earlier layer");
            if (out_level[d.source_layer] != level)
                throw ShapeError(where + ": skip source is at a different level");
            const int src_width = layers[d.source_layer].width;
            if (d.width != width + src_width) throw ShapeError(where + ": skip width mismatch");
            width = d.width;
            break;
        }
        case LayerKind::GlobalMaxConcat: {
            if (d.sources.empty()) throw ShapeError(where + ": concat needs sources");
            int total = 0;
            for (int s : d.sources) {
                if (s < 0 || s >= static_cast<int>(i))
                    throw ShapeError(where + ": concat source must be an earlier layer");
                if (out_level[s] != level)
                    throw ShapeError(where + ": concat source is at a different level");
                total += layers[s].width;
            }
            if (d.sources.back() != static_cast<int>(i) - 1)
                throw ShapeError(where + ": last concat source must be the preceding layer");
            total += layers[d.sources.back()].width;
            if (d.width != total) throw ShapeError(where + ": concat width mismatch");
            width = d.width;
            break;
        }
        }
        out_level[i] = level;
    }
    if (level != 0) throw ShapeError("model spec: does not end at level 0");
    if (width != num_classes) throw ShapeError("model spec: final width != num_classes");
}

std::string spec_to_json(const ModelSpec& spec) {
    nlohmann::json doc;
    doc["input_dim"] = spec.input_dim;
    doc["num_classes"] = spec.num_classes;
    doc["layers"] = nlohmann::json::array();
    for (const LayerDesc& d : spec.layers) {
        nlohmann::json entry;
        entry["kind"] = layer_kind_name(d.kind);
        entry["width"] = d.width;
        if (d.kind == LayerKind::FeaStConv) {
            entry["num_matrices"] = d.num_matrices;
            entry["translation_invariant"] = d.translation_invariant;
        }
        if (d.level != 0) entry["level"] = d.level;
        if (d.kind == LayerKind::SkipConcat) entry["source_layer"] = d.source_layer;
        if (d.kind == LayerKind::GlobalMaxConcat) entry["sources"] = d.sources;
        doc["layers"].push_back(std::move(entry));
    }
    return doc.dump(2);
}

ModelSpec spec_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model spec: ") + e.what());
    }
    ModelSpec spec;
    try {
        spec.input_dim = doc.at("input_dim").get<int>();
        spec.num_classes = doc.at("num_classes").get<int>();
        for (const auto& entry : doc.at("layers")) {
            LayerDesc d;
            d.kind = layer_kind_from_name(entry.at("kind").get<std::string>());
            d.width = entry.at("width").get<int>();
            d.num_matrices = entry.value("num_matrices", 0);
            d.translation_invariant = entry.value("translation_invariant", false);
            d.level = entry.value("level", 0);
            d.source_layer = entry.value("source_layer", -1);
            if (entry.contains("sources")) d.sources = entry["sources"].get<std::vector<int>>();
            spec.layers.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::vector<ParamBlockRef> param_blocks(ModelParams& params) {
    std::vector<ParamBlockRef> blocks;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        LayerParams& lp = params.layers[i];
        if (auto* lin = std::get_if<LinearParams>(&lp)) {
            blocks.push_back({prefix + "W", lin->W.data().data(), lin->W.rows(), lin->W.cols(), true});
            blocks.push_back({prefix + "b", lin->b.data(), static_cast<int>(lin->b.size()), 1, false});
        } else if (auto* conv = std::get_if<FeastConvParams>(&lp)) {
            for (std::size_t m = 0; m < conv->W.size(); ++m)
                blocks.push_back({prefix + "W" + std::to_string(m), conv->W[m].data().data(),
                                  conv->W[m].rows(), conv->W[m].cols(), true});
            blocks.push_back({prefix + "u", conv->u.data().data(), conv->u.rows(), conv->u.cols(), true});
            if (conv->v.rows() > 0)
                blocks.push_back({prefix + "v", conv->v.data().data(), conv->v.rows(), conv->v.cols(), true});
            blocks.push_back({prefix + "c", conv->c.data(), static_cast<int>(conv->c.size()), 1, false});
            blocks.push_back({prefix + "b", conv->b.data(), static_cast<int>(conv->b.size()), 1, false});
        } else if (auto* up = std::get_if<UnpoolParams>(&lp)) {
            blocks.push_back({prefix + "k0", up->k0.data(), static_cast<int>(up->k0.size()), 1, true});
            blocks.push_back({prefix + "k1", up->k1.data(), static_cast<int>(up->k1.size()), 1, true});
            blocks.push_back({prefix + "b", up->b.data(), static_cast<int>(up->b.size()), 1, false});
        }
    }
    return blocks;
}

long long model_parameter_count(const ModelParams& params) {
    long long total = 0;
    std::vector<ParamBlockRef> blocks = param_blocks(const_cast<ModelParams&>(params));
    for (const ParamBlockRef& b : blocks) total += static_cast<long long>(b.size());
    return total;
}

ModelParams zero_like(const ModelParams& params) {
    ModelParams out = params;
    for (ParamBlockRef& b : param_blocks(out)) std::fill(b.data, b.data + b.size(), 0.0);
    return out;
}

ModelParams params_for_spec(const ModelSpec& spec) {
    spec.validate();
    ModelParams params;
    int width = spec.input_dim;
    for (const LayerDesc& d : spec.layers) {
        switch (d.kind) {
        case LayerKind::Lin: {
            LinearParams lin;
            lin.W = Matrix(d.width, width);
            lin.b.assign(d.width, 0.0);
            params.layers.emplace_back(std::move(lin));
            break;
        }
        case LayerKind::FeaStConv: {
            FeastConvParams conv;
            conv.translation_invariant = d.translation_invariant;
            conv.W.assign(d.num_matrices, Matrix(d.width, width));
            conv.u = Matrix(d.num_matrices, width);
            conv.v = d.translation_invariant ? Matrix(0, 0) : Matrix(d.num_matrices, width);
            conv.c.assign(d.num_matrices, 0.0);
            conv.b.assign(d.width, 0.0);
            params.layers.emplace_back(std::move(conv));
            break;
        }
        case LayerKind::Unpool: {
            UnpoolParams up;
            up.k0.assign(d.width, 0.0);
            up.k1.assign(d.width, 0.0);
            up.b.assign(d.width, 0.0);
            params.layers.emplace_back(std::move(up));
            break;
        }
        default:
            params.layers.emplace_back(std::monostate{});
            break;
        }
        width = d.width;
    }
    return params;
}

void accumulate_params(ModelParams& into, const ModelParams& add) {
    std::vector<ParamBlockRef> dst = param_blocks(into);
    std::vector<ParamBlockRef> src = param_blocks(const_cast<ModelParams&>(add));
    if (dst.size() != src.size()) throw ShapeError("parameter accumulate: block count mismatch");
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (dst[k].size() != src[k].size())
            throw ShapeError("parameter accumulate: block " + dst[k].name + " shape mismatch");
        for (std::size_t t = 0; t < dst[k].size(); ++t) dst[k].data[t] += src[k].data[t];
    }
}

namespace {

int scaled_width(int base, double scale) {
    return std::max(1, static_cast<int>(std::ceil(base * scale)));
}

LinearParams init_linear_params(int out_dim, int in_dim, std::uint64_t seed) {
    Rng rng(seed);
    LinearParams p;
    p.W = Matrix(out_dim, in_dim);
    const double stddev = std::sqrt(2.0 / in_dim);
    for (double& x : p.W.data()) x = rng.normal(0.0, stddev);
    p.b.assign(out_dim, 0.0);
    return p;
}

// Builder assembling layers one by one while tracking the running width.
struct ModelAssembler {
    ModelSpec spec;
    ModelParams params;
    std::uint64_t seed;
    int width;
    int level = 0;

    ModelAssembler(int input_dim, int num_classes, std::uint64_t seed_)
        : seed(seed_), width(input_dim) {
        spec.input_dim = input_dim;
        spec.num_classes = num_classes;
    }

    std::uint64_t layer_seed() const { return derive_seed(seed, spec.layers.size()); }

    LayerDesc& append(LayerKind kind, int out_width, LayerParams block) {
        params.layers.push_back(std::move(block));
        LayerDesc d;
        d.kind = kind;
        d.width = out_width;
        spec.layers.push_back(std::move(d));
        width = out_width;
        return spec.layers.back();
    }

    void lin(int out) { append(LayerKind::Lin, out, init_linear_params(out, width, layer_seed())); }

    void conv(int out, int M, bool ti) {
        LayerParams block = init_feast_params(M, width, out, layer_seed(), ti);
        LayerDesc& d = append(LayerKind::FeaStConv, out, std::move(block));
        d.num_matrices = M;
        d.translation_invariant = ti;
        d.level = level;
    }

    void relu() { append(LayerKind::ReLU, width, std::monostate{}); }

    void pool() {
        append(LayerKind::Pool, width, std::monostate{}).level = level;
        ++level;
    }

    void unpool() {
        append(LayerKind::Unpool, width, init_unpool_params(width)).level = level;
        --level;
    }

    void skip(int source_layer) {
        const int out = width + spec.layers[source_layer].width;
        append(LayerKind::SkipConcat, out, std::monostate{}).source_layer = source_layer;
    }

    void global_max(std::vector<int> sources) {
        int total = spec.layers[sources.back()].width;
        for (int s : sources) total += spec.layers[s].width;
        append(LayerKind::GlobalMaxConcat, total, std::monostate{}).sources = std::move(sources);
    }

    BuiltModel finish() {
        spec.validate();
        return {std::move(spec), std::move(params)};
    }
};

} // namespace

BuiltModel build_single_scale(int input_dim, int num_classes, int num_matrices,
                              double width_scale, bool translation_invariant,
                              std::uint64_t seed) {
    if (width_scale <= 0.0) throw ValueError("build_single_scale: width_scale must be > 0");
    ModelAssembler a(input_dim, num_classes, seed);
    a.lin(scaled_width(16, width_scale));
    a.relu();
    for (int base : {32, 64, 128}) {
        a.conv(scaled_width(base, width_scale), num_matrices, translation_invariant);
        a.relu();
    }
    a.lin(scaled_width(256, width_scale));
    a.relu();
    a.lin(num_classes);
    return a.finish();
}

BuiltModel build_multi_scale(int input_dim, int num_classes, int num_matrices,
                             const CoarseningHierarchy& hierarchy, bool translation_invariant,
                             std::uint64_t seed) {
    if (hierarchy.num_levels() < 2)
        throw ValueError("build_multi_scale: hierarchy with at least 2 levels required");
    ModelAssembler a(input_dim, num_classes, seed);
    a.lin(16);
    a.relu();
    a.conv(32, num_matrices, translation_invariant);
    a.relu();
    const int skip0 = static_cast<int>(a.spec.layers.size()) - 1;
    a.pool();
    a.conv(64, num_matrices, translation_invariant);
    a.relu();
    const int skip1 = static_cast<int>(a.spec.layers.size()) - 1;
    a.pool();
    a.conv(128, num_matrices, translation_invariant);
    a.relu();
    a.unpool();
    a.skip(skip1);
    a.conv(64, num_matrices, translation_invariant);
    a.relu();
    a.unpool();
    a.skip(skip0);
    a.conv(32, num_matrices, translation_invariant);
    a.relu();
    a.lin(256);
    a.relu();
    a.lin(num_classes);
    return a.finish();
}

BuiltModel build_part_labeler(int input_dim, int num_classes, int num_matrices,
                              bool translation_invariant, std::uint64_t seed) {
    ModelAssembler a(input_dim, num_classes, seed);
    std::vector<int> trunk;
    a.lin(16);
    a.relu();
    trunk.push_back(static_cast<int>(a.spec.layers.size()) - 1);
    for (int base : {32, 64, 128}) {
        a.conv(base, num_matrices, translation_invariant);
        a.relu();
        trunk.push_back(static_cast<int>(a.spec.layers.size()) - 1);
    }
    for (int base : {512, 2048}) {
        a.lin(base);
        a.relu();
        trunk.push_back(static_cast<int>(a.spec.layers.size()) - 1);
    }
    a.global_max(std::move(trunk));
    a.lin(1024);
    a.relu();
    a.lin(num_classes);
    return a.finish();
}

namespace {

void check_params_align(const ModelSpec& spec, const ModelParams& params) {
    if (params.layers.size() != spec.layers.size())
        throw ShapeError("model params: layer count mismatch");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerKind kind = spec.layers[i].kind;
        const LayerParams& lp = params.layers[i];
        bool ok = true;
        switch (kind) {
        case LayerKind::Lin: ok = std::holds_alternative<LinearParams>(lp); break;
        case LayerKind::FeaStConv: ok = std::holds_alternative<FeastConvParams>(lp); break;
        case LayerKind::Unpool: ok = std::holds_alternative<UnpoolParams>(lp); break;
        default: ok = std::holds_alternative<std::monostate>(lp); break;
        }
        if (!ok)
            throw ShapeError("model params: layer " + std::to_string(i) +
                             " block does not match its spec kind");
    }
}

const Graph& graph_at(const ModelSpec&, const Graph& graph, const CoarseningHierarchy* hierarchy,
                      int level) {
    if (!hierarchy) return graph;
    return hierarchy->padded_graphs[level];
}

Matrix softmax_rows(const Matrix& X) {
    Matrix Y = X;
    for (int i = 0; i < Y.rows(); ++i) {
        auto row = Y.row(i);
        double mx = row[0];
        for (double x : row) mx = std::max(mx, x);
        double sum = 0.0;
        for (double& x : row) {
            x = std::exp(x - mx);
            sum += x;
        }
        for (double& x : row) x /= sum;
    }
    return Y;
}

void add_into(Matrix& acc, const Matrix& g) {
    if (acc.rows() == 0) {
        acc = g;
        return;
    }
    require_shape(g, acc.rows(), acc.cols(), "gradient accumulate");
    auto& a = acc.data();
    const auto& b = g.data();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
}

} // namespace

ModelForwardResult model_forward(const ModelSpec& spec, const ModelParams& params,
                                 const Matrix& X, const Graph& graph,
                                 const CoarseningHierarchy* hierarchy) {
    spec.validate();
    check_params_align(spec, params);
    require_cols(X, spec.input_dim, "model input");
    if (spec.uses_hierarchy() && !hierarchy)
        throw ValueError("model has pool/unpool layers but no hierarchy was given");
    if (hierarchy) {
        if (X.rows() != hierarchy->real_count(0))
            throw ShapeError("model input rows do not match hierarchy level 0");
    } else if (X.rows() != graph.n) {
        throw ShapeError("model input rows do not match graph node count");
    }

    ModelForwardResult res;
    ModelCache& cache = res.cache;
    cache.input0 = hierarchy ? reorder_features(X, hierarchy->orderings[0]) : X;
    cache.outputs.resize(spec.layers.size());
    cache.argmax.resize(spec.layers.size());

    const Matrix* current = &cache.input0;
    int level = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& d = spec.layers[i];
        Matrix out;
        switch (d.kind) {
        case LayerKind::Lin:
            out = linear_forward(std::get<LinearParams>(params.layers[i]), *current);
            break;
        case LayerKind::FeaStConv:
            out = feast_forward(std::get<FeastConvParams>(params.layers[i]), *current,
                                graph_at(spec, graph, hierarchy, d.level));
            break;
        case LayerKind::ReLU:
            out = relu_forward(*current);
            break;
        case LayerKind::Pool: {
            PoolResult pr = max_pool(*current, hierarchy->pool_map(level));
            out = std::move(pr.out);
            cache.argmax[i] = std::move(pr.argmax);
            ++level;
            break;
        }
        case LayerKind::Unpool:
            out = unpool(*current, std::get<UnpoolParams>(params.layers[i]),
                         hierarchy->pool_map(level - 1));
            --level;
            break;
        case LayerKind::SkipConcat: {
            const Matrix& src = cache.outputs[d.source_layer];
            if (src.rows() != current->rows())
                throw ShapeError("skip concat: row count mismatch");
            out = Matrix(current->rows(), current->cols() + src.cols());
            for (int r = 0; r < out.rows(); ++r) {
                auto dst = out.row(r);
                const auto a = current->row(r);
                const auto b = src.row(r);
                std::copy(a.begin(), a.end(), dst.begin());
                std::copy(b.begin(), b.end(), dst.begin() + a.size());
            }
            break;
        }
        case LayerKind::GlobalMaxConcat: {
            std::vector<const Matrix*> inputs;
            for (int s : d.sources) inputs.push_back(&cache.outputs[s]);
            GlobalMaxConcatResult gr = global_max_concat(inputs);
            out = std::move(gr.out);
            cache.argmax[i] = std::move(gr.argmax);
            break;
        }
        case LayerKind::Softmax:
            out = softmax_rows(*current);
            break;
        }
        cache.outputs[i] = std::move(out);
        current = &cache.outputs[i];
    }

    res.logits = hierarchy ? restore_features(*current, hierarchy->orderings[0]) : *current;
    return res;
}

ModelGrads model_backward(const ModelSpec& spec, const ModelParams& params,
                          const ModelCache& cache, const Graph& graph,
                          const CoarseningHierarchy* hierarchy, const Matrix& dLogits) {
    spec.validate();
    check_params_align(spec, params);
    if (cache.outputs.size() != spec.layers.size())
        throw ShapeError("model backward: cache does not match spec");

    const std::size_t L = spec.layers.size();
    std::vector<int> level_in(L, 0);
    int level = 0;
    for (std::size_t i = 0; i < L; ++i) {
        level_in[i] = level;
        if (spec.layers[i].kind == LayerKind::Pool) ++level;
        if (spec.layers[i].kind == LayerKind::Unpool) --level;
    }

    ModelGrads grads;
    grads.params = zero_like(params);
    std::vector<Matrix> dOut(L);
    Matrix dInput0(cache.input0.rows(), cache.input0.cols());
    dOut[L - 1] = hierarchy ? reorder_features(dLogits, hierarchy->orderings[0]) : dLogits;
    require_shape(dOut[L - 1], cache.outputs[L - 1].rows(), cache.outputs[L - 1].cols(),
                  "model dLogits");

    auto add_to_prev = [&](std::size_t i, const Matrix& g) {
        if (i == 0)
            add_into(dInput0, g);
        else
            add_into(dOut[i - 1], g);
    };

    for (std::size_t ii = L; ii-- > 0;) {
        const LayerDesc& d = spec.layers[ii];
        const Matrix& input = ii == 0 ? cache.input0 : cache.outputs[ii - 1];
        Matrix& g = dOut[ii];
        if (g.rows() == 0) g = Matrix(cache.outputs[ii].rows(), cache.outputs[ii].cols());

        switch (d.kind) {
        case LayerKind::Lin: {
            LinearGrads lg = linear_backward(std::get<LinearParams>(params.layers[ii]), input, g);
            auto& block = std::get<LinearParams>(grads.params.layers[ii]);
            block.W = std::move(lg.dW);
            block.b = std::move(lg.db);
            add_to_prev(ii, lg.dX);
            break;
        }
        case LayerKind::FeaStConv: {
            const auto& p = std::get<FeastConvParams>(params.layers[ii]);
            FeastConvGrads cg =
                feast_backward(p, input, graph_at(spec, graph, hierarchy, d.level), g);
            auto& block = std::get<FeastConvParams>(grads.params.layers[ii]);
            block.W = std::move(cg.dW);
            block.u = std::move(cg.du);
            block.v = std::move(cg.dv);
            block.c = std::move(cg.dc);
            block.b = std::move(cg.db);
            add_to_prev(ii, cg.dX);
            break;
        }
        case LayerKind::ReLU:
            add_to_prev(ii, relu_backward(input, g));
            break;
        case LayerKind::Pool:
            add_to_prev(ii, max_pool_backward(cache.argmax[ii],
                                              hierarchy->pool_map(level_in[ii]), input.cols(), g));
            break;
        case LayerKind::Unpool: {
            UnpoolGrads ug = unpool_backward(input, std::get<UnpoolParams>(params.layers[ii]),
                                             hierarchy->pool_map(level_in[ii] - 1), g);
            auto& block = std::get<UnpoolParams>(grads.params.layers[ii]);
            block.k0 = std::move(ug.dk0);
            block.k1 = std::move(ug.dk1);
            block.b = std::move(ug.db);
            add_to_prev(ii, ug.dXc);
            break;
        }
        case LayerKind::SkipConcat: {
            const int w_in = input.cols();
            const Matrix& src = cache.outputs[d.source_layer];
            Matrix d_in(input.rows(), w_in);
            Matrix d_src(src.rows(), src.cols());
            for (int r = 0; r < input.rows(); ++r) {
                const auto gr = g.row(r);
                auto a = d_in.row(r);
                auto b = d_src.row(r);
                std::copy(gr.begin(), gr.begin() + w_in, a.begin());
                std::copy(gr.begin() + w_in, gr.end(), b.begin());
            }
            add_to_prev(ii, d_in);
            add_into(dOut[d.source_layer], d_src);
            break;
        }
        case LayerKind::GlobalMaxConcat: {
            std::vector<const Matrix*> inputs;
            for (int s : d.sources) inputs.push_back(&cache.outputs[s]);
            std::vector<Matrix> source_grads =
                global_max_concat_backward(inputs, cache.argmax[ii], g);
            for (std::size_t k = 0; k < d.sources.size(); ++k)
                add_into(dOut[d.sources[k]], source_grads[k]);
            break;
        }
        case LayerKind::Softmax:
            throw ValueError("softmax layer has no backward; compute the loss on logits");
        }
    }

    grads.dX = hierarchy ? restore_features(dInput0, hierarchy->orderings[0]) : std::move(dInput0);
    return grads;
}

} // namespace feast
