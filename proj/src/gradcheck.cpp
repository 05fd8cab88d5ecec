#include "feast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>

#include "feast/coarsening.hpp"
#include "feast/feast_conv.hpp"
#include "feast/layers.hpp"
#include "feast/model.hpp"
#include "feast/rng.hpp"

namespace feast {
namespace {

// One checked parameter array together with its analytic gradient.
struct BlockView {
    double* theta = nullptr;
    double* analytic = nullptr;
    std::size_t size = 0;
};

void push_block(std::vector<BlockView>& blocks, Matrix& theta, Matrix& grad) {
    blocks.push_back({theta.data().data(), grad.data().data(), theta.data().size()});
}

void push_block(std::vector<BlockView>& blocks, std::vector<double>& theta,
                std::vector<double>& grad) {
    blocks.push_back({theta.data(), grad.data(), theta.size()});
}

// Central differences with h = 1e-6 max(1, |theta|), compared as
// |a - n| / max(1, |a|, |n|). `corrupt` breaks the first analytic entry so
// failure reporting stays honest.
double fd_worst(std::vector<BlockView>& blocks, const std::function<double()>& loss,
                bool corrupt) {
    if (corrupt && !blocks.empty() && blocks[0].size > 0) blocks[0].analytic[0] += 1e-2;
    double worst = 0.0;
    for (const BlockView& blk : blocks) {
        for (std::size_t k = 0; k < blk.size; ++k) {
            const double saved = blk.theta[k];
            const double h = 1e-6 * std::max(1.0, std::abs(saved));
            blk.theta[k] = saved + h;
            const double lp = loss();
            blk.theta[k] = saved - h;
            const double lm = loss();
            blk.theta[k] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double rel = std::abs(blk.analytic[k] - numeric) /
                               std::max({1.0, std::abs(blk.analytic[k]), std::abs(numeric)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

double sum_product(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

Graph random_connected_graph(Rng& rng, int n) {
    Graph g = Graph::with_nodes(n);
    for (int i = 1; i < n; ++i)
        g.add_edge(i, static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i))),
                   1.0 + rng.uniform());
    for (int e = 0; e < n / 2; ++e) {
        const int i = static_cast<int>(rng.uniform_below(n));
        const int j = static_cast<int>(rng.uniform_below(n));
        if (i != j) g.add_edge(i, j, 1.0 + rng.uniform());
    }
    return g;
}

double conv_trial(Rng& rng, bool corrupt, bool ti) {
    const int n = 4 + static_cast<int>(rng.uniform_below(8));
    const int D = 1 + static_cast<int>(rng.uniform_below(4));
    const int E = 1 + static_cast<int>(rng.uniform_below(4));
    const int M = 1 + static_cast<int>(rng.uniform_below(3));
    const Graph g = random_connected_graph(rng, n);
    Matrix X = random_matrix(rng, n, D);
    FeastConvParams p = init_feast_params(M, D, E, rng.next_u64(), ti);
    for (double& v : p.c) v = 0.3 * rng.normal();
    for (double& v : p.b) v = 0.3 * rng.normal();
    const Matrix R = random_matrix(rng, n, E);

    FeastConvGrads gr = feast_backward(p, X, g, R);
    std::vector<BlockView> blocks;
    push_block(blocks, X, gr.dX);
    for (int m = 0; m < M; ++m) push_block(blocks, p.W[m], gr.dW[m]);
    push_block(blocks, p.u, gr.du);
    if (!ti) push_block(blocks, p.v, gr.dv);
    push_block(blocks, p.c, gr.dc);
    push_block(blocks, p.b, gr.db);

    const auto loss = [&]() { return sum_product(feast_forward(p, X, g), R); };
    return fd_worst(blocks, loss, corrupt);
}

double linear_trial(Rng& rng, bool corrupt) {
    const int n = 3 + static_cast<int>(rng.uniform_below(6));
    const int D = 1 + static_cast<int>(rng.uniform_below(4));
    const int E = 1 + static_cast<int>(rng.uniform_below(4));
    Matrix X = random_matrix(rng, n, D);
    LinearParams p;
    p.W = random_matrix(rng, E, D);
    p.b.resize(static_cast<std::size_t>(E));
    for (double& v : p.b) v = 0.3 * rng.normal();
    const Matrix R = random_matrix(rng, n, E);

    LinearGrads gr = linear_backward(p, X, R);
    std::vector<BlockView> blocks;
    push_block(blocks, X, gr.dX);
    push_block(blocks, p.W, gr.dW);
    push_block(blocks, p.b, gr.db);

    const auto loss = [&]() { return sum_product(linear_forward(p, X), R); };
    return fd_worst(blocks, loss, corrupt);
}

double relu_trial(Rng& rng, bool corrupt) {
    const int n = 3 + static_cast<int>(rng.uniform_below(6));
    const int D = 1 + static_cast<int>(rng.uniform_below(4));
    // Keep every activation away from the kink at 0.
    Matrix X(n, D);
    for (double& v : X.data()) {
        const double mag = 0.2 + rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    const Matrix R = random_matrix(rng, n, D);

    Matrix dX = relu_backward(X, R);
    std::vector<BlockView> blocks;
    push_block(blocks, X, dX);

    const auto loss = [&]() { return sum_product(relu_forward(X), R); };
    return fd_worst(blocks, loss, corrupt);
}

double cross_entropy_trial(Rng& rng, bool corrupt, bool masked) {
    const int n = 3 + static_cast<int>(rng.uniform_below(5));
    const int C = 4 + static_cast<int>(rng.uniform_below(3));
    Matrix logits = random_matrix(rng, n, C);
    std::vector<int> valid;
    if (masked) {
        const int dropped = static_cast<int>(rng.uniform_below(C));
        for (int c = 0; c < C; ++c)
            if (c != dropped) valid.push_back(c);
    }
    std::vector<int> targets(static_cast<std::size_t>(n));
    for (int& t : targets) {
        t = masked ? valid[rng.uniform_below(valid.size())]
                   : static_cast<int>(rng.uniform_below(C));
    }

    SoftmaxLoss base = softmax_cross_entropy(logits, targets, valid);
    std::vector<BlockView> blocks;
    push_block(blocks, logits, base.dLogits);

    const auto loss = [&]() { return softmax_cross_entropy(logits, targets, valid).loss; };
    return fd_worst(blocks, loss, corrupt);
}

double pool_trial(Rng& rng, bool corrupt) {
    const int n = 6 + static_cast<int>(rng.uniform_below(7));
    const CoarseningHierarchy h = build_hierarchy(random_connected_graph(rng, n), 1);
    const PoolMap pm = h.pool_map(0);
    const int ch = 1 + static_cast<int>(rng.uniform_below(3));
    Matrix X = random_matrix(rng, pm.num_fine(), ch);
    const Matrix R = random_matrix(rng, pm.num_coarse, ch);

    const PoolResult base = max_pool(X, pm);
    Matrix dX = max_pool_backward(base.argmax, pm, ch, R);
    std::vector<BlockView> blocks;
    push_block(blocks, X, dX);

    const auto loss = [&]() { return sum_product(max_pool(X, pm).out, R); };
    return fd_worst(blocks, loss, corrupt);
}

double unpool_trial(Rng& rng, bool corrupt) {
    const int n = 9 + static_cast<int>(rng.uniform_below(5));
    const CoarseningHierarchy h = build_hierarchy(random_connected_graph(rng, n), 2);
    const PoolMap pm = h.pool_map(1);
    const int ch = 1 + static_cast<int>(rng.uniform_below(3));
    Matrix Xc = random_matrix(rng, pm.num_coarse, ch);
    UnpoolParams up = init_unpool_params(ch);
    for (double& v : up.k0) v = rng.normal();
    for (double& v : up.k1) v = rng.normal();
    for (double& v : up.b) v = 0.3 * rng.normal();
    const Matrix R = random_matrix(rng, pm.num_fine(), ch);

    UnpoolGrads gr = unpool_backward(Xc, up, pm, R);
    std::vector<BlockView> blocks;
    push_block(blocks, Xc, gr.dXc);
    push_block(blocks, up.k0, gr.dk0);
    push_block(blocks, up.k1, gr.dk1);
    push_block(blocks, up.b, gr.db);

    const auto loss = [&]() { return sum_product(unpool(Xc, up, pm), R); };
    return fd_worst(blocks, loss, corrupt);
}

LayerDesc lay(LayerKind kind, int width, int level = 0) {
    LayerDesc d;
    d.kind = kind;
    d.width = width;
    d.level = level;
    return d;
}

LayerDesc conv_lay(int width, int num_matrices, bool ti, int level = 0) {
    LayerDesc d = lay(LayerKind::FeaStConv, width, level);
    d.num_matrices = num_matrices;
    d.translation_invariant = ti;
    return d;
}

void randomize_params(ModelParams& params, Rng& rng) {
    for (const ParamBlockRef& blk : param_blocks(params))
        for (std::size_t k = 0; k < blk.size(); ++k) blk.data[k] = 0.6 * rng.normal();
}

double run_model_check(const ModelSpec& spec, ModelParams& params, Matrix& X, const Graph& g,
                       const CoarseningHierarchy* h, const std::vector<int>& targets,
                       bool corrupt) {
    const ModelForwardResult base = model_forward(spec, params, X, g, h);
    const SoftmaxLoss sl = softmax_cross_entropy(base.logits, targets);
    ModelGrads mg = model_backward(spec, params, base.cache, g, h, sl.dLogits);

    std::vector<BlockView> blocks;
    push_block(blocks, X, mg.dX);
    const std::vector<ParamBlockRef> pb = param_blocks(params);
    const std::vector<ParamBlockRef> gb = param_blocks(mg.params);
    for (std::size_t k = 0; k < pb.size(); ++k)
        blocks.push_back({pb[k].data, gb[k].data, pb[k].size()});

    const auto loss = [&]() {
        return softmax_cross_entropy(model_forward(spec, params, X, g, h).logits, targets).loss;
    };
    return fd_worst(blocks, loss, corrupt);
}

std::vector<int> random_targets(Rng& rng, int n, int num_classes) {
    std::vector<int> t(static_cast<std::size_t>(n));
    for (int& v : t) v = static_cast<int>(rng.uniform_below(num_classes));
    return t;
}

double flat_model_trial(Rng& rng, bool corrupt, bool ti) {
    const int n = 8 + static_cast<int>(rng.uniform_below(5));
    ModelSpec spec;
    spec.input_dim = 3;
    spec.num_classes = 3;
    spec.layers = {lay(LayerKind::Lin, 4), lay(LayerKind::ReLU, 4), conv_lay(3, 2, ti),
                   lay(LayerKind::ReLU, 3), lay(LayerKind::Lin, 3)};
    spec.validate();

    const Graph g = random_connected_graph(rng, n);
    Matrix X = random_matrix(rng, n, spec.input_dim);
    ModelParams params = params_for_spec(spec);
    randomize_params(params, rng);
    return run_model_check(spec, params, X, g, nullptr, random_targets(rng, n, 3), corrupt);
}

double pooled_model_trial(Rng& rng, bool corrupt, bool ti) {
    const int n = 9 + static_cast<int>(rng.uniform_below(4));
    ModelSpec spec;
    spec.input_dim = 2;
    spec.num_classes = 3;
    spec.layers = {lay(LayerKind::Lin, 2),
                   lay(LayerKind::ReLU, 2),
                   conv_lay(2, 2, ti, 0),
                   lay(LayerKind::ReLU, 2),
                   lay(LayerKind::Pool, 2, 0),
                   conv_lay(3, 2, ti, 1),
                   lay(LayerKind::ReLU, 3),
                   lay(LayerKind::Pool, 3, 1),
                   conv_lay(3, 2, ti, 2),
                   lay(LayerKind::ReLU, 3),
                   lay(LayerKind::Unpool, 3, 2),
                   lay(LayerKind::SkipConcat, 6),
                   conv_lay(2, 2, ti, 1),
                   lay(LayerKind::ReLU, 2),
                   lay(LayerKind::Unpool, 2, 1),
                   lay(LayerKind::SkipConcat, 4),
                   conv_lay(3, 2, ti, 0),
                   lay(LayerKind::ReLU, 3),
                   lay(LayerKind::Lin, 3)};
    spec.layers[11].source_layer = 6;
    spec.layers[15].source_layer = 3;
    spec.validate();

    const Graph g = random_connected_graph(rng, n);
    const CoarseningHierarchy h = build_hierarchy(g, 2);
    Matrix X = random_matrix(rng, n, spec.input_dim);
    ModelParams params = params_for_spec(spec);
    randomize_params(params, rng);
    return run_model_check(spec, params, X, g, &h, random_targets(rng, n, 3), corrupt);
}

double concat_model_trial(Rng& rng, bool corrupt, bool ti) {
    const int n = 8 + static_cast<int>(rng.uniform_below(5));
    ModelSpec spec;
    spec.input_dim = 3;
    spec.num_classes = 3;
    spec.layers = {lay(LayerKind::Lin, 2),       lay(LayerKind::ReLU, 2), conv_lay(3, 2, ti),
                   lay(LayerKind::ReLU, 3),      lay(LayerKind::GlobalMaxConcat, 8),
                   lay(LayerKind::Lin, 3)};
    spec.layers[4].sources = {1, 3};
    spec.validate();

    const Graph g = random_connected_graph(rng, n);
    Matrix X = random_matrix(rng, n, spec.input_dim);
    ModelParams params = params_for_spec(spec);
    randomize_params(params, rng);
    return run_model_check(spec, params, X, g, nullptr, random_targets(rng, n, 3), corrupt);
}

} // namespace

bool GradCheckReport::all_pass() const {
    for (const GradCheckResult& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

GradCheckReport run_gradient_checks(std::uint64_t seed, int trials, double tolerance,
                                    const std::string& corrupt_kind) {
    struct Suite {
        std::string kind;
        std::function<double(Rng&, bool)> run;
    };
    const std::vector<Suite> suites = {
        {"FeaStConv", [](Rng& r, bool c) { return conv_trial(r, c, false); }},
        {"FeaStConv[TI]", [](Rng& r, bool c) { return conv_trial(r, c, true); }},
        {"Linear", [](Rng& r, bool c) { return linear_trial(r, c); }},
        {"ReLU", [](Rng& r, bool c) { return relu_trial(r, c); }},
        {"CrossEntropy",
         [t = 0](Rng& r, bool c) mutable { return cross_entropy_trial(r, c, t++ % 2 == 1); }},
        {"Pool", [](Rng& r, bool c) { return pool_trial(r, c); }},
        {"Unpool", [](Rng& r, bool c) { return unpool_trial(r, c); }},
        {"Model", [t = 0](Rng& r, bool c) mutable { return flat_model_trial(r, c, t++ % 2 == 1); }},
        {"Model[pool]",
         [t = 0](Rng& r, bool c) mutable { return pooled_model_trial(r, c, t++ % 2 == 1); }},
        {"Model[concat]",
         [t = 0](Rng& r, bool c) mutable { return concat_model_trial(r, c, t++ % 2 == 1); }},
    };

    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t s = 0; s < suites.size(); ++s) {
        Rng rng(derive_seed(seed, s));
        auto run = suites[s].run;
        double worst = 0.0;
        for (int t = 0; t < trials; ++t) {
            const bool corrupt = t == 0 && corrupt_kind == suites[s].kind;
            worst = std::max(worst, run(rng, corrupt));
        }
        report.results.push_back({suites[s].kind, worst, worst <= tolerance});
    }
    return report;
}

} // namespace feast
