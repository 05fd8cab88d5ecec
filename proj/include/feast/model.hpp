#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "feast/coarsening.hpp"
#include "feast/feast_conv.hpp"
#include "feast/graph.hpp"
#include "feast/layers.hpp"
#include "feast/matrix.hpp"

namespace feast {

enum class LayerKind { Lin, FeaStConv, ReLU, Pool, Unpool, SkipConcat, GlobalMaxConcat, Softmax };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerDesc {
    LayerKind kind = LayerKind::Lin;
    int width = 0;                  // output channels
    int num_matrices = 0;           // FeaStConv
    bool translation_invariant = false;
    int level = 0;                  // hierarchy level the layer reads from
    int source_layer = -1;          // SkipConcat: earlier layer to concatenate
    std::vector<int> sources;       // GlobalMaxConcat: layers to concatenate
};

struct ModelSpec {
    int input_dim = 0;
    int num_classes = 0;
    std::vector<LayerDesc> layers;

    bool uses_hierarchy() const;
    // Checks width chaining, level bookkeeping, and per-kind fields. Throws.
    void validate() const;
};

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

// Parameter storage aligned with ModelSpec::layers; parameter-free layers
// hold monostate. The same structure carries gradients in backward results.
using LayerParams = std::variant<std::monostate, LinearParams, FeastConvParams, UnpoolParams>;

struct ModelParams {
    std::vector<LayerParams> layers;
};

// Flat view over every parameter array of a model, in a fixed order shared
// by gradients, the optimizer, and the checkpoint blob.
struct ParamBlockRef {
    std::string name; // e.g. "layer2.W0"
    double* data = nullptr;
    int rows = 0;
    int cols = 0;
    bool decay = true; // weight decay applies (off for biases and offsets)

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

std::vector<ParamBlockRef> param_blocks(ModelParams& params);

long long model_parameter_count(const ModelParams& params);

// Gradients mirror the parameter layout; zero-initialized via this helper.
ModelParams zero_like(const ModelParams& params);

// Zero-valued parameter blocks shaped for the spec (checkpoint loading).
ModelParams params_for_spec(const ModelSpec& spec);

void accumulate_params(ModelParams& into, const ModelParams& add);

struct BuiltModel {
    ModelSpec spec;
    ModelParams params;
};

// Lin16-Conv32-Conv64-Conv128-Lin256-LinC with a rectifier after every
// hidden layer. Hidden widths are multiplied by width_scale (rounded up).
BuiltModel build_single_scale(int input_dim, int num_classes, int num_matrices,
                              double width_scale, bool translation_invariant,
                              std::uint64_t seed);

// Two-level U-Net-style encoder/decoder over a coarsening hierarchy:
// Lin16-Conv32-Pool-Conv64-Pool-Conv128, then Unpool-SkipConcat-Conv64-
// Unpool-SkipConcat-Conv32-Lin256-LinC.
BuiltModel build_multi_scale(int input_dim, int num_classes, int num_matrices,
                             const CoarseningHierarchy& hierarchy, bool translation_invariant,
                             std::uint64_t seed);

// Lin16-Conv32-Conv64-Conv128-Lin512-Lin2048, then concatenation of every
// trunk output plus the broadcast global max, then Lin1024-LinC.
BuiltModel build_part_labeler(int input_dim, int num_classes, int num_matrices,
                              bool translation_invariant, std::uint64_t seed);

struct ModelCache {
    Matrix input0;                        // model input after any reordering
    std::vector<Matrix> outputs;          // one per layer
    std::vector<std::vector<int>> argmax; // Pool / GlobalMaxConcat routing
};

struct ModelForwardResult {
    Matrix logits; // rows in original node order
    ModelCache cache;
};

ModelForwardResult model_forward(const ModelSpec& spec, const ModelParams& params,
                                 const Matrix& X, const Graph& graph,
                                 const CoarseningHierarchy* hierarchy = nullptr);

struct ModelGrads {
    ModelParams params; // same block layout as the model's parameters
    Matrix dX;          // gradient w.r.t. the model input, original order
};

ModelGrads model_backward(const ModelSpec& spec, const ModelParams& params,
                          const ModelCache& cache, const Graph& graph,
                          const CoarseningHierarchy* hierarchy, const Matrix& dLogits);

} // namespace feast
