#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "feast/coarsening.hpp"
#include "feast/graph.hpp"
#include "feast/matrix.hpp"
#include "feast/model.hpp"

namespace feast {

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 1e-4;
    int epochs = 100;
    std::uint64_t rng_seed = 0;
    std::vector<double> noise_levels; // empty = clean training
    int checkpoint_interval = 0;      // 0 = final checkpoint only

    void validate() const;
};

// Key-value lines ("epochs = 200"), '#' comments, unknown keys rejected.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);

// One graph with per-node features, targets, and optional trainer metadata.
struct TrainSample {
    Graph graph;
    std::shared_ptr<const CoarseningHierarchy> hierarchy; // required for pool models
    Matrix features;
    std::vector<int> targets;
    std::vector<double> noise_scale; // per-node noise magnitude; empty = 1.0
    std::vector<int> valid_classes;  // class mask for the loss; empty = all
};

// theta <- theta - lr (g + wd theta), weight decay skipped on non-decay
// blocks (biases and assignment offsets).
void sgd_step(ModelParams& params, const ModelParams& grads, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;      // 1-based
    double loss = 0.0;  // mean presentation loss during the epoch
    double accuracy = 0.0; // clean whole-dataset accuracy after the epoch
};

std::string epoch_record_json(const EpochRecord& rec);

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    // Fires every checkpoint_interval epochs with the post-epoch rng state.
    std::function<void(int epoch, const std::string& rng_state)> on_checkpoint;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::string rng_state; // after the final epoch, for the final checkpoint
};

// Runs epochs of shuffled single-sample SGD with optional feature-noise
// augmentation. Deterministic for a fixed seed; resume by passing the epoch
// counter and rng state of a checkpoint. Throws DivergenceError when the
// loss leaves the finite range.
TrainResult train(const ModelSpec& spec, ModelParams& params,
                  const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                  const TrainHooks& hooks = {}, int start_epoch = 0,
                  const std::string& rng_state = {});

// Per-row argmax restricted to valid classes (all when empty); ties break
// toward the lower class index.
std::vector<int> predict_labels(const Matrix& logits, const std::vector<int>& valid_classes = {});

// Mean over samples of the per-node exact-match fraction, on clean features.
double dataset_accuracy(const ModelSpec& spec, const ModelParams& params,
                        const std::vector<TrainSample>& dataset);

struct Checkpoint {
    int format_version = 1;
    int epoch = 0;
    std::string rng_state;
    ModelSpec spec;
    ModelParams params;
};

// Magic + JSON header + little-endian double blob; written atomically via a
// temp file. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace feast
