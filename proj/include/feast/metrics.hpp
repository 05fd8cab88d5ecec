#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "feast/mesh.hpp"
#include "feast/model.hpp"
#include "feast/trainer.hpp"

namespace feast {

// Fraction of nodes whose predicted reference index is exactly right.
double correspondence_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& ground_truth);

// CDF of per-node geodesic error sampled at sorted thresholds.
struct ErrorCurve {
    std::vector<std::pair<double, double>> points; // (threshold, fraction within)

    std::string to_json() const;
};

ErrorCurve geodesic_error_curve(const std::vector<int>& predictions,
                                const std::vector<int>& ground_truth, const Mesh& reference,
                                const std::vector<double>& thresholds);

struct MiouResult {
    std::vector<double> per_part; // aligned with the category's label list
    double mean = 0.0;
};

// Intersection-over-union per part; a part absent from both the prediction
// and the ground truth counts as 1.
MiouResult miou(const std::vector<int>& predictions, const std::vector<int>& ground_truth,
                const std::vector<int>& category_labels);

// A sweepable training task: fresh model per setting, shared data and seed.
struct SweepTask {
    std::function<BuiltModel(int num_matrices, std::uint64_t seed)> build;
    std::vector<TrainSample> train_set;
    std::vector<TrainSample> eval_set; // empty = evaluate on the training set
    int default_num_matrices = 8;
};

struct SweepRow {
    std::string setting;
    double metric = 0.0;
};

std::vector<SweepRow> sweep_matrix_counts(const SweepTask& task, const std::vector<int>& m_values,
                                          const TrainConfig& cfg);

std::vector<SweepRow> sweep_noise_levels(const SweepTask& task, const std::vector<double>& levels,
                                         const TrainConfig& cfg);

// One JSON object per line.
std::string sweep_table_json(const std::vector<SweepRow>& rows);

// Aligned two-column table for terminals.
std::string sweep_table_text(const std::vector<SweepRow>& rows);

} // namespace feast
