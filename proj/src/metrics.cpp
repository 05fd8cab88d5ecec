#include "feast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

#include "feast/errors.hpp"

namespace feast {

double correspondence_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& ground_truth) {
    if (predictions.size() != ground_truth.size())
        throw ShapeError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(ground_truth.size()) + " ground-truth entries");
    if (predictions.empty()) throw ValueError("accuracy: empty input");
    int hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == ground_truth[i];
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::string ErrorCurve::to_json() const {
    std::string out;
    for (const auto& [threshold, fraction] : points) {
        nlohmann::json j;
        j["threshold"] = threshold;
        j["fraction"] = fraction;
        out += j.dump();
        out += '\n';
    }
    return out;
}

ErrorCurve geodesic_error_curve(const std::vector<int>& predictions,
                                const std::vector<int>& ground_truth, const Mesh& reference,
                                const std::vector<double>& thresholds) {
    if (predictions.size() != ground_truth.size())
        throw ShapeError("geodesic curve: prediction/ground-truth length mismatch");
    if (predictions.empty()) throw ValueError("geodesic curve: empty input");
    const int nv = static_cast<int>(reference.vertices.size());
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] < 0 || predictions[i] >= nv || ground_truth[i] < 0 ||
            ground_truth[i] >= nv)
            throw ValueError("geodesic curve: vertex index out of range");

    // One shortest-path pass per distinct ground-truth vertex.
    std::map<int, std::vector<double>> dist_from;
    for (int gt : ground_truth) dist_from.emplace(gt, std::vector<double>{});
    bool connectivity_checked = false;
    for (auto& [source, dists] : dist_from) {
        dists = geodesic_distances(reference, source);
        if (!connectivity_checked) {
            for (double d : dists)
                if (!std::isfinite(d))
                    throw ValueError("geodesic curve: reference mesh is disconnected");
            connectivity_checked = true;
        }
    }

    std::vector<double> errors(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i)
        errors[i] = dist_from.at(ground_truth[i])[predictions[i]];

    std::vector<double> sorted_thresholds = thresholds;
    std::sort(sorted_thresholds.begin(), sorted_thresholds.end());
    ErrorCurve curve;
    for (double t : sorted_thresholds) {
        int within = 0;
        for (double e : errors) within += e <= t;
        curve.points.emplace_back(t, static_cast<double>(within) /
                                          static_cast<double>(errors.size()));
    }
    return curve;
}

MiouResult miou(const std::vector<int>& predictions, const std::vector<int>& ground_truth,
                const std::vector<int>& category_labels) {
    if (predictions.size() != ground_truth.size())
        throw ShapeError("miou: prediction/ground-truth length mismatch");
    if (predictions.empty()) throw ValueError("miou: empty input");
    if (category_labels.empty()) throw ValueError("miou: empty category label set");
    std::vector<char> in_category;
    for (int label : category_labels) {
        if (label < 0) throw ValueError("miou: negative part label");
        if (static_cast<std::size_t>(label) >= in_category.size())
            in_category.resize(label + 1, 0);
        in_category[label] = 1;
    }
    auto check = [&](int label) {
        if (label < 0 || static_cast<std::size_t>(label) >= in_category.size() ||
            !in_category[label])
            throw ValueError("miou: label " + std::to_string(label) +
                             " is outside the category's part set");
    };
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        check(predictions[i]);
        check(ground_truth[i]);
    }

    MiouResult res;
    for (int part : category_labels) {
        int inter = 0, uni = 0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            const bool in_pred = predictions[i] == part;
            const bool in_gt = ground_truth[i] == part;
            inter += in_pred && in_gt;
            uni += in_pred || in_gt;
        }
        res.per_part.push_back(uni == 0 ? 1.0 : static_cast<double>(inter) / uni);
    }
    double sum = 0.0;
    for (double v : res.per_part) sum += v;
    res.mean = sum / static_cast<double>(res.per_part.size());
    return res;
}

namespace {

double run_sweep_setting(const SweepTask& task, int num_matrices, const TrainConfig& cfg) {
    BuiltModel model = task.build(num_matrices, cfg.rng_seed);
    train(model.spec, model.params, task.train_set, cfg);
    const auto& eval_set = task.eval_set.empty() ? task.train_set : task.eval_set;
    return dataset_accuracy(model.spec, model.params, eval_set);
}

} // namespace

std::vector<SweepRow> sweep_matrix_counts(const SweepTask& task, const std::vector<int>& m_values,
                                          const TrainConfig& cfg) {
    if (m_values.empty()) throw ValueError("sweep: no settings");
    std::vector<SweepRow> rows;
    for (int m : m_values)
        rows.push_back({"M=" + std::to_string(m), run_sweep_setting(task, m, cfg)});
    return rows;
}

std::vector<SweepRow> sweep_noise_levels(const SweepTask& task, const std::vector<double>& levels,
                                         const TrainConfig& cfg) {
    if (levels.empty()) throw ValueError("sweep: no settings");
    std::vector<SweepRow> rows;
    for (double level : levels) {
        TrainConfig setting_cfg = cfg;
        setting_cfg.noise_levels = {level};
        std::ostringstream name;
        name << "noise=" << level;
        rows.push_back({name.str(), run_sweep_setting(task, task.default_num_matrices,
                                                      setting_cfg)});
    }
    return rows;
}

std::string sweep_table_json(const std::vector<SweepRow>& rows) {
    std::string out;
    for (const SweepRow& row : rows) {
        nlohmann::json j;
        j["setting"] = row.setting;
        j["metric"] = row.metric;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string sweep_table_text(const std::vector<SweepRow>& rows) {
    std::size_t width = 7; // "setting"
    for (const SweepRow& row : rows) width = std::max(width, row.setting.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "setting" << "  metric\n";
    for (const SweepRow& row : rows)
        out << std::left << std::setw(static_cast<int>(width)) << row.setting << "  "
            << std::setprecision(6) << std::fixed << row.metric << '\n';
    return out.str();
}

} // namespace feast
