#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "feast/coarsening.hpp"
#include "feast/errors.hpp"
#include "feast/gradcheck.hpp"
#include "feast/graph.hpp"
#include "feast/mesh.hpp"
#include "feast/metrics.hpp"
#include "feast/model.hpp"
#include "feast/parallel.hpp"
#include "feast/pointcloud.hpp"
#include "feast/toy.hpp"
#include "feast/trainer.hpp"

namespace {

using namespace feast;

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ParseError(what + ": bad number '" + tok + "'");
        }
    }
    if (out.empty()) throw ParseError(what + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
    std::vector<int> out;
    for (double v : parse_double_list(csv, what)) {
        if (v != std::floor(v)) throw ParseError(what + ": expected integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

void print_kv(const std::string& key, const std::string& value) {
    std::cout << key << " = " << value << "\n";
}

void print_kv(const std::string& key, double value) {
    std::ostringstream os;
    os << value;
    print_kv(key, os.str());
}

void print_kv(const std::string& key, long long value) { print_kv(key, std::to_string(value)); }
void print_kv(const std::string& key, int value) { print_kv(key, std::to_string(value)); }

// ---------------------------------------------------------------------------
// Dataset loading shared by train, eval, and sweep.

struct DataOpts {
    std::string task = "toy";
    int subdivisions = 2;
    int deformed = 1;
    double deform_strength = 1.0;
    bool no_center = false;
    std::vector<std::string> meshes;
    std::vector<std::string> points_files;
    std::vector<std::string> labels_files;
    int classes = 50;
    int knn = 16;
    std::string category_labels_csv;
};

void add_data_flags(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--task", d.task, "dataset kind: toy, correspondence, partlabel")
        ->check(CLI::IsMember({"toy", "correspondence", "partlabel"}));
    cmd->add_option("--subdivisions", d.subdivisions, "icosphere subdivisions for the toy task");
    cmd->add_option("--deformed", d.deformed, "deformed toy copies next to the base sphere");
    cmd->add_option("--deform-strength", d.deform_strength, "toy deformation amplitude factor");
    cmd->add_flag("--no-center", d.no_center, "keep raw coordinates (skip centroid centering)");
    cmd->add_option("--mesh", d.meshes,
                    "OFF mesh for the correspondence task (repeatable; first is the reference)");
    cmd->add_option("--points", d.points_files, "point file for the partlabel task (repeatable)");
    cmd->add_option("--labels", d.labels_files, "label file matching --points (repeatable)");
    cmd->add_option("--classes", d.classes, "total part-label classes for the partlabel task");
    cmd->add_option("--knn", d.knn, "neighbors per point for point-cloud graphs");
    cmd->add_option("--category-labels", d.category_labels_csv,
                    "comma-separated labels belonging to the shape category");
}

std::vector<double> mean_edge_scale(const Graph& g, const std::vector<Vec3>& pts) {
    std::vector<double> s(static_cast<std::size_t>(g.n), 0.0);
    for (int i = 0; i < g.n; ++i) {
        double total = 0.0;
        int count = 0;
        for (int j : g.neighbors[i]) {
            if (j == i) continue;
            total += (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm();
            ++count;
        }
        if (count > 0) s[static_cast<std::size_t>(i)] = total / count;
    }
    return s;
}

struct LoadedData {
    std::vector<TrainSample> samples;
    int input_dim = 3;
    int num_classes = 0;
    std::vector<int> category_labels;
    Mesh reference;
    bool has_reference = false;
};

LoadedData load_dataset(const DataOpts& d, std::uint64_t seed, bool need_hierarchy,
                        int hierarchy_levels) {
    LoadedData data;
    if (d.task == "toy") {
        ToyOptions opt;
        opt.subdivisions = d.subdivisions;
        opt.num_deformed = d.deformed;
        opt.deform_strength = d.deform_strength;
        opt.center_features = !d.no_center;
        opt.seed = seed;
        data.samples = toy_correspondence_samples(opt);
        data.reference = toy_reference_mesh(opt);
        data.has_reference = true;
        data.num_classes = data.reference.num_vertices();
    } else if (d.task == "correspondence") {
        if (d.meshes.empty()) throw ValueError("correspondence task needs at least one --mesh");
        for (const std::string& path : d.meshes) {
            const Mesh mesh = load_off(path);
            if (!data.has_reference) {
                data.reference = mesh;
                data.has_reference = true;
                data.num_classes = mesh.num_vertices();
            } else if (mesh.num_vertices() != data.num_classes) {
                throw ValueError("mesh " + path + " has " +
                                 std::to_string(mesh.num_vertices()) + " vertices, expected " +
                                 std::to_string(data.num_classes));
            }
            data.samples.push_back(correspondence_sample(mesh, !d.no_center));
        }
    } else {
        if (d.points_files.empty()) throw ValueError("partlabel task needs --points/--labels");
        if (d.points_files.size() != d.labels_files.size())
            throw ValueError("--points and --labels counts differ");
        std::vector<int> seen_labels;
        for (std::size_t k = 0; k < d.points_files.size(); ++k) {
            const LabeledPointCloud cloud =
                load_labeled_points(d.points_files[k], d.labels_files[k]);
            TrainSample s;
            s.graph = knn_graph(cloud.points, d.knn);
            s.features = xyz_features(cloud, !d.no_center);
            s.targets = cloud.labels;
            s.noise_scale = mean_edge_scale(s.graph, cloud.points);
            for (int lbl : cloud.labels) {
                if (lbl < 0 || lbl >= d.classes)
                    throw ValueError("label " + std::to_string(lbl) + " outside --classes");
                seen_labels.push_back(lbl);
            }
            data.samples.push_back(std::move(s));
        }
        data.num_classes = d.classes;
        if (!d.category_labels_csv.empty()) {
            data.category_labels = parse_int_list(d.category_labels_csv, "--category-labels");
        } else {
            std::sort(seen_labels.begin(), seen_labels.end());
            seen_labels.erase(std::unique(seen_labels.begin(), seen_labels.end()),
                              seen_labels.end());
            data.category_labels = seen_labels;
        }
        for (TrainSample& s : data.samples) s.valid_classes = data.category_labels;
    }

    if (need_hierarchy) {
        for (TrainSample& s : data.samples)
            s.hierarchy = std::make_shared<CoarseningHierarchy>(
                build_hierarchy(s.graph, hierarchy_levels));
    }
    if (!data.samples.empty()) data.input_dim = data.samples[0].features.cols();
    return data;
}

void print_data_config(const DataOpts& d, const LoadedData& data) {
    print_kv("task", d.task);
    if (d.task == "toy") {
        print_kv("subdivisions", d.subdivisions);
        print_kv("deformed", d.deformed);
        print_kv("deform_strength", d.deform_strength);
    }
    if (d.task == "partlabel") {
        print_kv("classes", d.classes);
        print_kv("knn", d.knn);
        std::vector<double> cl(data.category_labels.begin(), data.category_labels.end());
        print_kv("category_labels", join_doubles(cl));
    }
    print_kv("center", d.no_center ? "false" : "true");
    print_kv("samples", static_cast<int>(data.samples.size()));
    print_kv("input_dim", data.input_dim);
    print_kv("num_classes", data.num_classes);
}

// ---------------------------------------------------------------------------
// Model construction shared by train and sweep.

struct ModelOpts {
    std::string arch = "single";
    int matrices = 8;
    double width_scale = 0.5;
    bool ti = true;
    int levels = 2;
};

void add_model_flags(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--arch", m.arch, "model family: single, multi, part")
        ->check(CLI::IsMember({"single", "multi", "part"}));
    cmd->add_option("--matrices", m.matrices, "weight matrices per convolution");
    cmd->add_option("--width-scale", m.width_scale, "hidden width multiplier (single arch)");
    cmd->add_flag("--ti,!--no-ti", m.ti, "translation-invariant assignments (default on)");
    cmd->add_option("--levels", m.levels, "pooling levels for --arch multi");
}

BuiltModel build_from_opts(const ModelOpts& m, int input_dim, int num_classes,
                           const CoarseningHierarchy* hierarchy, std::uint64_t seed,
                           int num_matrices) {
    if (m.arch == "single")
        return build_single_scale(input_dim, num_classes, num_matrices, m.width_scale, m.ti, seed);
    if (m.arch == "multi") {
        if (hierarchy == nullptr) throw ValueError("--arch multi needs a coarsening hierarchy");
        return build_multi_scale(input_dim, num_classes, num_matrices, *hierarchy, m.ti, seed);
    }
    return build_part_labeler(input_dim, num_classes, num_matrices, m.ti, seed);
}

void print_model_config(const ModelOpts& m, int num_matrices) {
    print_kv("arch", m.arch);
    print_kv("matrices", num_matrices);
    if (m.arch == "single") print_kv("width_scale", m.width_scale);
    if (m.arch == "multi") print_kv("levels", m.levels);
    print_kv("translation_invariant", m.ti ? "true" : "false");
}

// ---------------------------------------------------------------------------
// Train config assembly: optional file, then explicit flag overrides.

struct ConfigOpts {
    std::string config_path;
    double lr = 0.0;
    double wd = 0.0;
    int epochs = 0;
    std::uint64_t seed = 0;
    int interval = 0;
    std::string noise_csv;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* wd_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* interval_opt = nullptr;
    CLI::Option* noise_opt = nullptr;
};

void add_config_flags(CLI::App* cmd, ConfigOpts& c) {
    cmd->add_option("--config", c.config_path, "training config file (key = value lines)");
    c.lr_opt = cmd->add_option("--lr", c.lr, "learning rate");
    c.wd_opt = cmd->add_option("--weight-decay", c.wd, "weight decay");
    c.epochs_opt = cmd->add_option("--epochs", c.epochs, "training epochs");
    c.seed_opt = cmd->add_option("--seed", c.seed, "seed for init, shuffling, noise, and data");
    c.interval_opt = cmd->add_option("--checkpoint-interval", c.interval,
                                     "save every N epochs (0 = final only)");
    c.noise_opt = cmd->add_option("--noise-levels", c.noise_csv,
                                  "comma-separated noise sigmas for augmentation");
}

TrainConfig resolve_config(const ConfigOpts& c) {
    TrainConfig cfg;
    if (!c.config_path.empty()) cfg = load_train_config(c.config_path);
    if (c.lr_opt->count() > 0) cfg.learning_rate = c.lr;
    if (c.wd_opt->count() > 0) cfg.weight_decay = c.wd;
    if (c.epochs_opt->count() > 0) cfg.epochs = c.epochs;
    if (c.seed_opt->count() > 0) cfg.rng_seed = c.seed;
    if (c.interval_opt->count() > 0) cfg.checkpoint_interval = c.interval;
    if (c.noise_opt->count() > 0) cfg.noise_levels = parse_double_list(c.noise_csv, "--noise-levels");
    cfg.validate();
    return cfg;
}

void print_train_config(const TrainConfig& cfg) {
    print_kv("learning_rate", cfg.learning_rate);
    print_kv("weight_decay", cfg.weight_decay);
    print_kv("epochs", cfg.epochs);
    print_kv("seed", static_cast<long long>(cfg.rng_seed));
    print_kv("checkpoint_interval", cfg.checkpoint_interval);
    print_kv("noise_levels", cfg.noise_levels.empty() ? "none" : join_doubles(cfg.noise_levels));
    print_kv("threads", worker_count());
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
    std::uint64_t seed = 0;
    int trials = 10;
    double tolerance = 1e-5;
    std::string corrupt;
};

int run_gradcheck(const GradcheckOpts& o) {
    print_kv("seed", static_cast<long long>(o.seed));
    print_kv("trials", o.trials);
    print_kv("tolerance", o.tolerance);
    if (!o.corrupt.empty()) print_kv("corrupt", o.corrupt);

    const GradCheckReport report = run_gradient_checks(o.seed, o.trials, o.tolerance, o.corrupt);
    for (const GradCheckResult& r : report.results) {
        std::ostringstream line;
        line.setf(std::ios::scientific);
        line.precision(3);
        line << r.worst_rel_err;
        std::cout << (r.pass ? "ok   " : "FAIL ") << r.kind;
        for (std::size_t pad = r.kind.size(); pad < 16; ++pad) std::cout << ' ';
        std::cout << " worst " << line.str() << "\n";
    }
    std::cout << "gradient check: " << (report.all_pass() ? "PASS" : "FAIL") << "\n";
    return report.all_pass() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// coarsen

struct CoarsenOpts {
    std::string input;
    int levels = 1;
    std::string out;
};

// Node count on the first content line, then one edge per line as "i j" or
// "i j weight". '#' starts a comment.
Graph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const auto parse_num = [&](const std::string& tok) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw ParseError(path + ": bad number '" + tok + "'");
        }
    };
    const auto parse_index = [&](const std::string& tok) {
        const double v = parse_num(tok);
        if (v != std::floor(v)) throw ParseError(path + ": expected an integer, got '" + tok + "'");
        return static_cast<int>(v);
    };

    Graph g;
    bool have_count = false;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::stringstream ss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;

        if (!have_count) {
            if (tokens.size() != 1)
                throw ParseError(path + ": expected the node count alone on the first line");
            const int n = parse_index(tokens[0]);
            if (n < 1) throw ParseError(path + ": node count must be >= 1");
            g = Graph::with_nodes(n);
            have_count = true;
            continue;
        }
        if (tokens.size() != 2 && tokens.size() != 3)
            throw ParseError(path + ": line " + std::to_string(lineno) +
                             " expected 'i j' or 'i j weight'");
        const int i = parse_index(tokens[0]);
        const int j = parse_index(tokens[1]);
        const double w = tokens.size() == 3 ? parse_num(tokens[2]) : 1.0;
        if (i < 0 || i >= g.n || j < 0 || j >= g.n)
            throw ParseError(path + ": edge endpoint out of range");
        g.add_edge(i, j, w);
    }
    if (!have_count) throw ParseError(path + ": empty graph file");
    validate_graph(g);
    return g;
}

Graph load_graph_input(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw IoError("cannot open " + path);
    std::string first;
    probe >> first;
    probe.close();
    if (first == "OFF") return one_ring(load_off(path));
    return load_edge_list(path);
}

int run_coarsen(const CoarsenOpts& o) {
    print_kv("input", o.input);
    print_kv("levels", o.levels);
    const Graph g = load_graph_input(o.input);
    const CoarseningHierarchy h = build_hierarchy(g, o.levels);
    for (int level = 0; level <= h.num_levels(); ++level) {
        std::cout << "level " << level << ": " << h.real_count(level) << " nodes, "
                  << h.padded_count(level) << " padded\n";
    }
    const std::string doc = hierarchy_to_json(h);
    if (o.out.empty()) {
        std::cout << doc << "\n";
    } else {
        std::ofstream out(o.out);
        if (!out) throw IoError("cannot write " + o.out);
        out << doc << "\n";
        print_kv("out", o.out);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    DataOpts data;
    ModelOpts model;
    ConfigOpts config;
    std::string out = "model.ckpt";
    std::string log;
    std::string resume;
};

int run_train(const TrainOpts& o) {
    const TrainConfig cfg = resolve_config(o.config);
    const bool multi = o.model.arch == "multi";
    const LoadedData data =
        load_dataset(o.data, cfg.rng_seed, multi, o.model.levels);
    if (data.samples.empty()) throw ValueError("no training samples");

    ModelSpec spec;
    ModelParams params;
    int start_epoch = 0;
    std::string rng_state;
    if (!o.resume.empty()) {
        Checkpoint ckpt = load_checkpoint(o.resume);
        spec = std::move(ckpt.spec);
        params = std::move(ckpt.params);
        start_epoch = ckpt.epoch;
        rng_state = ckpt.rng_state;
    } else {
        BuiltModel built =
            build_from_opts(o.model, data.input_dim, data.num_classes,
                            data.samples[0].hierarchy.get(), cfg.rng_seed, o.model.matrices);
        spec = std::move(built.spec);
        params = std::move(built.params);
    }

    print_data_config(o.data, data);
    print_model_config(o.model, o.model.matrices);
    print_train_config(cfg);
    print_kv("parameters", model_parameter_count(params));
    print_kv("out", o.out);
    const std::string log_path = o.log.empty() ? o.out + ".log" : o.log;
    print_kv("log", log_path);
    if (!o.resume.empty()) {
        print_kv("resume", o.resume);
        print_kv("resume_epoch", start_epoch);
    }

    std::ofstream log(log_path, std::ios::app);
    if (!log) throw IoError("cannot write " + log_path);

    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord& rec) {
        const std::string line = epoch_record_json(rec);
        log << line << "\n";
        log.flush();
        std::cout << line << "\n";
    };
    hooks.on_checkpoint = [&](int epoch, const std::string& state) {
        Checkpoint ckpt{1, epoch, state, spec, params};
        save_checkpoint(o.out, ckpt);
    };

    const TrainResult result =
        train(spec, params, data.samples, cfg, hooks, start_epoch, rng_state);

    Checkpoint final{1, cfg.epochs, result.rng_state, spec, params};
    save_checkpoint(o.out, final);
    if (!result.history.empty())
        print_kv("final_accuracy", result.history.back().accuracy);
    print_kv("checkpoint", o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    DataOpts data;
    std::string checkpoint;
    std::string metric = "accuracy";
    std::string thresholds_csv = "0,0.05,0.1,0.15,0.2,0.25,0.3";
    std::string out;
};

int pool_level_count(const ModelSpec& spec) {
    int levels = 0;
    for (const LayerDesc& d : spec.layers)
        if (d.kind == LayerKind::Pool) ++levels;
    return levels;
}

int run_eval(const EvalOpts& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const LoadedData data = load_dataset(o.data, 0, ckpt.spec.uses_hierarchy(),
                                         pool_level_count(ckpt.spec));
    print_kv("checkpoint", o.checkpoint);
    print_kv("checkpoint_epoch", ckpt.epoch);
    print_kv("metric", o.metric);
    print_data_config(o.data, data);

    std::ofstream out;
    if (!o.out.empty()) {
        out.open(o.out);
        if (!out) throw IoError("cannot write " + o.out);
    }

    if (o.metric == "accuracy") {
        const double acc = dataset_accuracy(ckpt.spec, ckpt.params, data.samples);
        std::ostringstream val;
        val.precision(17);
        val << acc;
        std::cout << "accuracy = " << val.str() << "\n";
        if (out.is_open()) out << "{\"metric\":\"accuracy\",\"value\":" << val.str() << "}\n";
        return 0;
    }

    if (o.metric == "geodesic-curve") {
        if (!data.has_reference)
            throw ValueError("geodesic-curve needs a mesh-based task");
        std::vector<int> predictions;
        std::vector<int> ground_truth;
        for (const TrainSample& s : data.samples) {
            const ModelForwardResult fr =
                model_forward(ckpt.spec, ckpt.params, s.features, s.graph, s.hierarchy.get());
            const std::vector<int> pred = predict_labels(fr.logits, s.valid_classes);
            predictions.insert(predictions.end(), pred.begin(), pred.end());
            ground_truth.insert(ground_truth.end(), s.targets.begin(), s.targets.end());
        }
        const std::vector<double> thresholds =
            parse_double_list(o.thresholds_csv, "--thresholds");
        const ErrorCurve curve =
            geodesic_error_curve(predictions, ground_truth, data.reference, thresholds);
        for (const auto& [threshold, fraction] : curve.points)
            std::cout << "within " << threshold << ": " << fraction << "\n";
        if (out.is_open()) out << curve.to_json();
        return 0;
    }

    if (o.metric == "miou") {
        const std::vector<int>& labels =
            data.category_labels.empty()
                ? (data.samples.empty() ? std::vector<int>{} : data.samples[0].valid_classes)
                : data.category_labels;
        if (labels.empty()) throw ValueError("miou needs part labels (--task partlabel)");
        double total = 0.0;
        for (std::size_t k = 0; k < data.samples.size(); ++k) {
            const TrainSample& s = data.samples[k];
            const ModelForwardResult fr =
                model_forward(ckpt.spec, ckpt.params, s.features, s.graph, s.hierarchy.get());
            const MiouResult r = miou(predict_labels(fr.logits, s.valid_classes), s.targets, labels);
            total += r.mean;
            std::cout << "sample " << k << " mean_iou = " << r.mean << "\n";
            for (std::size_t p = 0; p < labels.size(); ++p)
                std::cout << "  part " << labels[p] << " iou = " << r.per_part[p] << "\n";
            if (out.is_open())
                out << "{\"sample\":" << k << ",\"mean_iou\":" << r.mean << "}\n";
        }
        const double mean = total / static_cast<double>(data.samples.size());
        std::cout << "mean_iou = " << mean << "\n";
        if (out.is_open()) out << "{\"mean_iou\":" << mean << "}\n";
        return 0;
    }

    throw ValueError("unknown metric: " + o.metric);
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
    DataOpts data;
    ModelOpts model;
    ConfigOpts config;
    std::string mode = "matrices";
    std::string values_csv;
    std::string out;
};

int run_sweep(const SweepOpts& o) {
    const TrainConfig cfg = resolve_config(o.config);
    const bool multi = o.model.arch == "multi";
    const LoadedData data = load_dataset(o.data, cfg.rng_seed, multi, o.model.levels);
    if (data.samples.empty()) throw ValueError("no sweep samples");

    print_kv("mode", o.mode);
    print_kv("values", o.values_csv);
    print_data_config(o.data, data);
    print_model_config(o.model, o.model.matrices);
    print_train_config(cfg);

    SweepTask task;
    task.train_set = data.samples;
    task.default_num_matrices = o.model.matrices;
    const ModelOpts model = o.model;
    const int input_dim = data.input_dim;
    const int num_classes = data.num_classes;
    const CoarseningHierarchy* hierarchy = data.samples[0].hierarchy.get();
    task.build = [model, input_dim, num_classes, hierarchy](int m, std::uint64_t seed) {
        return build_from_opts(model, input_dim, num_classes, hierarchy, seed, m);
    };

    std::vector<SweepRow> rows;
    if (o.mode == "matrices") {
        rows = sweep_matrix_counts(task, parse_int_list(o.values_csv, "--values"), cfg);
    } else if (o.mode == "noise") {
        rows = sweep_noise_levels(task, parse_double_list(o.values_csv, "--values"), cfg);
    } else {
        throw ValueError("unknown sweep mode: " + o.mode);
    }

    std::cout << sweep_table_text(rows);
    if (!o.out.empty()) {
        std::ofstream out(o.out);
        if (!out) throw IoError("cannot write " + o.out);
        out << sweep_table_json(rows);
        print_kv("out", o.out);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-steered graph convolution toolkit"};
    app.require_subcommand(1);

    GradcheckOpts gradcheck_opts;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "compare analytic gradients against finite differences");
    gradcheck_cmd->add_option("--seed", gradcheck_opts.seed, "base seed for the random trials");
    gradcheck_cmd->add_option("--trials", gradcheck_opts.trials, "random trials per suite")
        ->check(CLI::PositiveNumber);
    gradcheck_cmd->add_option("--tolerance", gradcheck_opts.tolerance,
                              "maximum relative error accepted");
    gradcheck_cmd->add_option("--corrupt", gradcheck_opts.corrupt,
                              "break the named suite's analytic gradient (self-test)");

    CoarsenOpts coarsen_opts;
    CLI::App* coarsen_cmd =
        app.add_subcommand("coarsen", "build a graph coarsening hierarchy and dump it as JSON");
    coarsen_cmd->add_option("input", coarsen_opts.input, "OFF mesh or edge-list graph file")
        ->required();
    coarsen_cmd->add_option("--levels", coarsen_opts.levels, "coarsening levels")
        ->check(CLI::PositiveNumber);
    coarsen_cmd->add_option("--out", coarsen_opts.out, "output JSON path (default: stdout)");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    add_data_flags(train_cmd, train_opts.data);
    add_model_flags(train_cmd, train_opts.model);
    add_config_flags(train_cmd, train_opts.config);
    train_cmd->add_option("--out", train_opts.out, "checkpoint path");
    train_cmd->add_option("--log", train_opts.log, "metrics log path (default: <out>.log)");
    train_cmd->add_option("--resume", train_opts.resume, "checkpoint to continue from");

    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_data_flags(eval_cmd, eval_opts.data);
    eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint to evaluate")
        ->required();
    eval_cmd->add_option("--metric", eval_opts.metric, "accuracy, geodesic-curve, or miou")
        ->check(CLI::IsMember({"accuracy", "geodesic-curve", "miou"}));
    eval_cmd->add_option("--thresholds", eval_opts.thresholds_csv,
                         "comma-separated thresholds for geodesic-curve");
    eval_cmd->add_option("--out", eval_opts.out, "write the metric as NDJSON");

    SweepOpts sweep_opts;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "train one model per setting and tabulate accuracy");
    add_data_flags(sweep_cmd, sweep_opts.data);
    add_model_flags(sweep_cmd, sweep_opts.model);
    add_config_flags(sweep_cmd, sweep_opts.config);
    sweep_cmd->add_option("--mode", sweep_opts.mode, "matrices or noise")
        ->check(CLI::IsMember({"matrices", "noise"}));
    sweep_cmd->add_option("--values", sweep_opts.values_csv, "comma-separated sweep values")
        ->required();
    sweep_cmd->add_option("--out", sweep_opts.out, "write the table as NDJSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gradcheck_cmd->parsed()) return run_gradcheck(gradcheck_opts);
        if (coarsen_cmd->parsed()) return run_coarsen(coarsen_opts);
        if (train_cmd->parsed()) return run_train(train_opts);
        if (eval_cmd->parsed()) return run_eval(eval_opts);
        if (sweep_cmd->parsed()) return run_sweep(sweep_opts);
    } catch (const feast::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
