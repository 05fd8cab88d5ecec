#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "feast/errors.hpp"
#include "feast/model.hpp"
#include "feast/rng.hpp"
#include "feast/toy.hpp"
#include "feast/trainer.hpp"

using namespace feast;

namespace {

ModelSpec one_lin_spec() {
    ModelSpec spec;
    spec.input_dim = 1;
    spec.num_classes = 1;
    LayerDesc lin;
    lin.kind = LayerKind::Lin;
    lin.width = 1;
    spec.layers.push_back(lin);
    return spec;
}

std::vector<TrainSample> sphere_task(int subdivisions) {
    ToyOptions opt;
    opt.subdivisions = subdivisions;
    opt.num_deformed = 1;
    return toy_correspondence_samples(opt);
}

BuiltModel sphere_model(int num_classes, std::uint64_t seed) {
    return build_single_scale(3, num_classes, 2, 0.25, false, seed);
}

bool params_equal(ModelParams& a, ModelParams& b) {
    auto ba = param_blocks(a);
    auto bb = param_blocks(b);
    if (ba.size() != bb.size()) return false;
    for (std::size_t k = 0; k < ba.size(); ++k) {
        if (ba[k].size() != bb[k].size()) return false;
        for (std::size_t t = 0; t < ba[k].size(); ++t)
            if (ba[k].data[t] != bb[k].data[t]) return false;
    }
    return true;
}

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("sgd applies weight decay to weights but not biases") {
    ModelSpec spec = one_lin_spec();
    ModelParams params = params_for_spec(spec);
    auto& lin = std::get<LinearParams>(params.layers[0]);
    lin.W(0, 0) = 1.0;
    lin.b[0] = 1.0;
    ModelParams grads = params;

    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 4.0;
    sgd_step(params, grads, cfg);
    CHECK(lin.W(0, 0) == 0.95);
    CHECK(lin.b[0] == 0.99);

    cfg.learning_rate = 0.0;
    ModelParams frozen = params;
    sgd_step(frozen, grads, cfg);
    CHECK(params_equal(frozen, params));
}

TEST_CASE("train config parsing handles comments and rejects unknown keys") {
    std::istringstream in(
        "# optimizer\n"
        "learning_rate = 0.1\n"
        "weight_decay = 0.0005  # decoupled scale\n"
        "\n"
        "epochs = 25\n"
        "seed = 7\n"
        "checkpoint_interval = 5\n"
        "noise_levels = 0.01, 0.02, 0.1\n");
    TrainConfig cfg = parse_train_config(in);
    CHECK(cfg.learning_rate == 0.1);
    CHECK(cfg.weight_decay == 0.0005);
    CHECK(cfg.epochs == 25);
    CHECK(cfg.rng_seed == 7);
    CHECK(cfg.checkpoint_interval == 5);
    CHECK(cfg.noise_levels == std::vector<double>{0.01, 0.02, 0.1});

    std::istringstream unknown("momentum = 0.9\n");
    CHECK_THROWS_AS(parse_train_config(unknown), ParseError);
    std::istringstream bad_number("epochs = soon\n");
    CHECK_THROWS_AS(parse_train_config(bad_number), ParseError);
    std::istringstream no_equals("epochs 12\n");
    CHECK_THROWS_AS(parse_train_config(no_equals), ParseError);
    std::istringstream negative("epochs = -3\n");
    CHECK_THROWS_AS(parse_train_config(negative), ValueError);
    std::istringstream empty("");
    CHECK(parse_train_config(empty).epochs == 100);
}

TEST_CASE("epoch records serialize to single-line JSON") {
    EpochRecord rec;
    rec.epoch = 3;
    rec.loss = 0.5;
    rec.accuracy = 0.25;
    CHECK(epoch_record_json(rec) == R"({"accuracy":0.25,"epoch":3,"loss":0.5})");
}

TEST_CASE("label prediction breaks ties low and honors the class mask") {
    Matrix logits(2, 3);
    logits(0, 0) = 0.3;
    logits(0, 1) = 0.7;
    logits(0, 2) = 0.1;
    logits(1, 0) = 0.5;
    logits(1, 1) = 0.5;
    logits(1, 2) = 0.2;
    CHECK(predict_labels(logits) == std::vector<int>{1, 0});

    Matrix masked(2, 3);
    masked(0, 0) = 5.0;
    masked(0, 1) = 9.0;
    masked(0, 2) = 1.0;
    masked(1, 0) = 1.0;
    masked(1, 1) = 9.0;
    masked(1, 2) = 3.0;
    CHECK(predict_labels(masked, {2, 0}) == std::vector<int>{0, 2});
    CHECK(predict_labels(masked, {0, 2, 2, 0}) == std::vector<int>{0, 2});
    CHECK_THROWS_AS(predict_labels(masked, {3}), ValueError);
    CHECK_THROWS_AS(predict_labels(masked, {-1}), ValueError);
}

TEST_CASE("an untrained model scores the all-zero-logit baseline") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 3);
    ModelParams zeros = params_for_spec(bm.spec);
    CHECK(dataset_accuracy(bm.spec, zeros, dataset) == 1.0 / 42.0);
}

TEST_CASE("training is deterministic and reduces the loss") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 5);
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.weight_decay = 0.0;
    cfg.epochs = 200;
    cfg.rng_seed = 5;

    ModelParams run1 = bm.params;
    TrainResult res1 = train(bm.spec, run1, dataset, cfg);
    ModelParams run2 = bm.params;
    TrainResult res2 = train(bm.spec, run2, dataset, cfg);

    REQUIRE(res1.history.size() == 200);
    CHECK(res1.history.front().epoch == 1);
    CHECK(res1.history.back().epoch == 200);
    CHECK(res1.history.back().loss < res1.history.front().loss);
    CHECK(params_equal(run1, run2));
    for (std::size_t e = 0; e < res1.history.size(); ++e) {
        CHECK(res1.history[e].loss == res2.history[e].loss);
        CHECK(res1.history[e].accuracy == res2.history[e].accuracy);
    }
    CHECK(res1.rng_state == res2.rng_state);
    CHECK(res1.history.back().accuracy == dataset_accuracy(bm.spec, run1, dataset));
}

TEST_CASE("a zero learning rate leaves parameters untouched") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 7);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 3;
    ModelParams params = bm.params;
    train(bm.spec, params, dataset, cfg);
    CHECK(params_equal(params, bm.params));
}

TEST_CASE("zero-sigma noise training matches clean training exactly") {
    ToyOptions opt;
    opt.subdivisions = 1;
    opt.num_deformed = 0;
    auto dataset = toy_correspondence_samples(opt);
    REQUIRE(dataset.size() == 1);
    BuiltModel bm = sphere_model(42, 11);

    TrainConfig clean;
    clean.learning_rate = 0.2;
    clean.weight_decay = 0.0;
    clean.epochs = 5;
    TrainConfig zero_noise = clean;
    zero_noise.noise_levels = {0.0};
    TrainConfig noisy = clean;
    noisy.noise_levels = {0.1};

    ModelParams p_clean = bm.params;
    TrainResult r_clean = train(bm.spec, p_clean, dataset, clean);
    ModelParams p_zero = bm.params;
    TrainResult r_zero = train(bm.spec, p_zero, dataset, zero_noise);
    ModelParams p_noisy = bm.params;
    TrainResult r_noisy = train(bm.spec, p_noisy, dataset, noisy);
    ModelParams p_noisy2 = bm.params;
    TrainResult r_noisy2 = train(bm.spec, p_noisy2, dataset, noisy);

    for (int e = 0; e < 5; ++e) CHECK(r_clean.history[e].loss == r_zero.history[e].loss);
    CHECK(params_equal(p_clean, p_zero));
    CHECK(r_noisy.history[0].loss != r_clean.history[0].loss);
    CHECK(params_equal(p_noisy, p_noisy2));
    CHECK(r_noisy.history.back().loss == r_noisy2.history.back().loss);
}

TEST_CASE("an exploding learning rate reports the diverging epoch") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 13);
    TrainConfig cfg;
    cfg.learning_rate = 1e6;
    cfg.weight_decay = 0.0;
    cfg.epochs = 10;
    ModelParams params = bm.params;
    bool threw = false;
    try {
        train(bm.spec, params, dataset, cfg);
    } catch (const DivergenceError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("hooks fire per epoch and on interior checkpoint epochs") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 17);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 6;
    cfg.checkpoint_interval = 2;

    std::vector<int> epochs_seen;
    std::vector<int> checkpoints_seen;
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochRecord& rec) { epochs_seen.push_back(rec.epoch); };
    hooks.on_checkpoint = [&](int epoch, const std::string& state) {
        checkpoints_seen.push_back(epoch);
        CHECK(!state.empty());
    };
    ModelParams params = bm.params;
    train(bm.spec, params, dataset, cfg, hooks);
    CHECK(epochs_seen == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(checkpoints_seen == std::vector<int>{2, 4});

    cfg.checkpoint_interval = 0;
    checkpoints_seen.clear();
    ModelParams again = bm.params;
    train(bm.spec, again, dataset, cfg, hooks);
    CHECK(checkpoints_seen.empty());
}

TEST_CASE("checkpoints round-trip every parameter bit") {
    BuiltModel bm = sphere_model(42, 19);
    Rng rng(3);
    rng.uniform();
    Checkpoint ckpt;
    ckpt.epoch = 7;
    ckpt.rng_state = rng.state();
    ckpt.spec = bm.spec;
    ckpt.params = bm.params;

    const std::string path = temp_file("feast_test_ckpt.bin");
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == 7);
    CHECK(back.format_version == 1);
    CHECK(back.rng_state == ckpt.rng_state);
    CHECK(spec_to_json(back.spec) == spec_to_json(bm.spec));
    CHECK(params_equal(back.params, bm.params));
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoint files are rejected") {
    BuiltModel bm = sphere_model(8, 23);
    Checkpoint ckpt;
    ckpt.spec = bm.spec;
    ckpt.params = bm.params;
    const std::string path = temp_file("feast_test_ckpt_corrupt.bin");
    save_checkpoint(path, ckpt);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    SUBCASE("truncated blob") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SUBCASE("trailing garbage") {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.put('\0');
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint(path + ".nope"), IoError);
    }
    std::filesystem::remove(path);
}

TEST_CASE("resuming from a checkpoint replays the one-shot run") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 29);
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.weight_decay = 1e-4;
    cfg.epochs = 60;
    cfg.rng_seed = 29;

    ModelParams oneshot = bm.params;
    TrainResult full = train(bm.spec, oneshot, dataset, cfg);

    TrainConfig half = cfg;
    half.epochs = 30;
    ModelParams resumed = bm.params;
    TrainResult first = train(bm.spec, resumed, dataset, half);
    TrainResult second = train(bm.spec, resumed, dataset, cfg, {}, 30, first.rng_state);

    CHECK(params_equal(resumed, oneshot));
    REQUIRE(second.history.size() == 30);
    for (int e = 0; e < 30; ++e) {
        CHECK(second.history[e].epoch == full.history[30 + e].epoch);
        CHECK(second.history[e].loss == full.history[30 + e].loss);
    }
    CHECK(second.rng_state == full.rng_state);
}

TEST_CASE("train rejects malformed datasets and resume points") {
    auto dataset = sphere_task(1);
    BuiltModel bm = sphere_model(42, 31);
    TrainConfig cfg;
    cfg.epochs = 1;
    ModelParams params = bm.params;
    CHECK_THROWS_AS(train(bm.spec, params, {}, cfg), ValueError);
    CHECK_THROWS_AS(train(bm.spec, params, dataset, cfg, {}, -1), ValueError);
    CHECK_THROWS_AS(train(bm.spec, params, dataset, cfg, {}, 2), ValueError);

    auto broken = dataset;
    broken[0].targets.pop_back();
    CHECK_THROWS_AS(train(bm.spec, params, broken, cfg), ShapeError);
    auto short_scale = dataset;
    short_scale[0].noise_scale.pop_back();
    CHECK_THROWS_AS(train(bm.spec, params, short_scale, cfg), ShapeError);
}
