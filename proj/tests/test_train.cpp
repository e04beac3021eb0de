// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "harness.hpp"
#include "ssep/data.hpp"
#include "ssep/train.hpp"
#include "ssep/util.hpp"

using namespace ssep;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const Manifest& toy_manifest() {
    static Manifest manifest = [] {
        fs::path dir = fresh_dir("ssep_test_train_data");
        ToySpec spec = ToySpec::default_profile(2, 12.0, 21);
        synthesize_toy(spec, dir.string());
        return load_manifest((dir / "manifest.json").string());
    }();
    return manifest;
}

TrainConfig tiny_config(Variant variant) {
    TrainConfig config;
    config.variant = variant;
    config.instruments = {"low", "mid", "high"};
    config.epochs = 1;
    config.steps_per_epoch = 3;
    config.batch_size = 1;
    config.segment_sec = 2.0;
    config.window_size = 512;
    config.hop_size = 128;
    config.hidden_size = 4;
    config.encoder_out = 8;
    config.score_feature_size = 4;
    config.use_io_normalization = variant != Variant::score_only;
    config.seed = 11;
    return config;
}

}  // namespace

TEST_CASE("train config validation pins the documented constraints") {
    TrainConfig config = tiny_config(Variant::baseline);
    config.validate();
    TrainConfig bad = config;
    bad.precision = "float32";
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = config;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = config;
    bad.instruments.clear();
    bad.family.clear();  // neither an explicit list nor a family
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = config;
    bad.window_size = 100;  // odd windows break the frame grid
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = config;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("train config json round-trips and rejects unknown keys") {
    TrainConfig config = tiny_config(Variant::score_informed);
    config.family = "";
    json j = train_config_to_json(config);
    TrainConfig back = train_config_from_json(j);
    CHECK(back.variant == config.variant);
    CHECK(back.instruments == config.instruments);
    CHECK(back.segment_sec == config.segment_sec);
    CHECK(back.window_size == config.window_size);
    CHECK(back.seed == config.seed);
    CHECK(train_config_to_json(back) == j);

    json unknown = j;
    unknown["learning_rat"] = 0.1;
    CHECK_THROWS_AS(train_config_from_json(unknown), DataError);
    json wrong_type = j;
    wrong_type["epochs"] = "five";
    CHECK_THROWS_AS(train_config_from_json(wrong_type), DataError);
}

TEST_CASE("model config json round-trips") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    json j = model_config_to_json(f.config);
    ModelConfig back = model_config_from_json(j);
    CHECK(back.variant == f.config.variant);
    CHECK(back.instruments == f.config.instruments);
    CHECK(back.n_bins == f.config.n_bins);
    CHECK(back.score_encoder_hidden == f.config.score_encoder_hidden);
    CHECK(back.use_io_normalization == f.config.use_io_normalization);
}

TEST_CASE("explicit instruments win over family; families need two members") {
    const Manifest& manifest = toy_manifest();
    TrainConfig config = tiny_config(Variant::baseline);
    CHECK(resolve_instruments(config, manifest) ==
          std::vector<std::string>{"low", "mid", "high"});

    config.instruments.clear();
    config.family = "strings";  // toy voices are not in the family table
    CHECK_THROWS_WITH_AS(resolve_instruments(config, manifest),
                         doctest::Contains("fewer than two"), DataError);
    config.family = "choir";
    CHECK_THROWS_AS(resolve_instruments(config, manifest), DataError);
}

TEST_CASE("family resolution keeps dataset members in family order") {
    Manifest manifest;
    manifest.instruments = {"cello", "violin", "flute", "viola"};
    TrainConfig config = tiny_config(Variant::baseline);
    config.instruments.clear();
    config.family = "strings";
    // family members are enumerated alphabetically: bass, cello, viola, violin
    CHECK(resolve_instruments(config, manifest) ==
          std::vector<std::string>{"cello", "viola", "violin"});
}

TEST_CASE("input statistics have per-bin shape and a std floor") {
    const Manifest& manifest = toy_manifest();
    TrainConfig config = tiny_config(Variant::baseline);
    InputStats stats = compute_input_stats(manifest, config, 4);
    const long bins = config.window_size / 2 + 1;
    CHECK(stats.mean.cols() == bins);
    CHECK(stats.std.cols() == bins);
    CHECK(stats.std.minCoeff() >= 1e-6);
    CHECK(stats.mean.maxCoeff() > 0.0);  // toy audio has energy

    InputStats again = compute_input_stats(manifest, config, 4);
    CHECK((again.mean - stats.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam takes a signed unit step and clips large gradients") {
    Tensor2 value = Tensor2::Zero(1, 2);
    Tensor2 grad(1, 2);
    grad << 3.0, -4.0;  // norm 5, right at the clip boundary
    ParamSet ps;
    ps.add("w", &value, &grad);
    AdamOptimizer adam(0.1);
    adam.attach(ps);
    const double norm = adam.step(ps);
    CHECK(norm == doctest::Approx(5.0).epsilon(1e-12));
    // first bias-corrected step is lr * g / (|g| + eps) = lr * sign(g)
    CHECK(value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(value(0, 1) == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(adam.steps_taken() == 1);

    // a gradient past the clip norm follows the same trajectory as one
    // already at the boundary
    auto two_steps = [](double g) {
        Tensor2 v = Tensor2::Zero(1, 1);
        Tensor2 grad(1, 1);
        ParamSet ps2;
        ps2.add("w", &v, &grad);
        AdamOptimizer opt(0.1);
        opt.attach(ps2);
        for (int s = 0; s < 2; ++s) {
            grad.setConstant(g);
            opt.step(ps2);
        }
        return v(0, 0);
    };
    CHECK(two_steps(50.0) == doctest::Approx(two_steps(5.0)).epsilon(1e-12));
    CHECK(two_steps(50.0) != doctest::Approx(two_steps(2.0)).epsilon(1e-12));
}

TEST_CASE("checkpoints survive a save/load round trip byte for byte") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel model = SeparationModel::build(f.config, 31);
    model.forward(&f.mag, &f.rolls, f.spans);  // sharpen running stats
    model.set_training(false);
    std::vector<Mask> masks = model.forward(&f.mag, &f.rolls, f.spans);

    Checkpoint ckpt = Checkpoint::from_model(
        model, json{{"stft", {{"window_size", 16}, {"hop_size", 8}}}});
    fs::path dir = fresh_dir("ssep_test_train_ckpt");
    fs::path p1 = dir / "model.bin";
    save_checkpoint(ckpt, p1.string());

    Checkpoint loaded = load_checkpoint(p1.string());
    CHECK(loaded.version == ckpt.version);
    CHECK(loaded.tensors.size() == ckpt.tensors.size());
    CHECK(checkpoint_stft(loaded).window_size == 16);
    CHECK(checkpoint_stft(loaded).hop_size == 8);

    fs::path p2 = dir / "model2.bin";
    save_checkpoint(loaded, p2.string());
    CHECK(slurp(p1) == slurp(p2));

    SeparationModel rebuilt = loaded.to_model();
    CHECK_FALSE(rebuilt.is_training());
    std::vector<Mask> again = rebuilt.forward(&f.mag, &f.rolls, f.spans);
    for (std::size_t i = 0; i < masks.size(); ++i)
        CHECK((again[i].data - masks[i].data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("corrupted checkpoints are rejected") {
    harness::ToyFixture f = harness::toy_fixture(Variant::baseline);
    SeparationModel model = SeparationModel::build(f.config, 5);
    Checkpoint ckpt = Checkpoint::from_model(model, json::object());
    fs::path dir = fresh_dir("ssep_test_train_corrupt");
    fs::path good = dir / "good.bin";
    save_checkpoint(ckpt, good.string());
    std::string bytes = slurp(good);

    auto write_bytes = [&](const std::string& name, const std::string& content) {
        fs::path p = dir / name;
        std::ofstream out(p, std::ios::binary);
        out.write(content.data(), (std::streamsize)content.size());
        return p.string();
    };

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.bin").string()), DataError);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(write_bytes("magic.bin", bad_magic)), DataError);
    std::string truncated = bytes.substr(0, bytes.size() - 16);
    CHECK_THROWS_AS(load_checkpoint(write_bytes("trunc.bin", truncated)), DataError);
    std::string trailing = bytes + "tail";
    CHECK_THROWS_AS(load_checkpoint(write_bytes("tail.bin", trailing)), DataError);
}

TEST_CASE("training is reproducible and logs one json line per step") {
    const Manifest& manifest = toy_manifest();
    TrainConfig config = tiny_config(Variant::score_only);

    std::ostringstream log_a, log_b;
    Checkpoint a = train(manifest, config, &log_a);
    Checkpoint b = train(manifest, config, &log_b);
    CHECK(log_a.str() == log_b.str());
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        CHECK(a.tensors[i].first == b.tensors[i].first);
        CHECK((a.tensors[i].second - b.tensors[i].second).cwiseAbs().maxCoeff() ==
              0.0);
    }

    long lines = 0;
    std::istringstream ss(log_a.str());
    std::string line;
    double last_total = 0.0;
    while (std::getline(ss, line)) {
        json rec = json::parse(line);
        CHECK(rec.contains("epoch"));
        CHECK(rec.contains("step"));
        CHECK(rec.contains("total"));
        CHECK(rec.contains("grad_norm"));
        REQUIRE(rec.contains("subsets"));
        CHECK(rec["subsets"].size() == 6);  // 2^3 - 2
        CHECK(rec["subsets"].contains("low+mid"));
        last_total = rec["total"].get<double>();
        ++lines;
    }
    CHECK(lines == 3);
    CHECK(a.metadata["final_loss"].get<double>() == last_total);
    CHECK(a.metadata["steps_total"].get<long>() == 3);
    CHECK(a.metadata["epochs_run"].get<long>() == 1);
    CHECK(checkpoint_stft(a).window_size == 512);

    // a different seed must change the outcome
    TrainConfig other = config;
    other.seed = 12;
    Checkpoint c = train(manifest, other, nullptr);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.tensors.size() && !any_diff; ++i)
        any_diff = (a.tensors[i].second - c.tensors[i].second).cwiseAbs().maxCoeff() > 0.0;
    CHECK(any_diff);
}

TEST_CASE("training rejects a segment longer than the songs") {
    const Manifest& manifest = toy_manifest();
    TrainConfig config = tiny_config(Variant::baseline);
    config.segment_sec = 20.0;  // songs are 12 s
    CHECK_THROWS_AS(train(manifest, config), DataError);
}

TEST_CASE("baseline and score-informed runs keep their variant in metadata") {
    const Manifest& manifest = toy_manifest();
    for (Variant v : {Variant::baseline, Variant::score_informed}) {
        TrainConfig config = tiny_config(v);
        config.epochs = 1;
        config.steps_per_epoch = 1;
        Checkpoint ckpt = train(manifest, config);
        CHECK(ckpt.config.variant == v);
        CHECK(ckpt.metadata["train_config"]["variant"] ==
              json(variant_name(v)));
        SeparationModel model = ckpt.to_model();
        CHECK(model.config().instruments == config.instruments);
    }
}
