// Copyright 2026 The ssep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "harness.hpp"
#include "ssep/model.hpp"
#include "ssep/util.hpp"

using namespace ssep;

TEST_CASE("variant names round-trip") {
    for (Variant v : {Variant::baseline, Variant::score_informed, Variant::score_only})
        CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS_AS(variant_from_name("bogus"), DataError);
}

TEST_CASE("config validation catches inconsistent dimensions") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    f.config.validate();
    ModelConfig bad = f.config;
    bad.score_feature_size = 5;  // must equal 2 * score_encoder_hidden
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = f.config;
    bad.instruments = {"violin", "violin"};
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = f.config;
    bad.instruments.clear();
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = f.config;
    bad.n_bins = 0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = f.config;
    bad.variant = Variant::score_only;
    bad.use_io_normalization = true;  // removed in this variant
    CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("branch input width follows the variant") {
    harness::ToyFixture f = harness::toy_fixture(Variant::baseline);
    CHECK(SeparationModel::build(f.config, 0).branch_input_width() == 9);
    f = harness::toy_fixture(Variant::score_informed);
    CHECK(SeparationModel::build(f.config, 0).branch_input_width() == 13);
    f = harness::toy_fixture(Variant::score_only);
    CHECK(SeparationModel::build(f.config, 0).branch_input_width() == kMidiPitches);
}

TEST_CASE("trainable parameter count matches the collected set") {
    for (Variant v : {Variant::baseline, Variant::score_informed, Variant::score_only}) {
        harness::ToyFixture f = harness::toy_fixture(v);
        SeparationModel model = SeparationModel::build(f.config, 7);
        CHECK(model.params().trainable_count() ==
              SeparationModel::trainable_param_count(f.config));
    }
}

TEST_CASE("forward yields one non-negative mask per instrument") {
    for (Variant v : {Variant::baseline, Variant::score_informed, Variant::score_only}) {
        harness::ToyFixture f = harness::toy_fixture(v);
        SeparationModel model = SeparationModel::build(f.config, 3);
        const MagSpectrogram* mag = v == Variant::score_only ? nullptr : &f.mag;
        const std::vector<PianoRoll>* rolls = v == Variant::baseline ? nullptr : &f.rolls;
        std::vector<Mask> masks = model.forward(mag, rolls, f.spans);
        REQUIRE(masks.size() == 2);
        for (const Mask& m : masks) {
            CHECK(m.frames() == 8);
            CHECK(m.bins() == 9);
            CHECK(m.data.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("missing variant inputs are rejected") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel model = SeparationModel::build(f.config, 3);
    CHECK_THROWS_AS(model.forward(&f.mag, nullptr, f.spans), DataError);
    CHECK_THROWS_AS(model.forward(nullptr, &f.rolls, f.spans), DataError);
}

TEST_CASE("score features are non-negative with the documented width") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel model = SeparationModel::build(f.config, 5);
    model.set_training(false);
    Tensor2 feat = model.encode_score(f.rolls[0], "violin", {});
    CHECK(feat.rows() == 8);
    CHECK(feat.cols() == f.config.score_feature_size);
    CHECK(feat.minCoeff() >= 0.0);
    CHECK_THROWS_AS(model.encode_score(f.rolls[0], "tuba", {}), DataError);
}

TEST_CASE("input standardization changes baseline output") {
    harness::ToyFixture f = harness::toy_fixture(Variant::baseline);
    SeparationModel model = SeparationModel::build(f.config, 11);
    model.set_training(false);
    std::vector<Mask> before = model.forward(&f.mag, nullptr, f.spans);
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Constant(9, 0.3);
    Eigen::RowVectorXd std_ = Eigen::RowVectorXd::Constant(9, 2.0);
    model.set_input_stats(mean, std_);
    std::vector<Mask> after = model.forward(&f.mag, nullptr, f.spans);
    CHECK((after[0].data - before[0].data).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("score-only masks ignore everything but the rolls") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_only);
    SeparationModel model = SeparationModel::build(f.config, 13);
    model.set_training(false);
    std::vector<Mask> a = model.forward(nullptr, &f.rolls, f.spans);
    std::vector<Mask> b = model.forward(nullptr, &f.rolls, f.spans);
    for (int i = 0; i < 2; ++i)
        CHECK((a[i].data - b[i].data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eval mode is deterministic and leaves running stats alone") {
    harness::ToyFixture f = harness::toy_fixture(Variant::baseline);
    SeparationModel model = SeparationModel::build(f.config, 17);
    model.forward(&f.mag, nullptr, f.spans);  // one training step updates stats
    model.set_training(false);
    ParamSet ps = model.params();
    Tensor2 stats_before = *ps.at("branch.violin.enc.bn.running_mean").value;
    std::vector<Mask> a = model.forward(&f.mag, nullptr, f.spans);
    std::vector<Mask> b = model.forward(&f.mag, nullptr, f.spans);
    CHECK((a[0].data - b[0].data).cwiseAbs().maxCoeff() == 0.0);
    Tensor2 stats_after = *ps.at("branch.violin.enc.bn.running_mean").value;
    CHECK((stats_after - stats_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("score-informed end-to-end gradients match finite differences") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel model = SeparationModel::build(f.config, 2);
    harness::ModelCheck check =
        harness::model_grad_check(model, f.mag, f.rolls, f.spans);
    CHECK(check.max_param_err <= 1e-3);
    CHECK(check.max_input_err <= 1e-3);
}

TEST_CASE("baseline end-to-end gradients match finite differences") {
    harness::ToyFixture f = harness::toy_fixture(Variant::baseline);
    SeparationModel model = SeparationModel::build(f.config, 0);
    harness::ModelCheck check =
        harness::model_grad_check(model, f.mag, f.rolls, f.spans);
    CHECK(check.max_param_err <= 1e-3);
    CHECK(check.max_input_err <= 1e-3);
}

TEST_CASE("score-only end-to-end gradients match finite differences") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_only);
    SeparationModel model = SeparationModel::build(f.config, 0);
    harness::ModelCheck check =
        harness::model_grad_check(model, f.mag, f.rolls, f.spans);
    CHECK(check.max_param_err <= 1e-3);
    CHECK(check.max_input_err == 0.0);  // no audio path at all
}

TEST_CASE("separate returns stems matching the mix length") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel model = SeparationModel::build(f.config, 19);
    model.set_training(false);

    AudioClip mix;
    mix.sample_rate = 44100;
    mix.samples.resize(200);
    Rng rng(23);
    for (auto& s : mix.samples) s = 0.3 * rng.normal();

    std::vector<ScoreTrack> score(2);
    score[0].instrument = "violin";
    score[0].notes = {{0.0, 0.002, 60, "violin"}};
    score[1].instrument = "cello";
    score[1].notes = {{0.0, 0.004, 40, "cello"}};

    std::vector<AudioClip> stems = model.separate(mix, &score, 16, 8);
    REQUIRE(stems.size() == 2);
    for (const AudioClip& s : stems) {
        CHECK(s.size() == mix.size());
        CHECK(s.sample_rate == 44100);
    }

    // an instrument missing from the score gets the all-zero roll
    std::vector<ScoreTrack> partial = {score[0]};
    CHECK(model.separate(mix, &partial, 16, 8).size() == 2);

    harness::ToyFixture fb = harness::toy_fixture(Variant::baseline);
    SeparationModel base = SeparationModel::build(fb.config, 19);
    base.set_training(false);
    CHECK(base.separate(mix, nullptr, 16, 8).size() == 2);
}

TEST_CASE("identical seeds build identical models") {
    harness::ToyFixture f = harness::toy_fixture(Variant::score_informed);
    SeparationModel a = SeparationModel::build(f.config, 42);
    SeparationModel b = SeparationModel::build(f.config, 42);
    ParamSet pa = a.params(), pb = b.params();
    REQUIRE(pa.entries().size() == pb.entries().size());
    for (std::size_t i = 0; i < pa.entries().size(); ++i) {
        CHECK(pa.entries()[i].path == pb.entries()[i].path);
        CHECK((*pa.entries()[i].value - *pb.entries()[i].value)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
}
