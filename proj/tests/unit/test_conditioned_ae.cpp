#include <cmath>
#include <vector>

#include "doctest.h"
#include "conditioned_fixtures.hpp"
#include "gradcheck.hpp"
#include "synth_data.hpp"
#include "temp_dir.hpp"

#include "asdkit/conditioned_ae.hpp"
#include "asdkit/error.hpp"
#include "asdkit/metrics.hpp"

using namespace asdkit;

namespace {

constexpr int kFeatureDim = testing::kConditionedFeatureDim;

ConditionedConfig quick_config(ConditioningVariant variant, int epochs) {
  ConditionedConfig c;
  c.variant = variant;
  c.train.epochs = epochs;
  c.train.batch_size = 64;
  return c;
}

double auc_for(const ConditionedAeModel& m, const SynthSpec& spec, const MachineKey& key, int per_class) {
  std::vector<metrics::ScoredSample> s;
  for (const auto& c : testing::voice_clips(spec, key.machine_id, Split::kTest, Label::kNormal, per_class))
    s.push_back({conditioned_anomaly_score(m, c, key), false, ""});
  for (const auto& c : testing::voice_clips(spec, key.machine_id, Split::kTest, Label::kAnomaly, per_class))
    s.push_back({conditioned_anomaly_score(m, c, key), true, ""});
  return metrics::auc(s);
}

}  // namespace

TEST_SUITE("conditioned_ae") {
  TEST_CASE("input and output widths follow the variant") {
    auto [ct, none] = conditioned_layer_dims(320, 4, ConditioningVariant::kConstantTarget, {}, false);
    CHECK(ct.front() == 324);
    CHECK(ct.back() == 320);
    CHECK(none.empty());
    auto [ir, none2] = conditioned_layer_dims(320, 4, ConditioningVariant::kIdRegression, {}, false);
    CHECK(ir.front() == 324);
    CHECK(ir.back() == 324);
    auto [enc, dec] = conditioned_layer_dims(320, 4, ConditioningVariant::kConstantTarget, {}, true);
    CHECK(enc == std::vector<int>{324, 128, 128, 128, 8});
    CHECK(dec == std::vector<int>{12, 128, 128, 128, 320});
  }

  TEST_CASE("conditioning rows append a one-hot ID") {
    const Matrix frames = Matrix::Constant(2, 3, 7.0);
    const Matrix in = conditioned_inputs(frames, 1, 3);
    REQUIRE(in.cols() == 6);
    CHECK(in.row(0).tail(3) == Eigen::RowVector3d(0, 1, 0));
    CHECK(in.leftCols(3) == frames);
    CHECK_THROWS_AS(conditioned_inputs(frames, 3, 3), ConfigError);
  }

  TEST_CASE("perfect reconstruction scores zero") {
    const Matrix frames = testing::random_matrix(5, 6, 3);
    CHECK(conditioned_frame_errors(ConditioningVariant::kConstantTarget, frames, frames, 0, 2, 1.0).maxCoeff() == 0.0);
    const Matrix aug = conditioned_inputs(frames, 1, 2);
    CHECK(conditioned_frame_errors(ConditioningVariant::kIdRegression, frames, aug, 1, 2, 1.0).maxCoeff() == 0.0);
  }

  TEST_CASE("uniform ID block with K = 4 costs 0.75 per frame") {
    const Matrix frames = testing::random_matrix(3, 6, 4);
    Matrix out(3, 10);
    out << frames, Matrix::Constant(3, 4, 0.25);
    const Vector e = conditioned_frame_errors(ConditioningVariant::kIdRegression, frames, out, 2, 4, 1.0);
    for (Eigen::Index i = 0; i < e.size(); ++i) CHECK(e[i] == doctest::Approx(0.75).epsilon(1e-15));
  }

  TEST_CASE("id-regression error is non-decreasing in lambda") {
    const Matrix frames = testing::random_matrix(6, 5, 5);
    const Matrix out = testing::random_matrix(6, 8, 6);
    Vector previous = Vector::Constant(6, -1.0);
    for (double lambda : {0.0, 0.1, 0.5, 1.0, 2.0, 10.0}) {
      const Vector e = conditioned_frame_errors(ConditioningVariant::kIdRegression, frames, out, 1, 3, lambda);
      CHECK((e.array() >= previous.array()).all());
      previous = e;
    }
  }

  TEST_CASE("lambda zero leaves the ID block unsupervised") {
    const Matrix pred = testing::random_matrix(4, 7, 8);
    const Matrix target = testing::random_matrix(4, 7, 9);
    const auto lv = conditioned_loss(ConditioningVariant::kIdRegression, pred, target, Vector::Ones(4), 2, 0.0);
    const auto plain = nn::mse_loss(pred.leftCols(5), target.leftCols(5));
    CHECK(lv.loss == doctest::Approx(plain.loss).epsilon(1e-14));
    CHECK(lv.grad.rightCols(2).isZero(0.0));
    CHECK((lv.grad.leftCols(5) - plain.grad).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("lambda zero training never moves the ID outputs") {
    const auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 2);
    auto cfg = quick_config(ConditioningVariant::kIdRegression, 3);
    cfg.id_weight = 0.0;
    const auto trained = train_conditioned_ae(data, cfg, 5).model;
    cfg.train.epochs = 0;
    const auto initial = train_conditioned_ae(data, cfg, 5).model;
    const auto& last = trained.network.layers.back();
    const auto& last0 = initial.network.layers.back();
    CHECK(last.weights.bottomRows(2) == last0.weights.bottomRows(2));
    CHECK(last.biases.tail(2) == last0.biases.tail(2));
    CHECK(last.weights.topRows(320) != last0.weights.topRows(320));
  }

  TEST_CASE("q zero ignores every mismatch setting") {
    const auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 2);
    auto a = quick_config(ConditioningVariant::kConstantTarget, 3);
    a.mismatch_prob = 0.0;
    auto b = a;
    b.constant = ConstantPolicy::kZero;
    b.mismatch_weight = 5.0;
    const auto ma = train_conditioned_ae(data, a, 9).model;
    const auto mb = train_conditioned_ae(data, b, 9).model;
    for (std::size_t l = 0; l < ma.network.layers.size(); ++l) {
      CHECK(ma.network.layers[l].weights == mb.network.layers[l].weights);
      CHECK(ma.network.layers[l].biases == mb.network.layers[l].biases);
    }
  }

  TEST_CASE("weighted loss matches a row-by-row oracle") {
    const Matrix pred = testing::random_matrix(3, 4, 10);
    const Matrix target = testing::random_matrix(3, 4, 11);
    Vector w(3);
    w << 1.0, 0.5, 3.0;
    double expected = 0.0;
    for (int r = 0; r < 3; ++r) {
      double sq = 0.0;
      for (int c = 0; c < 4; ++c) sq += (pred(r, c) - target(r, c)) * (pred(r, c) - target(r, c));
      expected += w[r] * sq;
    }
    expected /= 3.0;
    const auto lv = conditioned_loss(ConditioningVariant::kConstantTarget, pred, target, w, 2, 1.0);
    CHECK(lv.loss == doctest::Approx(expected).epsilon(1e-14));
    CHECK_THROWS_AS(conditioned_loss(ConditioningVariant::kConstantTarget, pred, target, Vector::Ones(2), 2, 1.0),
                    DimensionError);
  }

  TEST_CASE("constant-target gradients match finite differences") {
    const auto m = testing::random_conditioned_model(ConditioningVariant::kConstantTarget, 3, false, 21);
    const auto res = testing::conditioned_gradient_error(m, testing::random_conditioned_batch(m, 22));
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-5);
  }

  TEST_CASE("id-regression gradients match finite differences") {
    auto m = testing::random_conditioned_model(ConditioningVariant::kIdRegression, 3, false, 23);
    m.id_weight = 2.5;
    const auto res = testing::conditioned_gradient_error(m, testing::random_conditioned_batch(m, 24));
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-5);
  }

  TEST_CASE("decoder-conditioned gradients match finite differences") {
    const auto ct = testing::random_conditioned_model(ConditioningVariant::kConstantTarget, 3, true, 25);
    const auto a = testing::conditioned_gradient_error(ct, testing::random_conditioned_batch(ct, 26));
    INFO(a.worst);
    CHECK(a.max_rel_error < 1e-5);
    const auto ir = testing::random_conditioned_model(ConditioningVariant::kIdRegression, 3, true, 27);
    const auto b = testing::conditioned_gradient_error(ir, testing::random_conditioned_batch(ir, 28));
    INFO(b.worst);
    CHECK(b.max_rel_error < 1e-5);
  }

  TEST_CASE("conditioning on the wrong ID raises the error") {
    const auto spec = testing::two_tone_spec();
    const auto data = testing::synth_clips(spec, Split::kTrain, Label::kNormal, 4);
    for (auto variant : {ConditioningVariant::kConstantTarget, ConditioningVariant::kIdRegression}) {
      const auto res = train_conditioned_ae(data, quick_config(variant, 40), 3);
      CHECK(res.warnings.empty());
      const auto m = res.model;
      const FeatureExtractor fx(m.features);
      for (const auto& clip : testing::voice_clips(spec, 0, Split::kTest, Label::kNormal, 3)) {
        const Matrix f = fx.frames(clip).vectors;
        CHECK(conditioned_anomaly_score(m, f, 1) > conditioned_anomaly_score(m, f, 0));
      }
    }
  }

  TEST_CASE("anomalies score above normals under the correct ID") {
    const auto spec = testing::two_tone_spec();
    const auto data = testing::synth_clips(spec, Split::kTrain, Label::kNormal, 6);
    auto cfg = quick_config(ConditioningVariant::kConstantTarget, 40);
    cfg.decoder_conditioning = true;
    const auto m = train_conditioned_ae(data, cfg, 4).model;
    CHECK(auc_for(m, spec, {"synth", 0}, 6) > 0.85);
    CHECK(auc_for(m, spec, {"synth", 1}, 6) > 0.85);
  }

  TEST_CASE("wrong-ID training loss stays finite and falls") {
    const auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 3);
    const auto res = train_conditioned_ae(data, quick_config(ConditioningVariant::kConstantTarget, 20), 6);
    REQUIRE(res.loss_history.size() == 20);
    for (double l : res.loss_history) CHECK(std::isfinite(l));
    CHECK(res.loss_history.back() < 0.5 * res.loss_history.front());
  }

  TEST_CASE("training is deterministic") {
    const auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 2);
    const auto cfg = quick_config(ConditioningVariant::kConstantTarget, 2);
    const auto a = train_conditioned_ae(data, cfg, 8);
    const auto b = train_conditioned_ae(data, cfg, 8);
    CHECK(a.loss_history == b.loss_history);
    CHECK(nn::encode_checkpoint(a.model.network, 0) == nn::encode_checkpoint(b.model.network, 0));
  }

  TEST_CASE("consistent relabelling leaves scores unchanged") {
    const auto m = testing::random_conditioned_model(ConditioningVariant::kIdRegression, 3, false, 40);
    auto p = m;
    const std::vector<int> perm{2, 0, 1};  // old index i moves to perm[i]
    auto& first = p.network.layers.front();
    auto& last = p.network.layers.back();
    for (int i = 0; i < 3; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      p.id_index[static_cast<std::size_t>(perm[ui])] = m.id_index[ui];
      first.weights.col(kFeatureDim + perm[ui]) = m.network.layers.front().weights.col(kFeatureDim + i);
      last.weights.row(kFeatureDim + perm[ui]) = m.network.layers.back().weights.row(kFeatureDim + i);
      last.biases[kFeatureDim + perm[ui]] = m.network.layers.back().biases[kFeatureDim + i];
    }
    const auto clip = testing::tone_clip(900.0, 0.5);
    for (const auto& key : m.id_index) {
      CHECK(conditioned_anomaly_score(m, clip, key) == doctest::Approx(conditioned_anomaly_score(p, clip, key)).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid inputs are rejected") {
    auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 1);
    auto cfg = quick_config(ConditioningVariant::kConstantTarget, 1);
    cfg.mismatch_prob = 1.5;
    CHECK_THROWS_AS(train_conditioned_ae(data, cfg, 1), ConfigError);
    CHECK_THROWS_AS(parse_conditioning_variant("both"), ConfigError);
    CHECK_THROWS_AS(parse_constant_policy("ones"), ConfigError);

    auto mixed = data;
    mixed[{"other", 0}] = data.at({"synth", 0});
    CHECK_THROWS_AS(train_conditioned_ae(mixed, quick_config(ConditioningVariant::kConstantTarget, 1), 1), ConfigError);

    auto empty = data;
    empty[{"synth", 1}].clear();
    CHECK_THROWS_AS(train_conditioned_ae(empty, quick_config(ConditioningVariant::kConstantTarget, 1), 1), DataError);

    const auto m = train_conditioned_ae(data, quick_config(ConditioningVariant::kConstantTarget, 1), 1).model;
    CHECK_THROWS_AS(conditioned_anomaly_score(m, testing::tone_clip(500.0, 0.5), {"synth", 7}), ConfigError);
  }

  TEST_CASE("a single ID trains with a warning") {
    auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 1);
    data.erase({"synth", 1});
    const auto res = train_conditioned_ae(data, quick_config(ConditioningVariant::kConstantTarget, 1), 1);
    REQUIRE(res.warnings.size() == 1);
    CHECK(res.warnings[0].find("single ID") != std::string::npos);
  }

  TEST_CASE("model files round trip with and without decoder conditioning") {
    testing::TempDir dir("cond");
    const auto data = testing::synth_clips(testing::two_tone_spec(), Split::kTrain, Label::kNormal, 1);
    const auto clip = data.at({"synth", 1})[0];
    for (bool dec : {false, true}) {
      auto cfg = quick_config(ConditioningVariant::kIdRegression, 1);
      cfg.decoder_conditioning = dec;
      const auto m = train_conditioned_ae(data, cfg, 2).model;
      const auto sub = dir / (dec ? "dec" : "enc");
      const auto manifest = save_conditioned_ae(m, sub, "feed");
      const auto back = load_conditioned_ae(manifest);
      CHECK(back.decoder_conditioning == dec);
      CHECK(back.variant == ConditioningVariant::kIdRegression);
      CHECK(back.id_index == m.id_index);
      CHECK(conditioned_anomaly_score(back, clip, {"synth", 1}) == conditioned_anomaly_score(m, clip, {"synth", 1}));
    }
    CHECK(std::filesystem::exists(dir / "dec" / "conditioned_synth.decoder.model"));
    std::filesystem::remove(dir / "dec" / "conditioned_synth.decoder.model");
    CHECK_THROWS_AS(load_conditioned_ae(dir / "dec" / "conditioned_synth.json"), IoError);
  }
}
