#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "synth_data.hpp"
#include "temp_dir.hpp"

#include "asdkit/baseline_ae.hpp"
#include "asdkit/error.hpp"
#include "asdkit/metrics.hpp"

using namespace asdkit;

namespace {

AeModel single_layer_model(const Matrix& weights) {
  AeModel m;
  m.network = nn::init_network(std::vector<int>{static_cast<int>(weights.cols()), static_cast<int>(weights.rows())},
                               std::vector<nn::Activation>{nn::Activation::kIdentity}, 0);
  m.network.layers[0].weights = weights;
  return m;
}

BaselineConfig quick_config(int epochs) {
  BaselineConfig c;
  c.train.epochs = epochs;
  c.train.batch_size = 64;
  return c;
}

}  // namespace

TEST_SUITE("baseline_ae") {
  TEST_CASE("default layer dims for a 320-dim input") {
    const auto m = build_baseline_ae(320, 1);
    CHECK(m.network.dims() == std::vector<int>{320, 128, 128, 128, 8, 128, 128, 128, 320});
    for (std::size_t l = 0; l + 1 < m.network.layers.size(); ++l) {
      CHECK(m.network.layers[l].activation == nn::Activation::kRelu);
    }
    CHECK(m.network.layers.back().activation == nn::Activation::kIdentity);
    CHECK(m.bottleneck_dim() == 8);
  }

  TEST_CASE("five-per-half layout adds a hidden layer to each half") {
    AeArchitecture a;
    a.layout = AeLayout::kFivePerHalf;
    CHECK(ae_layer_dims(320, 320, a) == std::vector<int>{320, 128, 128, 128, 128, 8, 128, 128, 128, 128, 320});
    CHECK(parse_ae_layout("5") == AeLayout::kFivePerHalf);
    CHECK(parse_ae_layout("four_per_half") == AeLayout::kFourPerHalf);
    CHECK_THROWS_AS(parse_ae_layout("six"), ConfigError);
  }

  TEST_CASE("parameter count matches a shape walk") {
    const auto m = build_baseline_ae(320, 1);
    const std::vector<int> dims{320, 128, 128, 128, 8, 128, 128, 128, 320};
    std::size_t expected = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) expected += static_cast<std::size_t>(dims[i] * dims[i + 1] + dims[i + 1]);
    CHECK(m.network.parameter_count() == expected);
    CHECK(expected == 2 * (320 * 128 + 128 * 128 * 2 + 128 * 8) + (128 * 6 + 8 + 320));
  }

  TEST_CASE("bottleneck activations are 8-dimensional") {
    const auto m = build_baseline_ae(320, 3);
    const Matrix z = encode(m, testing::random_matrix(5, 320, 1));
    CHECK(z.rows() == 5);
    CHECK(z.cols() == 8);
  }

  TEST_CASE("perfect reconstruction scores zero") {
    const auto m = single_layer_model(Matrix::Identity(6, 6));
    CHECK(anomaly_score(m, testing::random_matrix(4, 6, 2)) == 0.0);
  }

  TEST_CASE("unit frame against a zero reconstruction scores one") {
    const auto m = single_layer_model(Matrix::Zero(6, 6));
    Matrix phi = Matrix::Zero(1, 6);
    phi(0, 0) = 1.0;
    CHECK(anomaly_score(m, phi) == 1.0);
  }

  TEST_CASE("score is the mean of a frame-loop oracle") {
    const auto m = build_baseline_ae(20, 4);
    const Matrix frames = testing::random_matrix(13, 20, 5);
    double sum = 0.0;
    for (Eigen::Index t = 0; t < frames.rows(); ++t) {
      const Matrix out = nn::predict(m.network, frames.row(t));
      double e = 0.0;
      for (Eigen::Index j = 0; j < 20; ++j) e += (frames(t, j) - out(0, j)) * (frames(t, j) - out(0, j));
      sum += e;
    }
    const double score = anomaly_score(m, frames);
    CHECK(std::abs(score - sum / 13.0) <= 1e-10 * std::max(1.0, score));
    CHECK(score >= 0.0);
    CHECK(anomaly_score(m, frames) == score);
    CHECK_THROWS_AS(anomaly_score(m, Matrix(0, 20)), DataError);
  }

  TEST_CASE("decide uses a strict threshold") {
    CHECK(decide(0.5, 0.5) == Decision::kNormal);
    CHECK(decide(0.6, 0.5) == Decision::kAnomaly);
    CHECK(decide(-1.0, 0.0) == Decision::kNormal);
  }

  TEST_CASE("gradients of the 320-dim autoencoder match finite differences") {
    const auto m = build_baseline_ae(320, 8);
    const Matrix x = testing::random_matrix(4, 320, 9);
    const auto rec = nn::forward(m.network, x);
    const auto g = nn::backward(m.network, rec, nn::mse_loss(rec.output(), x).grad);
    const auto res = testing::check_squared_error_gradients(m.network, g, x, x, 60, 10);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-5);
  }

  TEST_CASE("training on synthetic normals lowers the loss and is deterministic") {
    const auto spec = testing::two_tone_spec();
    const auto clips = testing::synth_clips(spec, Split::kTrain, Label::kNormal, 4).at({"synth", 0});
    const auto a = train_baseline(clips, {"synth", 0}, quick_config(5), 3);
    const auto b = train_baseline(clips, {"synth", 0}, quick_config(5), 3);
    REQUIRE(a.loss_history.size() == 5);
    CHECK(a.loss_history.back() < a.loss_history.front());
    CHECK(a.loss_history == b.loss_history);
    CHECK(nn::encode_checkpoint(a.model.network, 0) == nn::encode_checkpoint(b.model.network, 0));
    CHECK(a.model.machine == MachineKey{"synth", 0});
  }

  TEST_CASE("a constant tone is learned to within one percent of the initial error") {
    const std::vector<AudioClip> clips{testing::tone_clip(1000.0, 2.0)};
    BaselineConfig cfg;
    cfg.train.epochs = 0;
    const double initial = anomaly_score(train_baseline(clips, {"tone", 0}, cfg, 5).model, clips[0]);
    cfg.train.epochs = 1500;
    cfg.train.batch_size = 16;
    const auto trained = train_baseline(clips, {"tone", 0}, cfg, 5);
    const double final_error = anomaly_score(trained.model, clips[0]);
    INFO("initial " << initial << " final " << final_error);
    CHECK(final_error < 0.01 * initial);
  }

  TEST_CASE("anomalous clips score higher than normal clips") {
    const auto spec = testing::two_tone_spec();
    const MachineKey key{"synth", 0};
    const auto train = testing::synth_clips(spec, Split::kTrain, Label::kNormal, 6).at(key);
    const auto model = train_baseline(train, key, quick_config(30), 1).model;
    double normal = 0.0, anomalous = 0.0;
    const auto n = testing::synth_clips(spec, Split::kTest, Label::kNormal, 5).at(key);
    const auto a = testing::synth_clips(spec, Split::kTest, Label::kAnomaly, 5).at(key);
    for (const auto& c : n) normal += anomaly_score(model, c);
    for (const auto& c : a) anomalous += anomaly_score(model, c);
    CHECK(anomalous / 5.0 > normal / 5.0);
  }

  TEST_CASE("training needs clips and names the clip that fails") {
    CHECK_THROWS_AS(train_baseline({}, {"synth", 0}, quick_config(1), 1), ConfigError);
    AudioClip tiny = testing::tone_clip(500.0, 0.05);
    tiny.source_name = "tiny_clip.wav";
    const std::vector<AudioClip> clips{testing::tone_clip(500.0, 1.0), tiny};
    CHECK_THROWS_WITH_AS(train_baseline(clips, {"synth", 0}, quick_config(1), 1), doctest::Contains("tiny_clip.wav"),
                         DataError);
  }

  TEST_CASE("model files round trip") {
    testing::TempDir dir("ae");
    auto m = build_baseline_ae(320, 6);
    m.machine = {"fan", 3};
    const auto manifest = save_ae_model(m, dir.path(), "cafe");
    CHECK(manifest.filename() == "ae_fan_id_03.json");
    CHECK(std::filesystem::exists(dir / "ae_fan_id_03.model"));
    const auto back = load_ae_model(manifest);
    CHECK(back.machine == m.machine);
    CHECK(nn::encode_checkpoint(back.network, 0) == nn::encode_checkpoint(m.network, 0));
    CHECK(back.features.hash() == m.features.hash());
    const Matrix x = testing::random_matrix(3, 320, 2);
    CHECK(anomaly_score(back, x) == anomaly_score(m, x));
  }

  TEST_CASE("a manifest whose features disagree with the checkpoint is rejected") {
    testing::TempDir dir("ae");
    auto m = build_baseline_ae(320, 6);
    m.machine = {"fan", 3};
    const auto manifest = save_ae_model(m, dir.path());
    std::string text = read_file(manifest);
    const auto at = text.find("\"n_mels\": 64");
    REQUIRE(at != std::string::npos);
    text.replace(at, 12, "\"n_mels\": 32");
    write_file_atomic(manifest, text);
    CHECK_THROWS(load_ae_model(manifest));
  }
}
