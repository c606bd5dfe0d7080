#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "wadiro/errors.hpp"
#include "wadiro/model.hpp"

using namespace wadiro;

namespace {

ScalerState identity_scaler(Eigen::Index d) {
  ScalerState s;
  s.means = Eigen::VectorXd::Zero(d + 1);
  s.stdevs = Eigen::VectorXd::Ones(d + 1);
  return s;
}

ScnnModel train_small_model(unsigned seed, bool with_bias, Program program = Program::wadiro_l1) {
  auto data = oracles::random_dataset(25, 3, seed);
  auto [std_data, scaler] = standardize(data, std::nullopt, ScaleMode::fit_transform);
  auto s = gen_sampling_vectors(std_data, 6, seed + 50, true);
  TrainConfig cfg;
  cfg.program = program;
  cfg.epsilon = 0.01;
  cfg.with_bias = with_bias;
  auto [w, report] = train(std_data, s, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  ScnnModel model;
  model.raw = w;
  model.sampling = s;
  model.scaler = scaler;
  model.with_bias = with_bias;
  model.provenance = make_provenance(cfg, report, static_cast<int>(s.count()));
  return model;
}

}  // namespace

TEST_CASE("zero weights predict the label mean") {
  ScnnModel model;
  model.raw.nu = Eigen::MatrixXd::Zero(3, 2);
  model.raw.omega = Eigen::MatrixXd::Zero(3, 2);
  model.sampling.vectors = Eigen::MatrixXd::Random(3, 2);
  model.scaler = identity_scaler(2);
  model.scaler.means[2] = 7.5;  // label mean
  CHECK(predict(model, Eigen::Vector2d(0.3, -2.0)) == doctest::Approx(7.5));
}

TEST_CASE("zero training loss reproduces the labels") {
  Dataset data;
  data.features.resize(1, 1);
  data.features << 1.0;
  data.labels.resize(1);
  data.labels << 2.0;
  SamplingSet s;
  s.vectors.resize(1, 1);
  s.vectors << 1.0;
  TrainConfig cfg;
  cfg.program = Program::scnn_l1;
  auto [w, report] = train(data, s, cfg);
  REQUIRE(report.status == SolveStatus::optimal);
  ScnnModel model;
  model.raw = w;
  model.sampling = s;
  model.scaler = identity_scaler(1);
  CHECK(predict(model, Eigen::VectorXd::Constant(1, 1.0)) ==
        doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("prediction is linear in the weights at fixed gates") {
  auto model = train_small_model(3, false);
  auto doubled = model;
  doubled.raw.nu *= 2.0;
  doubled.raw.omega *= 2.0;
  std::mt19937 rng(4);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd x(3);
    for (int k = 0; k < 3; ++k) x[k] = dist(rng);
    CHECK(predict_standardized(doubled, x) ==
          doctest::Approx(2.0 * predict_standardized(model, x)).epsilon(1e-12));
  }
}

TEST_CASE("snn mapping follows the square-root split") {
  ScnnModel model;
  model.raw.nu.resize(2, 2);
  model.raw.nu << 4, 0, 0, 0;
  model.raw.omega.resize(2, 2);
  model.raw.omega << 0, 0, 0, 9;
  model.sampling.vectors = Eigen::MatrixXd::Identity(2, 2);
  model.scaler = identity_scaler(2);

  const auto snn = map_to_snn(model);
  REQUIRE(snn.neuron_count() == 2);  // two zero blocks dropped
  CHECK(snn.w1.row(0) == Eigen::RowVector2d(2, 0));
  CHECK(snn.w2[0] == doctest::Approx(2.0));
  CHECK(snn.w1.row(1) == Eigen::RowVector2d(0, 3));
  CHECK(snn.w2[1] == doctest::Approx(-3.0));

  CHECK(predict_snn(snn, Eigen::Vector2d(1, 0)) == doctest::Approx(4.0));
  // Every ReLU input negative: the output vanishes.
  CHECK(predict_snn(snn, Eigen::Vector2d(-1, -1)) == doctest::Approx(0.0));
}

TEST_CASE("training-point equivalence of the two prediction forms") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    auto data = oracles::random_dataset(25, 3, seed + 200);
    auto [std_data, scaler] = standardize(data, std::nullopt, ScaleMode::fit_transform);
    auto s = gen_sampling_vectors(std_data, 5, seed, true);
    TrainConfig cfg;
    cfg.program = seed % 2 == 0 ? Program::wadiro_l1 : Program::scnn_l1;
    cfg.epsilon = 0.02;
    cfg.with_bias = seed % 2 == 1;
    auto [w, report] = train(std_data, s, cfg);
    REQUIRE(report.status == SolveStatus::optimal);
    ScnnModel model;
    model.raw = w;
    model.sampling = s;
    model.scaler = scaler;
    model.with_bias = cfg.with_bias;
    const auto snn = map_to_snn(model);
    for (Eigen::Index j = 0; j < std_data.size(); ++j) {
      const Eigen::VectorXd x = std_data.features.row(j).transpose();
      CHECK(std::abs(predict_standardized(model, x) - predict_snn(snn, x)) <= 1e-6);
    }
    // Off the training points the gap is reported, not asserted.
    const double rate = gate_disagreement_rate(model, std_data.features);
    CHECK(rate >= 0.0);
    CHECK(rate <= 1.0);
  }
}

TEST_CASE("model file round-trip is exact and canonical") {
  const auto dir = std::filesystem::temp_directory_path() / "wadiro_model_test";
  std::filesystem::create_directories(dir);
  auto model = train_small_model(11, true);
  const auto path = dir / "model.json";
  save_model(model, path);
  save_model(model, dir / "model2.json");

  // Two saves of the same model are byte-identical.
  std::ifstream a(path), b(dir / "model2.json");
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);

  const auto loaded = load_model(path);
  std::mt19937 rng(9);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd x(3);
    for (int k = 0; k < 3; ++k) x[k] = dist(rng);
    CHECK(predict(model, x) == predict(loaded, x));  // bit-equal round trip
  }
  CHECK(loaded.provenance.program == model.provenance.program);
  CHECK(loaded.sampling.vectors == model.sampling.vectors);
  std::filesystem::remove_all(dir);
}

TEST_CASE("schema and parse failures are explicit") {
  const auto dir = std::filesystem::temp_directory_path() / "wadiro_model_err";
  std::filesystem::create_directories(dir);
  auto model = train_small_model(13, false);
  const auto path = dir / "model.json";
  save_model(model, path);

  // Future schema version: explicit version error, no partial model.
  auto text = model_to_json(model);
  const auto pos = text.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  auto future = text;
  future.replace(pos, std::string("\"schema_version\": 1").size(), "\"schema_version\": 99");
  CHECK_THROWS_AS(model_from_json(future), SchemaError);

  // Truncated file: parse error naming a byte offset.
  const auto truncated = text.substr(0, text.size() / 2);
  try {
    model_from_json(truncated);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.byte_offset > 0);
  }
  std::filesystem::remove_all(dir);
}
