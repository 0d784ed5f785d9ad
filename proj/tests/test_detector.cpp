#include "synthdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers/test_util.hpp"
#include "synthdet/common.hpp"
#include "synthdet/rng.hpp"

using namespace synthdet;
using testutil::ScratchDir;

namespace {

Image random_image(int res, std::uint64_t seed) {
  Rng rng(seed);
  Image img(res, res);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

std::vector<Image> toy_pool(int n, int res, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.batch_seed = seed;
  spec.batch_size = n;
  spec.resolution = res;
  return generate_batch(spec, ToyGenerator()).images;
}

DetectorConfig tiny_config(int steps = 3) {
  DetectorConfig config;
  config.input_resolution = 16;
  config.batch_size = 3;
  config.steps_per_epoch = steps;
  config.epochs = 1;
  config.optimizer_seed = 5;
  return config;
}

}  // namespace

TEST_CASE("labels parse and print consistently") {
  CHECK(label_name(Label::Real) == std::string("real"));
  CHECK(label_name(Label::Fake) == std::string("fake"));
  CHECK(parse_label("real") == Label::Real);
  CHECK(parse_label("fake") == Label::Fake);
  CHECK_THROWS_AS((void)parse_label("genuine"), ValidationError);
}

TEST_CASE("config validation rejects each bad field") {
  DetectorConfig config;
  CHECK_NOTHROW(config.validate());

  auto expect_invalid = [](DetectorConfig c) {
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  DetectorConfig c = config;
  c.input_resolution = 0;
  expect_invalid(c);
  c = config;
  c.optimizer = "rmsprop";
  expect_invalid(c);
  c = config;
  c.learning_rate = 0.0;
  expect_invalid(c);
  c = config;
  c.momentum = 1.0;
  expect_invalid(c);
  c = config;
  c.polyak_tail = -0.5;
  expect_invalid(c);
  c = config;
  c.batch_size = 1;
  expect_invalid(c);
  c = config;
  c.steps_per_epoch = 0;
  expect_invalid(c);
  c = config;
  c.epochs = -1;
  expect_invalid(c);
}

TEST_CASE("architecture registry") {
  const auto ids = architecture_ids();
  CHECK(std::find(ids.begin(), ids.end(), "tiny-cnn") != ids.end());
  CHECK(std::find(ids.begin(), ids.end(), "tiny-cnn-smooth") != ids.end());
  CHECK_THROWS_AS((void)get_architecture("resnet50"), ConfigError);

  // Parameter count from the layer shapes: 10 input feature channels,
  // three 3x3 conv blocks of 12/24/48 channels, then a 2-way dense head.
  const Architecture& arch = get_architecture("tiny-cnn");
  const std::size_t expect = 10 * 12 * 9 + 12 + 12 * 24 * 9 + 24 +
                             24 * 48 * 9 + 48 + 2 * 48 + 2;
  CHECK(arch.param_count(64) == expect);
  CHECK(arch.param_count(16) == expect);  // conv stack is resolution-free
  CHECK(arch.differentiable());
}

TEST_CASE("make_detector seeds deterministically") {
  DetectorConfig config = tiny_config();
  const DetectorModel a = make_detector(config);
  const DetectorModel b = make_detector(config);
  CHECK(a.params == b.params);
  CHECK(a.train_type == "UNTRAINED");
  CHECK(a.params.size() == a.arch().param_count(config.input_resolution));

  config.optimizer_seed = 6;
  const DetectorModel c = make_detector(config);
  CHECK(a.params != c.params);

  config.architecture_id = "alexnet";
  CHECK_THROWS_AS((void)make_detector(config), ConfigError);
  config = tiny_config();
  config.input_resolution = 20;  // not a multiple of 8
  CHECK_THROWS_AS((void)make_detector(config), ConfigError);
}

TEST_CASE("predict returns a softmax over two classes") {
  const DetectorModel model = make_detector(tiny_config());
  const Image img = random_image(16, 42);
  const auto p = predict(model, img);
  CHECK(p[0] >= 0.0);
  CHECK(p[1] >= 0.0);
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-9));

  const auto q = predict(model, img);
  CHECK(p[0] == q[0]);
  CHECK(p[1] == q[1]);

  // Serial and parallel paths agree bit for bit.
  const auto s = predict(model, img, Exec::Serial);
  CHECK(p[0] == s[0]);
  CHECK(p[1] == s[1]);

  CHECK_THROWS_AS((void)predict(model, random_image(24, 1)), ValidationError);
}

TEST_CASE("decide breaks ties toward the fake class") {
  CHECK(decide({0.7, 0.3}) == Label::Real);
  CHECK(decide({0.3, 0.7}) == Label::Fake);
  CHECK(decide({0.5, 0.5}) == Label::Fake);
}

TEST_CASE("zero epochs leaves the seeded initialization untouched") {
  DetectorConfig config = tiny_config();
  config.epochs = 0;
  const DetectorModel init = make_detector(config);
  const DetectorModel trained =
      train(ToyGenerator(), make_training_stream(1, config), BlendSwap(),
            config);
  CHECK(trained.params == init.params);
  CHECK(trained.loss_history.empty());
  CHECK(trained.train_type == "SYNTHETIC_TRAINED");
  CHECK(trained.train_swap_backend == "blend");
}

TEST_CASE("training records per-step losses and distinct batch seeds") {
  DetectorConfig config = tiny_config(4);
  config.epochs = 2;

  std::vector<StepInfo> steps;
  const DetectorModel model =
      train(ToyGenerator(), make_training_stream(77, config), BlendSwap(),
            config, [&](const StepInfo& info) { steps.push_back(info); });

  REQUIRE(model.loss_history.size() == 8);  // steps_per_epoch * epochs
  REQUIRE(steps.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(steps[i].step == i);
    CHECK(steps[i].real_count == config.batch_size);
    CHECK(steps[i].fake_count == config.batch_size - 1);
    CHECK(steps[i].loss == model.loss_history[i]);
    CHECK(std::isfinite(model.loss_history[i]));
    CHECK(model.loss_history[i] > 0.0);
  }
  const std::set<std::uint64_t> seeds(model.batch_seeds.begin(),
                                      model.batch_seeds.end());
  CHECK(seeds.size() == model.batch_seeds.size());
  CHECK(model.batch_seeds.size() == 8);

  // A stream that repeats one batch seed is rejected.
  auto repeating = [&](int) {
    GeneratorSpec spec;
    spec.batch_seed = 9;
    spec.batch_size = config.batch_size;
    spec.resolution = config.input_resolution;
    return spec;
  };
  CHECK_THROWS_AS(
      (void)train(ToyGenerator(), repeating, BlendSwap(), config),
      ValidationError);
}

TEST_CASE("training is reproducible end to end") {
  const DetectorConfig config = tiny_config(3);
  const auto stream = make_training_stream(11, config);
  const DetectorModel a = train(ToyGenerator(), stream, BlendSwap(), config);
  const DetectorModel b = train(ToyGenerator(), stream, BlendSwap(), config);
  CHECK(a.params == b.params);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.batch_seeds == b.batch_seeds);
}

TEST_CASE("optimizer variants all make progress and stay reproducible") {
  DetectorConfig config = tiny_config(3);
  const auto stream = make_training_stream(21, config);
  for (const char* opt : {"sgd", "adam"}) {
    CAPTURE(opt);
    config.optimizer = opt;
    config.momentum = opt == std::string("sgd") ? 0.9 : 0.0;
    const DetectorModel a = train(ToyGenerator(), stream, BlendSwap(), config);
    const DetectorModel b = train(ToyGenerator(), stream, BlendSwap(), config);
    CHECK(a.params == b.params);
    CHECK(a.loss_history.size() == 3);
  }
}

TEST_CASE("training stream derives specs from the base seed") {
  DetectorConfig config = tiny_config();
  const auto stream = make_training_stream(1000, config);
  const GeneratorSpec s0 = stream(0);
  const GeneratorSpec s1 = stream(1);
  CHECK(s0.batch_seed == 1000);
  CHECK(s1.batch_seed == 1001);
  CHECK(s0.batch_size == config.batch_size);
  CHECK(s0.resolution == config.input_resolution);
  CHECK(s0.truncation_psi >= 0.0);
  CHECK(s0.truncation_psi <= 1.0);
  CHECK(s0.truncation_psi != s1.truncation_psi);
  CHECK(stream(0).truncation_psi == s0.truncation_psi);
}

TEST_CASE("train_on_images uses a fixed pool") {
  const auto pool = toy_pool(6, 16, 900);
  DetectorConfig config = tiny_config(2);
  const DetectorModel model = train_on_images(pool, BlendSwap(), config);
  CHECK(model.train_type == "REAL_TRAINED");
  CHECK(model.loss_history.size() == 2);
  CHECK(model.batch_seeds.empty());

  CHECK_THROWS_AS((void)train_on_images(toy_pool(2, 16, 901), BlendSwap(),
                                        config),
                  ValidationError);
}

TEST_CASE("finetune returns a new model and preserves the input") {
  const auto pool = toy_pool(8, 16, 910);
  DetectorConfig config = tiny_config(2);
  const DetectorModel base =
      train(ToyGenerator(), make_training_stream(31, config), BlendSwap(),
            config);
  const std::vector<double> base_params = base.params;

  const DetectorModel tuned = finetune(base, pool, RecolorSwap(), 8, config);
  CHECK(base.params == base_params);
  CHECK(base.train_type == "SYNTHETIC_TRAINED");
  CHECK(tuned.train_type == "FINETUNED");
  CHECK(tuned.train_swap_backend == "recolor");
  CHECK(tuned.params != base.params);

  SUBCASE("zero-epoch finetune keeps the parameters") {
    DetectorConfig frozen = config;
    frozen.epochs = 0;
    const DetectorModel same = finetune(base, pool, BlendSwap(), 8, frozen);
    CHECK(same.params == base.params);
    CHECK(same.train_type == "FINETUNED");
  }
  SUBCASE("insufficient images are rejected") {
    CHECK_THROWS_AS((void)finetune(base, pool, BlendSwap(), 20, config),
                    ValidationError);
    CHECK_THROWS_AS((void)finetune(base, pool, BlendSwap(), 0, config),
                    ValidationError);
  }
  SUBCASE("architecture changes are rejected") {
    DetectorConfig other = config;
    other.input_resolution = 32;
    CHECK_THROWS_AS((void)finetune(base, toy_pool(8, 32, 911), BlendSwap(), 8,
                                   other),
                    ValidationError);
  }
}

TEST_CASE("input gradients match finite differences on the smooth stack") {
  DetectorConfig config = tiny_config();
  config.architecture_id = "tiny-cnn-smooth";
  DetectorModel model = make_detector(config);
  // Nudge the head away from its zero initialization so logits depend on
  // the input.
  Rng rng(8);
  for (double& p : model.params) p += rng.uniform(-0.05, 0.05);

  const Image img = random_image(16, 123);
  const Image grad = input_gradient(model, img, 1);
  REQUIRE(grad.width() == 16);
  REQUIRE(grad.height() == 16);

  Rng pick(9);
  const double eps = 1e-5;
  for (int k = 0; k < 40; ++k) {
    const int c = static_cast<int>(pick.below(3));
    const int y = static_cast<int>(pick.below(16));
    const int x = static_cast<int>(pick.below(16));
    Image lo = img, hi = img;
    lo.at(c, y, x) -= eps;
    hi.at(c, y, x) += eps;
    const double fd = (class_logit(model, hi, 1, Exec::Serial) -
                       class_logit(model, lo, 1, Exec::Serial)) /
                      (2 * eps);
    CHECK(grad.at(c, y, x) == doctest::Approx(fd).epsilon(5e-4).scale(1.0));
  }
}

TEST_CASE("input gradient scales linearly with the head weights") {
  DetectorConfig config = tiny_config();
  config.architecture_id = "tiny-cnn-smooth";
  DetectorModel model = make_detector(config);
  Rng rng(15);
  for (double& p : model.params) p += rng.uniform(-0.05, 0.05);
  const Image img = random_image(16, 321);
  const Image g1 = input_gradient(model, img, 0);

  // Doubling the dense head doubles the logit, hence its input gradient.
  DetectorModel doubled = model;
  const std::size_t head = 2 * 48 + 2;
  for (std::size_t i = doubled.params.size() - head; i < doubled.params.size();
       ++i)
    doubled.params[i] *= 2.0;
  const Image g2 = input_gradient(doubled, img, 0);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g2.data()[i] == doctest::Approx(2.0 * g1.data()[i]).epsilon(1e-9));
}

TEST_CASE("class_logit agrees with predict through the softmax") {
  const DetectorModel model = make_detector(tiny_config());
  const Image img = random_image(16, 77);
  const double l0 = class_logit(model, img, 0);
  const double l1 = class_logit(model, img, 1);
  const auto p = predict(model, img);
  CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(l0 - l1))).epsilon(1e-9));
  CHECK_THROWS_AS((void)class_logit(model, img, 2), ValidationError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
  ScratchDir scratch;
  DetectorConfig config = tiny_config(2);
  config.optimizer = "adam";
  config.polyak_tail = 0.25;
  const DetectorModel model =
      train(ToyGenerator(), make_training_stream(55, config), RecolorSwap(),
            config);

  const std::string path = scratch.file("model.json");
  save_checkpoint(model, path);
  const DetectorModel back = load_checkpoint(path);
  CHECK(back.params == model.params);  // exact, hex-encoded doubles
  CHECK(back.architecture_id == model.architecture_id);
  CHECK(back.train_type == model.train_type);
  CHECK(back.train_swap_backend == model.train_swap_backend);
  CHECK(back.loss_history == model.loss_history);
  CHECK(back.batch_seeds == model.batch_seeds);
  CHECK(back.config.optimizer == "adam");
  CHECK(back.config.polyak_tail == 0.25);
  CHECK(back.config.learning_rate == model.config.learning_rate);
  CHECK(back.label_convention == kLabelConvention);

  // Saving twice produces identical bytes.
  const std::string path2 = scratch.file("model2.json");
  save_checkpoint(model, path2);
  CHECK(testutil::read_file(path) == testutil::read_file(path2));

  // Reloaded models predict identically.
  const Image img = random_image(16, 99);
  CHECK(predict(model, img) == predict(back, img));
}

TEST_CASE("checkpoint loading rejects malformed files") {
  ScratchDir scratch;
  CHECK_THROWS_AS((void)load_checkpoint(scratch.file("none.json")), IoError);

  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(scratch.file(name), std::ios::binary);
    out << body;
    return scratch.file(name);
  };
  CHECK_THROWS_AS((void)load_checkpoint(write("garbage.json", "{oops")),
                  IoError);
  CHECK_THROWS_AS(
      (void)load_checkpoint(write("fmt.json", R"({"format":"other"})")),
      IoError);

  const DetectorModel model = make_detector(tiny_config());
  const std::string good = scratch.file("good.json");
  save_checkpoint(model, good);
  std::string text = testutil::read_file(good);

  // Bump the version field.
  const auto vpos = text.find("\"version\": 1");
  REQUIRE(vpos != std::string::npos);
  std::string bumped = text;
  bumped.replace(vpos, std::string("\"version\": 1").size(), "\"version\": 9");
  CHECK_THROWS_AS((void)load_checkpoint(write("version.json", bumped)),
                  IoError);

  // Truncate the parameter payload (remove 16 hex digits).
  const auto hpos = text.find("params_hex");
  REQUIRE(hpos != std::string::npos);
  std::string cut = text;
  cut.erase(hpos + 14, 16);
  CHECK_THROWS_AS((void)load_checkpoint(write("short.json", cut)), IoError);
}
