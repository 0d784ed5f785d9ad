#include "synthdet/generator.hpp"

#include <cmath>
#include <set>

#include "doctest.h"
#include "synthdet/common.hpp"

using namespace synthdet;

namespace {

struct StubGenerator final : GeneratorBackend {
  int count;
  int res;
  double pixel;
  StubGenerator(int count, int res, double pixel = 0.5)
      : count(count), res(res), pixel(pixel) {}
  std::string id() const override { return "stub"; }
  SyntheticBatch generate(const GeneratorSpec& spec) const override {
    SyntheticBatch batch;
    batch.spec = spec;
    batch.generator_id = id();
    for (int i = 0; i < count; ++i) {
      Image img(res, res);
      for (std::size_t k = 0; k < img.size(); ++k) img.data()[k] = pixel;
      batch.images.push_back(std::move(img));
    }
    return batch;
  }
};

double face_region_mean(const Image& img) {
  // Central patch well inside every face oval.
  double s = 0.0;
  int n = 0;
  const int c0 = img.width() / 2 - 2;
  for (int c = 0; c < 3; ++c)
    for (int y = c0; y < c0 + 4; ++y)
      for (int x = c0; x < c0 + 4; ++x) {
        s += img.at(c, y, x);
        ++n;
      }
  return s / n;
}

}  // namespace

TEST_CASE("sample_truncation stays in [0,1] with the right center") {
  Rng rng(3);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = sample_truncation(rng);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.02);

  // An in-range first draw passes through unmodified.
  Rng probe(17), replay(17);
  const double direct = probe.normal(0.5, 0.25);
  if (direct >= 0.0 && direct <= 1.0)
    CHECK(sample_truncation(replay) == direct);
}

TEST_CASE("generator spec validation") {
  GeneratorSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.truncation_psi = 1.5;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.truncation_psi = -0.1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.batch_size = 0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = {};
  spec.resolution = -64;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("generate_batch enforces the backend contract") {
  GeneratorSpec spec;
  spec.batch_size = 4;
  spec.resolution = 16;

  SUBCASE("short batch is an adapter error") {
    CHECK_THROWS_AS((void)generate_batch(spec, StubGenerator(3, 16)),
                    AdapterError);
  }
  SUBCASE("wrong resolution is a capability error") {
    CHECK_THROWS_AS((void)generate_batch(spec, StubGenerator(4, 32)),
                    ConfigError);
  }
  SUBCASE("out-of-range pixels are an adapter error") {
    CHECK_THROWS_AS((void)generate_batch(spec, StubGenerator(4, 16, 1.5)),
                    AdapterError);
  }
  SUBCASE("conforming batch passes through") {
    const SyntheticBatch batch = generate_batch(spec, StubGenerator(4, 16));
    CHECK(batch.images.size() == 4);
    CHECK(batch.generator_id == "stub");
  }
}

TEST_CASE("toy batches are deterministic in the seed") {
  GeneratorSpec spec;
  spec.batch_seed = 7;
  spec.batch_size = 12;
  spec.resolution = 32;
  const ToyGenerator gen;
  const SyntheticBatch a = generate_batch(spec, gen);
  const SyntheticBatch b = generate_batch(spec, gen);
  REQUIRE(a.images.size() == 12);
  REQUIRE(b.images.size() == 12);
  for (int i = 0; i < 12; ++i)
    CHECK(max_abs_diff(a.images[i], b.images[i]) == 0.0);
  REQUIRE(a.ground_truth_demographics.has_value());
  CHECK(a.ground_truth_demographics->size() == 12);

  spec.batch_seed = 8;
  const SyntheticBatch c = generate_batch(spec, gen);
  CHECK(max_abs_diff(a.images[0], c.images[0]) > 0.0);

  for (const Image& img : a.images)
    for (std::size_t k = 0; k < img.size(); ++k) {
      CHECK(img.data()[k] >= 0.0);
      CHECK(img.data()[k] <= 1.0);
    }
}

TEST_CASE("face parameter sampling respects the documented bands") {
  Rng rng(99);
  std::set<int> tones, buckets;
  std::set<Gender> genders;
  for (int i = 0; i < 1000; ++i) {
    const FaceParams p = sample_face_params(rng, 1.0);
    CHECK_NOTHROW(p.validate());
    tones.insert(p.skin_tone_index);
    genders.insert(p.gender);
    buckets.insert(p.wrinkle_count);
    if (p.gender == Gender::Male) {
      CHECK(p.face_width_frac >= 0.1825);
      CHECK(p.face_width_frac <= 0.2075);
    } else {
      CHECK(p.face_width_frac >= 0.1475);
      CHECK(p.face_width_frac <= 0.1725);
    }
    CHECK(p.face_height_frac >= 0.255);
    CHECK(p.face_height_frac <= 0.285);
    CHECK(p.wrinkle_count >= 1);
    CHECK(p.wrinkle_count <= 7);
  }
  CHECK(tones.size() == static_cast<std::size_t>(kEthnicityCount));
  CHECK(genders.size() == 2);
  CHECK(buckets == std::set<int>{1, 2, 3, 4, 5, 6, 7});

  // psi = 0 pins the geometry to the band centers.
  Rng pinned(5);
  const FaceParams p0 = sample_face_params(pinned, 0.0);
  const double center =
      p0.gender == Gender::Male ? 0.195 : 0.160;
  CHECK(p0.face_width_frac == doctest::Approx(center));
  CHECK(p0.face_height_frac == doctest::Approx(0.270));
  CHECK(p0.tone_jitter[0] == 0.0);
  CHECK(p0.pupil_offset == 0.0);
  CHECK(p0.mouth_width_scale == doctest::Approx(1.0));
}

TEST_CASE("face parameter validation rejects out-of-band values") {
  Rng rng(1);
  FaceParams p = sample_face_params(rng, 0.5);
  CHECK_NOTHROW(p.validate());

  FaceParams bad = p;
  bad.skin_tone_index = 6;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.face_width_frac = 0.25;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.tone_jitter[1] = 0.2;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.mouth_width_scale = 2.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.accent_strength = 0.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = p;
  bad.bg_freq_u = 9.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("renderer encodes the demographic profile it reports") {
  Rng rng(21);
  FaceParams p = sample_face_params(rng, 0.5);
  p.skin_tone_index = 3;  // darkest tone band
  p.wrinkle_count = 5;
  p.gender = Gender::Female;
  p.face_width_frac = 0.160;

  const RenderedFace face = toy_render_face(p, 48);
  CHECK(face.profile.ethnicity == Ethnicity::Black);
  CHECK(face.profile.gender == Gender::Female);
  CHECK(face.profile.age_bucket == 5);

  // Same parameters render the same pixels.
  const RenderedFace again = toy_render_face(p, 48);
  CHECK(max_abs_diff(face.image, again.image) == 0.0);

  // The darkest tone band renders a visibly darker face than the lightest.
  FaceParams light = p;
  light.skin_tone_index = 0;
  const RenderedFace pale = toy_render_face(light, 48);
  CHECK(face_region_mean(face.image) + 0.2 < face_region_mean(pale.image));

  CHECK_THROWS_AS((void)toy_render_face(p, 0), ValidationError);
}

TEST_CASE("shifted background style changes the scene, not the face code") {
  Rng rng(33);
  const FaceParams p = sample_face_params(rng, 0.5);
  const RenderedFace plain = toy_render_face(p, 32, ToyStyle::Default);
  const RenderedFace shifted = toy_render_face(p, 32, ToyStyle::ShiftedBackground);
  CHECK(max_abs_diff(plain.image, shifted.image) > 0.01);
  CHECK(plain.profile.ethnicity == shifted.profile.ethnicity);
  CHECK(plain.profile.gender == shifted.profile.gender);
  CHECK(plain.profile.age_bucket == shifted.profile.age_bucket);
}

TEST_CASE("generator factory resolves known names only") {
  CHECK(make_generator("toy")->id() == "toy");
  CHECK(make_generator("toy-shifted")->id() == "toy-shifted");
  CHECK(make_generator("external:mygen")->id() == "external:mygen");
  CHECK_THROWS_AS((void)make_generator("gan9000"), ConfigError);
}
