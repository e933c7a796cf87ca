#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dmada/networks.hpp"
#include "helpers.hpp"

using namespace dmada;
using dmada::testing::random_tensor;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.d_in = 10;
  d.num_classes = 3;
  d.d_z = 4;
  d.d_noise = 2;
  d.enc_width = 8;
  d.dec_width = 8;
  d.cls_hidden = 6;
  d.disc_width = 8;
  d.d_f = 5;
  d.hidden_layers = 2;
  return d;
}

}  // namespace

TEST_CASE("derived dimensions") {
  ModelDims d = small_dims();
  CHECK(d.classifier_in() == 8);
  CHECK(d.decoder_in() == 2 * 4 + 2 + 3 + 1);
}

TEST_CASE("forward shapes across the four networks") {
  Rng rng(1);
  ModelDims d = small_dims();
  ModelSet models(d, rng);
  Tensor x = random_tensor({6, d.d_in}, rng);

  LatentCode code = models.encoder(x);
  CHECK(code.mu.shape() == Shape{6, d.d_z});
  CHECK(code.sigma.shape() == Shape{6, d.d_z});

  Tensor logits = models.classifier(code);
  CHECK(logits.shape() == Shape{6, d.num_classes});

  Tensor z = random_tensor({6, d.d_noise}, rng);
  Tensor block = Tensor::zeros({6, d.num_classes + 1});
  Tensor x_g = models.decoder(code, z, block);
  CHECK(x_g.shape() == Shape{6, d.d_in});
  for (double v : x_g.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  DiscriminatorOutput disc = models.discriminator(x);
  CHECK(disc.dom_score.shape() == Shape{6, 1});
  CHECK(disc.cls_logits.shape() == Shape{6, d.num_classes});
  CHECK(disc.features.shape() == Shape{6, d.d_f});
  for (double v : disc.dom_score.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("encoder sigma is strictly positive even for extreme inputs") {
  Rng rng(2);
  ModelSet models(small_dims(), rng);
  Tensor x = random_tensor({4, 10}, rng, false, 50.0);
  LatentCode code = models.encoder(x);
  for (double s : code.sigma.values()) CHECK(s > 0.0);
}

TEST_CASE("non-finite input is rejected") {
  Rng rng(3);
  ModelSet models(small_dims(), rng);
  Tensor x = Tensor::from({1, 10}, std::vector<double>(10, 0.0));
  x.mutable_values()[3] = std::nan("");
  CHECK_THROWS_AS(models.encoder(x), NumericError);
}

TEST_CASE("parameter registry: unique names, full partition") {
  Rng rng(4);
  ModelSet models(small_dims(), rng);
  auto all = models.params();
  std::set<std::string> names;
  for (auto* p : all) {
    CHECK(names.insert(p->name).second);
    CHECK(p->value.requires_grad());
  }
  std::size_t split = 0;
  for (auto which : {Subnet::encoder, Subnet::decoder, Subnet::classifier,
                     Subnet::discriminator})
    split += models.params(which).size();
  CHECK(split == all.size());
}

TEST_CASE("initialization is deterministic per seed") {
  ModelDims d = small_dims();
  Rng a(99), b(99), c(100);
  ModelSet m1(d, a), m2(d, b), m3(d, c);
  CHECK(m1.param_hash(Subnet::encoder) == m2.param_hash(Subnet::encoder));
  CHECK(m1.param_hash(Subnet::decoder) == m2.param_hash(Subnet::decoder));
  CHECK(m1.param_hash(Subnet::encoder) != m3.param_hash(Subnet::encoder));
}

TEST_CASE("param_hash reacts to any single value change") {
  Rng rng(5);
  ModelSet models(small_dims(), rng);
  const auto before = models.param_hash(Subnet::classifier);
  models.params(Subnet::classifier).front()->value.mutable_values()[0] += 1e-9;
  CHECK(models.param_hash(Subnet::classifier) != before);
}

TEST_CASE("weight initialization is centered with the expected spread") {
  ModelDims d = small_dims();
  d.enc_width = 256;
  d.d_in = 64;
  Rng rng(6);
  Encoder enc(d, rng);
  std::vector<Param*> ps;
  enc.collect(ps);
  // first trunk weight matrix: N(0, 2/64)
  const auto& w = ps.front()->value.values();
  double sum = 0.0, sum2 = 0.0;
  for (double v : w) {
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / w.size();
  const double var = sum2 / w.size() - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(2.0 / 64).epsilon(0.15));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(7);
  ModelSet models(small_dims(), rng);
  const auto path = std::filesystem::temp_directory_path() / "ck_test.bin";
  models.save_checkpoint(path);
  ModelSet loaded = ModelSet::load_checkpoint(path);
  auto a = models.params();
  auto b = loaded.params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value.values() == b[i]->value.values());
  }
  CHECK(models.param_hash(Subnet::discriminator) ==
        loaded.param_hash(Subnet::discriminator));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects corruption") {
  Rng rng(8);
  ModelSet models(small_dims(), rng);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "ck_corrupt.bin";
  models.save_checkpoint(path);

  // bad magic
  {
    std::fstream f(path,
                   std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
  }
  CHECK_THROWS_AS(ModelSet::load_checkpoint(path), IoError);

  // truncation
  models.save_checkpoint(path);
  const auto full_size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full_size / 2);
  CHECK_THROWS_AS(ModelSet::load_checkpoint(path), IoError);

  CHECK_THROWS_AS(ModelSet::load_checkpoint(dir / "ck_missing.bin"), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("set_learning_rate reaches every optimizer state") {
  Rng rng(9);
  ModelSet models(small_dims(), rng);
  models.set_learning_rate(0.123);
  for (auto* p : models.params()) CHECK(p->adam.learning_rate == 0.123);
}

TEST_CASE("zero_all_grads clears accumulated gradients") {
  Rng rng(10);
  ModelSet models(small_dims(), rng);
  Tensor x = random_tensor({3, 10}, rng);
  mean(models.encoder(x).mu).backward();
  bool any = false;
  for (auto* p : models.params(Subnet::encoder))
    if (p->value.has_grad())
      for (double g : p->value.grad()) any = any || g != 0.0;
  CHECK(any);
  models.zero_all_grads();
  for (auto* p : models.params())
    if (p->value.has_grad())
      for (double g : p->value.grad()) CHECK(g == 0.0);
}
