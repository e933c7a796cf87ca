#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmada/config.hpp"

using namespace dmada;

TEST_CASE("defaults mirror the documented hyperparameters") {
  RunConfig cfg;
  CHECK(cfg.alpha == 2.0);
  CHECK(cfg.omega == 0.1);
  CHECK(cfg.phi == 0.01);
  CHECK(cfg.learning_rate == 0.0004);
  CHECK(cfg.tau_start == 0.9);
  CHECK(cfg.tau_end == 0.6);
  CHECK(cfg.pixel_mixup);
  CHECK(cfg.feature_mixup);
  CHECK(cfg.task == "moons");
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parsing sections, comments and values") {
  const std::string text =
      "# experiment file\n"
      "[train]\n"
      "omega = 0.2\n"
      "epochs=7\n"
      "saturating_gen = true\n"
      "\n"
      "[data]\n"
      "task = digits  # trailing comment\n"
      "transform = rotate(20)\n";
  RunConfig cfg = RunConfig::parse(text, "inline");
  CHECK(cfg.omega == 0.2);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.saturating_gen);
  CHECK(cfg.task == "digits");
  CHECK(cfg.transform == "rotate(20)");
  CHECK(cfg.phi == 0.01);  // untouched default
}

TEST_CASE("parser rejects unknown keys with location") {
  CHECK_THROWS_WITH_AS(
      RunConfig::parse("[train]\nomege = 0.2\n", "bad.cfg"),
      doctest::Contains("bad.cfg:2"), ValueError);
  CHECK_THROWS_WITH_AS(
      RunConfig::parse("[nope]\nomega = 0.2\n", "bad.cfg"),
      doctest::Contains("nope"), ValueError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\nepochs = many\n", "bad.cfg"),
                  ValueError);
  CHECK_THROWS_AS(RunConfig::parse("[train]\nomega 0.1\n", "bad.cfg"),
                  ValueError);
  CHECK_THROWS_AS(RunConfig::parse("[train\nomega = 0.1\n", "bad.cfg"),
                  ValueError);
}

TEST_CASE("overrides in both spellings, rejected before any work") {
  RunConfig cfg;
  cfg.apply_override("omega=0.25");
  CHECK(cfg.omega == 0.25);
  cfg.apply_override("train.phi=0.05");
  CHECK(cfg.phi == 0.05);
  cfg.apply_override("toggles.triplet=false");
  CHECK_FALSE(cfg.triplet);
  cfg.apply_override("data.task=digits");
  CHECK(cfg.task == "digits");

  CHECK_THROWS_AS(cfg.apply_override("bogus=1"), ValueError);
  CHECK_THROWS_AS(cfg.apply_override("train.bogus=1"), ValueError);
  CHECK_THROWS_AS(cfg.apply_override("data.omega=1"), ValueError);  // wrong section
  CHECK_THROWS_AS(cfg.apply_override("omega"), ValueError);
}

TEST_CASE("ambiguous bare keys resolve by unique name") {
  RunConfig cfg;
  // every key name is unique across sections by construction
  cfg.apply_override("enc_width=42");
  CHECK(cfg.enc_width == 42);
}

TEST_CASE("snapshot round trips through the parser") {
  RunConfig cfg;
  cfg.omega = 0.12345678901234567;
  cfg.epochs = 42;
  cfg.task = "digits";
  cfg.saturating_gen = true;
  cfg.pixel_mixup = false;
  RunConfig back = RunConfig::parse(cfg.snapshot(), "snapshot");
  CHECK(back.omega == cfg.omega);  // full precision preserved
  CHECK(back.epochs == 42);
  CHECK(back.task == "digits");
  CHECK(back.saturating_gen);
  CHECK_FALSE(back.pixel_mixup);
  CHECK(back.snapshot() == cfg.snapshot());
}

TEST_CASE("validate catches out-of-range settings") {
  auto bad = [](auto&& mutate) {
    RunConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(cfg.validate(), ValueError);
  };
  bad([](RunConfig& c) { c.alpha = 0.0; });
  bad([](RunConfig& c) { c.omega = -0.1; });
  bad([](RunConfig& c) { c.phi = -1.0; });
  bad([](RunConfig& c) { c.learning_rate = 0.0; });
  bad([](RunConfig& c) { c.epochs = 0; });
  bad([](RunConfig& c) { c.batch_size = 0; });
  bad([](RunConfig& c) { c.tau_start = 1.5; });
  bad([](RunConfig& c) { c.tau_end = 0.95; });  // above tau_start
  bad([](RunConfig& c) { c.task = "galaxies"; });
  bad([](RunConfig& c) { c.d_z = 0; });
  bad([](RunConfig& c) { c.checkpoint_every = 0; });
  bad([](RunConfig& c) { c.eval_every = 0; });
  bad([](RunConfig& c) { c.hidden_layers = 0; });
}

TEST_CASE("dims_for copies the model section") {
  RunConfig cfg;
  cfg.d_z = 5;
  cfg.enc_width = 33;
  cfg.hidden_layers = 3;
  ModelDims d = cfg.dims_for(64, 10);
  CHECK(d.d_in == 64);
  CHECK(d.num_classes == 10);
  CHECK(d.d_z == 5);
  CHECK(d.enc_width == 33);
  CHECK(d.hidden_layers == 3);
  CHECK(d.classifier_in() == 10);
}
