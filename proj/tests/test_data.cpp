#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dmada/data.hpp"
#include "helpers.hpp"

using namespace dmada;
namespace fs = std::filesystem;

namespace {

data::LabeledDataset random_dataset(std::size_t n, std::size_t d,
                                    std::size_t k, Rng& rng) {
  std::vector<double> img(n * d);
  for (auto& v : img) v = rng.uniform();
  data::LabeledDataset ds;
  ds.images = Tensor::from({n, d}, std::move(img));
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = static_cast<int>(rng.index(k));
  ds.name = "random";
  return ds;
}

struct TempFiles {
  fs::path images = fs::temp_directory_path() / "t_images.idx";
  fs::path labels = fs::temp_directory_path() / "t_labels.idx";
  ~TempFiles() {
    std::error_code ec;
    fs::remove(images, ec);
    fs::remove(labels, ec);
  }
};

}  // namespace

TEST_CASE("idx round trip is bit exact") {
  Rng rng(41);
  TempFiles tf;
  data::LabeledDataset ds = random_dataset(23, 16, 5, rng);
  ds.side = 4;
  data::save_idx(ds, tf.images, tf.labels);
  data::LabeledDataset back = data::load_idx(tf.images, tf.labels);
  CHECK(back.size() == 23);
  CHECK(back.side == 4);
  CHECK(back.labels == ds.labels);
  // pixels quantize to 8 bits on disk; writing the loaded copy again must
  // reproduce the same bytes
  TempFiles tf2;
  tf2.images = fs::temp_directory_path() / "t_images2.idx";
  tf2.labels = fs::temp_directory_path() / "t_labels2.idx";
  data::save_idx(back, tf2.images, tf2.labels);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  CHECK(slurp(tf.images) == slurp(tf2.images));
  CHECK(slurp(tf.labels) == slurp(tf2.labels));
}

TEST_CASE("idx loader reports distinct failures") {
  Rng rng(42);
  TempFiles tf;
  data::LabeledDataset ds = random_dataset(8, 4, 3, rng);
  ds.side = 2;
  data::save_idx(ds, tf.images, tf.labels);

  auto corrupt = [](const fs::path& p, std::streampos at, const char* bytes,
                    std::size_t n) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(at);
    f.write(bytes, n);
  };

  SUBCASE("bad images magic") {
    corrupt(tf.images, 0, "\xff\xff\xff\xff", 4);
    CHECK_THROWS_WITH_AS(data::load_idx(tf.images, tf.labels),
                         doctest::Contains("magic"), IoError);
  }
  SUBCASE("bad labels magic") {
    corrupt(tf.labels, 0, "\xff\xff\xff\xff", 4);
    CHECK_THROWS_WITH_AS(data::load_idx(tf.images, tf.labels),
                         doctest::Contains("magic"), IoError);
  }
  SUBCASE("truncated pixel payload") {
    fs::resize_file(tf.images, fs::file_size(tf.images) - 5);
    CHECK_THROWS_WITH_AS(data::load_idx(tf.images, tf.labels),
                         doctest::Contains("truncated"), IoError);
  }
  SUBCASE("image and label counts disagree") {
    // rewrite the label count field (bytes 4..7, big-endian)
    corrupt(tf.labels, 4, "\x00\x00\x00\x05", 4);
    CHECK_THROWS_WITH_AS(data::load_idx(tf.images, tf.labels),
                         doctest::Contains("count"), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(
        data::load_idx(fs::temp_directory_path() / "nope.idx", tf.labels),
        IoError);
  }
}

TEST_CASE("transform parsing and naming") {
  CHECK(std::holds_alternative<data::Invert>(data::parse_transform("invert")));
  auto rot = data::parse_transform("rotate(15)");
  CHECK(std::get<data::Rotate>(rot).degrees == doctest::Approx(15.0));
  auto noi = data::parse_transform("noise(0.2)");
  CHECK(std::get<data::GaussianNoise>(noi).stddev == doctest::Approx(0.2));
  auto sc = data::parse_transform("scale(0.5)");
  CHECK(std::get<data::IntensityScale>(sc).factor == doctest::Approx(0.5));
  CHECK(data::transform_name(rot) == "rotate(15)");

  CHECK_THROWS_AS(data::parse_transform("blur(2)"), ValueError);
  CHECK_THROWS_AS(data::parse_transform("rotate(90)"), ValueError);
  CHECK_THROWS_AS(data::parse_transform("noise(-0.1)"), ValueError);
  CHECK_THROWS_AS(data::parse_transform("scale(0)"), ValueError);
  CHECK_THROWS_AS(data::parse_transform("scale(2.5)"), ValueError);
}

TEST_CASE("invert flips every pixel exactly") {
  Rng rng(43);
  data::LabeledDataset ds = random_dataset(5, 9, 2, rng);
  ds.side = 3;
  data::LabeledDataset inv = data::synth_shift(ds, data::Invert{}, rng);
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    CHECK(inv.images.at(i) == doctest::Approx(1.0 - ds.images.at(i)));
  CHECK(inv.labels == ds.labels);
}

TEST_CASE("rotate by zero degrees is the identity") {
  Rng rng(44);
  data::LabeledDataset ds = random_dataset(3, 16, 2, rng);
  ds.side = 4;
  data::LabeledDataset rot = data::synth_shift(ds, data::Rotate{0.0}, rng);
  for (std::size_t i = 0; i < ds.images.size(); ++i)
    CHECK(rot.images.at(i) == doctest::Approx(ds.images.at(i)).epsilon(1e-9));
}

TEST_CASE("gaussian noise moves pixels by the expected average amount") {
  Rng rng(45);
  const std::size_t n = 200, d = 64;
  std::vector<double> img(n * d, 0.5);  // mid-gray avoids clamping
  data::LabeledDataset ds;
  ds.images = Tensor::from({n, d}, std::move(img));
  ds.labels.assign(n, 0);
  ds.side = 8;
  const double s = 0.1;
  data::LabeledDataset noisy =
      data::synth_shift(ds, data::GaussianNoise{s}, rng);
  double mean_abs = 0.0;
  for (std::size_t i = 0; i < noisy.images.size(); ++i)
    mean_abs += std::abs(noisy.images.at(i) - 0.5);
  mean_abs /= noisy.images.size();
  // E|N(0,s)| = s * sqrt(2/pi)
  CHECK(mean_abs == doctest::Approx(s * std::sqrt(2.0 / M_PI)).epsilon(0.05));
}

TEST_CASE("intensity scale clamps into the unit interval") {
  data::LabeledDataset ds;
  ds.images = Tensor::from({1, 3}, {0.2, 0.6, 0.9});
  ds.labels = {0};
  Rng rng(46);
  data::LabeledDataset bright =
      data::synth_shift(ds, data::IntensityScale{1.8}, rng);
  CHECK(bright.images.at(0) == doctest::Approx(0.36));
  CHECK(bright.images.at(2) == 1.0);  // 1.62 clamped
}

TEST_CASE("moons pair geometry and determinism") {
  auto pair = data::make_moons_pair(400, 0.0, 30.0, 7);
  CHECK(pair.source.size() == 400);
  CHECK(pair.target.size() == 400);
  CHECK(pair.num_classes == 2);
  CHECK(pair.source.dim() == 2);

  // balanced classes
  int ones = 0;
  for (int y : pair.source.labels) ones += y;
  CHECK(ones == 200);

  // everything inside the unit square
  for (std::size_t i = 0; i < pair.source.images.size(); ++i) {
    CHECK(pair.source.images.at(i) >= 0.0);
    CHECK(pair.source.images.at(i) <= 1.0);
  }

  auto pair2 = data::make_moons_pair(400, 0.0, 30.0, 7);
  CHECK(pair.source.images.values() == pair2.source.images.values());
  CHECK(pair.target.images.values() == pair2.target.images.values());

  CHECK_THROWS_AS(data::make_moons_pair(3, 0.1, 30.0, 1), ValueError);
  CHECK_THROWS_AS(data::make_moons_pair(400, 0.1, 90.0, 1), ValueError);
}

TEST_CASE("moons shift is a rotation about the mapped center") {
  // same seed, different shift: the unrotated twin gives the reference
  auto flat = data::make_moons_pair(100, 0.0, 0.0, 3);
  auto spun = data::make_moons_pair(100, 0.0, 30.0, 3);
  CHECK(flat.source.images.values() == spun.source.images.values());
  const double th = 30.0 * M_PI / 180.0;
  for (std::size_t i = 0; i < 100; ++i) {
    // rotation center (kMoonsCenterX, kMoonsCenterY) maps to (0.5, 0.5)
    const double x = flat.target.images.at(i, 0) - 0.5;
    const double y = flat.target.images.at(i, 1) - 0.5;
    const double rx = std::cos(th) * x - std::sin(th) * y;
    const double ry = std::sin(th) * x + std::cos(th) * y;
    CHECK(spun.target.images.at(i, 0) ==
          doctest::Approx(rx + 0.5).epsilon(1e-9));
    CHECK(spun.target.images.at(i, 1) ==
          doctest::Approx(ry + 0.5).epsilon(1e-9));
  }
}

TEST_CASE("glyph digits cover all classes with pixels in range") {
  Rng rng(47);
  data::LabeledDataset ds = data::make_digits(200, 8, rng);
  CHECK(ds.size() == 200);
  CHECK(ds.dim() == 64);
  CHECK(ds.side == 8);
  std::set<int> classes(ds.labels.begin(), ds.labels.end());
  CHECK(classes.size() == 10);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    CHECK(ds.images.at(i) >= 0.0);
    CHECK(ds.images.at(i) <= 1.0);
  }
  CHECK_THROWS_AS(data::make_digits(10, 7, rng), ValueError);
}

TEST_CASE("digits pair applies the shift to the target only") {
  auto pair = data::make_digits_pair(60, 40, 8, data::Invert{}, 11);
  CHECK(pair.source.size() == 60);
  CHECK(pair.target.size() == 40);
  CHECK(pair.num_classes == 10);
  // inverted glyphs are bright where source glyphs are dark: mean intensity
  // flips around 0.5
  double ms = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < pair.source.images.size(); ++i)
    ms += pair.source.images.at(i);
  for (std::size_t i = 0; i < pair.target.images.size(); ++i)
    mt += pair.target.images.at(i);
  ms /= pair.source.images.size();
  mt /= pair.target.images.size();
  CHECK(ms < 0.5);
  CHECK(mt > 0.5);

  auto again = data::make_digits_pair(60, 40, 8, data::Invert{}, 11);
  CHECK(again.source.images.values() == pair.source.images.values());
  CHECK(again.target.images.values() == pair.target.images.values());
}

TEST_CASE("protocol subsampling stratifies the source") {
  Rng rng(48);
  auto pair = data::make_digits_pair(300, 200, 8, data::Invert{}, 5);
  Rng sub_rng(9);
  auto small = data::protocol_subsample(pair, 100, 50, sub_rng);
  CHECK(small.source.size() == 100);
  CHECK(small.target.size() == 50);

  std::map<int, int> counts;
  for (int y : small.source.labels) counts[y]++;
  int lo = 1 << 30, hi = 0;
  for (auto& [y, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(counts.size() == 10);
  CHECK(hi - lo <= 1);

  CHECK_THROWS_AS(data::protocol_subsample(pair, 301, 50, sub_rng),
                  ValueError);
  CHECK_THROWS_AS(data::protocol_subsample(pair, 100, 201, sub_rng),
                  ValueError);
}

TEST_CASE("batch sampler keeps a constant size and covers each pass") {
  auto pair = data::make_moons_pair(50, 0.05, 30.0, 2);
  data::TrainView view = data::train_view(pair);
  data::BatchSampler sampler(view, 16, Rng(4));
  CHECK(sampler.iterations_per_epoch() == 4);  // ceil(50/16)

  std::map<double, int> seen;
  for (int it = 0; it < 8; ++it) {
    data::Batch b = sampler.next();
    CHECK(b.x_s.rows() == 16);
    CHECK(b.x_t.rows() == 16);
    CHECK(b.y_s.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) seen[b.x_s.at(i, 0)]++;
  }
  // two passes over 50 samples in 128 draws: every sample appears
  CHECK(seen.size() == 50);
}
