#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dmada/rng.hpp"
#include "dmada/tensor.hpp"

namespace dmada::data {

struct LabeledDataset {
  Tensor images;            // [N x d], values in [0,1]
  std::vector<int> labels;  // empty when withheld
  std::string name;
  std::size_t side = 0;  // square image side; 0 for non-image data

  std::size_t size() const { return images.rows(); }
  std::size_t dim() const { return images.cols(); }
  bool has_labels() const { return !labels.empty(); }
};

struct DomainPair {
  LabeledDataset source;  // labeled
  LabeledDataset target;  // labels kept for evaluation only
  std::size_t num_classes = 0;
};

// Label-free view handed to the trainer; target labels are not reachable
// through it.
struct TrainView {
  const LabeledDataset* source;
  const Tensor* target_images;
  std::size_t num_classes;
};

inline TrainView train_view(const DomainPair& pair) {
  return {&pair.source, &pair.target.images, pair.num_classes};
}

// ---- IDX files (big-endian, magic 0x00000803 images / 0x00000801 labels) ----

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);
void save_idx(const LabeledDataset& ds,
              const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

// ---- domain-shift transforms ----

struct Invert {};
struct Rotate {
  double degrees;  // [-45, 45]
};
struct GaussianNoise {
  double stddev;  // >= 0
};
struct IntensityScale {
  double factor;  // (0, 2]
};
using Transform = std::variant<Invert, Rotate, GaussianNoise, IntensityScale>;

Transform parse_transform(const std::string& spec);
std::string transform_name(const Transform& t);

LabeledDataset synth_shift(const LabeledDataset& ds, const Transform& t,
                           Rng& rng);

// ---- synthetic tasks ----

// Two interleaved half-circles (K=2, d=2); target is the source distribution
// rotated by shift_degrees. Coordinates are mapped into [0,1]^2 by the fixed
// affine transform below.
DomainPair make_moons_pair(std::size_t n, double noise, double shift_degrees,
                           std::uint64_t seed);
inline constexpr double kMoonsCenterX = 0.5;
inline constexpr double kMoonsCenterY = 0.25;
inline constexpr double kMoonsScale = 4.0;

// Synthetic glyph digits (K=10) on a side x side grid with per-sample jitter,
// intensity variation and pixel noise.
LabeledDataset make_digits(std::size_t n, std::size_t side, Rng& rng);

// Source = glyph digits, target = fresh glyph digits pushed through the
// transform.
DomainPair make_digits_pair(std::size_t n_source, std::size_t n_target,
                            std::size_t side, const Transform& shift,
                            std::uint64_t seed);

// ---- sampling protocol ----

// uniform without-replacement subsets; class-stratified on source
DomainPair protocol_subsample(const DomainPair& pair, std::size_t n_source,
                              std::size_t n_target, Rng& rng);

struct Batch {
  Tensor x_s;  // [B x d]
  std::vector<int> y_s;
  Tensor x_t;  // [B x d]
};

// Independent uniform batches from each domain, reshuffled per pass.
class BatchSampler {
 public:
  BatchSampler(TrainView view, std::size_t batch_size, Rng rng);
  Batch next();
  std::size_t iterations_per_epoch() const;

 private:
  std::vector<std::size_t> draw(std::vector<std::size_t>& perm,
                                std::size_t& cursor, std::size_t n);

  TrainView view_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> src_perm_, tgt_perm_;
  std::size_t src_cursor_ = 0, tgt_cursor_ = 0;
};

}  // namespace dmada::data
