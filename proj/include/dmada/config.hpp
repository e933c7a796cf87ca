#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmada/networks.hpp"

namespace dmada {

// Experiment configuration. File format is flat key=value lines grouped by
// [section] headers; '#' starts a comment.
struct RunConfig {
  // [train]
  double alpha = 2.0;
  double omega = 0.1;
  double phi = 0.01;
  double learning_rate = 0.0004;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double tau_start = 0.9;
  double tau_end = 0.6;
  bool saturating_gen = false;
  bool per_sample_lambda = false;
  int checkpoint_every = 10;
  int eval_every = 1;

  // [toggles]
  bool pixel_mixup = true;
  bool feature_mixup = true;
  bool triplet = true;
  bool d_cls_branch = true;
  bool pseudo_labels = true;

  // [model]
  std::uint64_t d_z = 16;
  std::uint64_t d_noise = 16;
  std::uint64_t enc_width = 128;
  std::uint64_t dec_width = 128;
  std::uint64_t cls_hidden = 64;
  std::uint64_t disc_width = 128;
  std::uint64_t d_f = 64;
  std::uint64_t hidden_layers = 2;

  // [data]
  std::string task = "moons";  // moons | digits | idx
  std::uint64_t n_source = 2000;
  std::uint64_t n_target = 1800;
  double noise = 0.08;
  double shift = 30.0;  // moons rotation, degrees
  std::uint64_t side = 8;
  std::string transform = "invert";  // digits/idx target shift
  std::string source_images, source_labels, target_images, target_labels;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& origin);

  // "key=value" or "section.key=value"; throws ValueError on unknown keys
  void apply_override(const std::string& assignment);

  void validate() const;
  std::string snapshot() const;  // re-parseable dump of every key

  ModelDims dims_for(std::size_t d_in, std::size_t num_classes) const;
};

}  // namespace dmada
