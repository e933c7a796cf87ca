#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmada/mixup.hpp"
#include "dmada/tensor.hpp"

namespace dmada {

// (mu, sigma) pair produced by the encoder; sigma strictly positive.
struct LatentCode {
  Tensor mu;
  Tensor sigma;
};

struct DiscriminatorOutput {
  Tensor dom_score;   // [B x 1] in (0,1)
  Tensor cls_logits;  // [B x K]
  Tensor features;    // [B x d_f], trunk output
};

struct Param {
  std::string name;
  Tensor value;
  AdamState adam;
};

struct Linear {
  Param weight;  // [in x out]
  Param bias;    // [out]

  Linear() = default;
  Linear(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(std::vector<Param*>& out);
};

struct ModelDims {
  std::size_t d_in = 0;
  std::size_t num_classes = 0;
  std::size_t d_z = 16;
  std::size_t d_noise = 16;
  std::size_t enc_width = 128;
  std::size_t dec_width = 128;
  std::size_t cls_hidden = 64;
  std::size_t disc_width = 128;
  std::size_t d_f = 64;
  std::size_t hidden_layers = 2;  // trunk depth for encoder/decoder/disc

  std::size_t classifier_in() const { return 2 * d_z; }
  std::size_t decoder_in() const {
    return 2 * d_z + d_noise + num_classes + 1;
  }
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelDims& dims, Rng& rng);
  LatentCode operator()(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

 private:
  std::vector<Linear> trunk_;
  Linear mu_head_;
  Linear sigma_head_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelDims& dims, Rng& rng);
  // x_g = N_d([mu, sigma, z, l_cls, l_comp]); block is [B x (K+1)]
  Tensor operator()(const LatentCode& code, const Tensor& z,
                    const Tensor& block) const;
  void collect(std::vector<Param*>& out);

 private:
  std::vector<Linear> layers_;  // hidden + output, sigmoid on the last
};

class Classifier {
 public:
  Classifier() = default;
  Classifier(const ModelDims& dims, Rng& rng);
  // logits over K classes from concatenated [mu, sigma]
  Tensor operator()(const LatentCode& code) const;
  void collect(std::vector<Param*>& out);

 private:
  Linear hidden_;
  Linear out_;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const ModelDims& dims, Rng& rng);
  DiscriminatorOutput operator()(const Tensor& x) const;
  void collect(std::vector<Param*>& out);

 private:
  std::vector<Linear> trunk_;
  Linear feature_;  // -> d_f
  Linear dom_head_;
  Linear cls_head_;
};

enum class Subnet { encoder, decoder, classifier, discriminator };

struct ModelSet {
  ModelDims dims;
  Encoder encoder;
  Decoder decoder;
  Classifier classifier;
  Discriminator discriminator;

  ModelSet() = default;
  ModelSet(const ModelDims& d, Rng& rng);

  std::vector<Param*> params();
  std::vector<Param*> params(Subnet which);
  std::vector<const Param*> params() const;

  void set_learning_rate(double lr);
  void zero_all_grads();
  std::uint64_t param_hash(Subnet which) const;

  void save_checkpoint(const std::filesystem::path& path) const;
  static ModelSet load_checkpoint(const std::filesystem::path& path);
};

}  // namespace dmada
