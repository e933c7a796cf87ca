#include "dmada/networks.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace dmada {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr char kCheckpointMagic[8] = {'D', 'M', 'A', 'D', 'A', 'C', 'K', '1'};

void check_finite(const Tensor& x, const char* who) {
  for (double v : x.values()) {
    if (!std::isfinite(v))
      throw NumericError(std::string(who) + ": non-finite input value");
  }
}

template <class T>
void write_le(std::ostream& os, T v) {
  // assumes little-endian host; asserted below on the magic round-trip
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

Linear::Linear(const std::string& prefix, std::size_t in, std::size_t out,
               Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& x : w) x = stddev * rng.normal();
  weight = {prefix + ".weight", Tensor::from({in, out}, std::move(w), true), {}};
  bias = {prefix + ".bias", Tensor::zeros({out}, true), {}};
}

Tensor Linear::operator()(const Tensor& x) const {
  return add_rowvec(matmul(x, weight.value), bias.value);
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Encoder::Encoder(const ModelDims& dims, Rng& rng) {
  std::size_t in = dims.d_in;
  for (std::size_t i = 0; i < dims.hidden_layers; ++i) {
    trunk_.emplace_back("encoder.trunk" + std::to_string(i), in,
                        dims.enc_width, rng);
    in = dims.enc_width;
  }
  mu_head_ = Linear("encoder.mu", in, dims.d_z, rng);
  sigma_head_ = Linear("encoder.sigma", in, dims.d_z, rng);
}

LatentCode Encoder::operator()(const Tensor& x) const {
  check_finite(x, "encode");
  Tensor h = x;
  for (const auto& layer : trunk_) h = relu(layer(h));
  Tensor mu = mu_head_(h);
  Tensor sigma = add_scalar(softplus(sigma_head_(h)), kSigmaFloor);
  return {mu, sigma};
}

void Encoder::collect(std::vector<Param*>& out) {
  for (auto& l : trunk_) l.collect(out);
  mu_head_.collect(out);
  sigma_head_.collect(out);
}

Decoder::Decoder(const ModelDims& dims, Rng& rng) {
  std::size_t in = dims.decoder_in();
  for (std::size_t i = 0; i < dims.hidden_layers; ++i) {
    layers_.emplace_back("decoder.hidden" + std::to_string(i), in,
                         dims.dec_width, rng);
    in = dims.dec_width;
  }
  layers_.emplace_back("decoder.out", in, dims.d_in, rng);
}

Tensor Decoder::operator()(const LatentCode& code, const Tensor& z,
                           const Tensor& block) const {
  Tensor h = concat({code.mu, code.sigma, z, block}, 1);
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = relu(layers_[i](h));
  return sigmoid(layers_.back()(h));
}

void Decoder::collect(std::vector<Param*>& out) {
  for (auto& l : layers_) l.collect(out);
}

Classifier::Classifier(const ModelDims& dims, Rng& rng) {
  hidden_ = Linear("classifier.hidden", dims.classifier_in(), dims.cls_hidden,
                   rng);
  out_ = Linear("classifier.out", dims.cls_hidden, dims.num_classes, rng);
}

Tensor Classifier::operator()(const LatentCode& code) const {
  Tensor h = relu(hidden_(concat({code.mu, code.sigma}, 1)));
  return out_(h);
}

void Classifier::collect(std::vector<Param*>& out) {
  hidden_.collect(out);
  out_.collect(out);
}

Discriminator::Discriminator(const ModelDims& dims, Rng& rng) {
  std::size_t in = dims.d_in;
  for (std::size_t i = 0; i < dims.hidden_layers; ++i) {
    trunk_.emplace_back("discriminator.trunk" + std::to_string(i), in,
                        dims.disc_width, rng);
    in = dims.disc_width;
  }
  feature_ = Linear("discriminator.feature", in, dims.d_f, rng);
  dom_head_ = Linear("discriminator.dom", dims.d_f, 1, rng);
  cls_head_ = Linear("discriminator.cls", dims.d_f, dims.num_classes, rng);
}

DiscriminatorOutput Discriminator::operator()(const Tensor& x) const {
  check_finite(x, "discriminate");
  Tensor h = x;
  for (const auto& layer : trunk_) h = relu(layer(h));
  Tensor f = relu(feature_(h));
  return {sigmoid(dom_head_(f)), cls_head_(f), f};
}

void Discriminator::collect(std::vector<Param*>& out) {
  for (auto& l : trunk_) l.collect(out);
  feature_.collect(out);
  dom_head_.collect(out);
  cls_head_.collect(out);
}

ModelSet::ModelSet(const ModelDims& d, Rng& rng)
    : dims(d),
      encoder(d, rng),
      decoder(d, rng),
      classifier(d, rng),
      discriminator(d, rng) {}

std::vector<Param*> ModelSet::params() {
  std::vector<Param*> out;
  encoder.collect(out);
  decoder.collect(out);
  classifier.collect(out);
  discriminator.collect(out);
  return out;
}

std::vector<Param*> ModelSet::params(Subnet which) {
  std::vector<Param*> out;
  switch (which) {
    case Subnet::encoder: encoder.collect(out); break;
    case Subnet::decoder: decoder.collect(out); break;
    case Subnet::classifier: classifier.collect(out); break;
    case Subnet::discriminator: discriminator.collect(out); break;
  }
  return out;
}

std::vector<const Param*> ModelSet::params() const {
  auto mutable_params = const_cast<ModelSet*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void ModelSet::set_learning_rate(double lr) {
  for (auto* p : params()) p->adam.learning_rate = lr;
}

void ModelSet::zero_all_grads() {
  for (auto* p : params()) p->value.zero_grad();
}

std::uint64_t ModelSet::param_hash(Subnet which) const {
  auto ps = const_cast<ModelSet*>(this)->params(which);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto* p : ps) {
    mix(p->name.data(), p->name.size());
    mix(p->value.values().data(), p->value.size() * sizeof(double));
  }
  return h;
}

void ModelSet::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_checkpoint: cannot open " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<std::uint32_t>(os, 1);  // format version
  const std::uint64_t d[] = {dims.d_in,      dims.num_classes, dims.d_z,
                             dims.d_noise,   dims.enc_width,   dims.dec_width,
                             dims.cls_hidden, dims.disc_width, dims.d_f,
                             dims.hidden_layers};
  for (auto x : d) write_le<std::uint64_t>(os, x);

  auto ps = const_cast<ModelSet*>(this)->params();
  write_le<std::uint64_t>(os, ps.size());
  for (const auto* p : ps) {
    write_le<std::uint64_t>(os, p->name.size());
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const auto& shape = p->value.shape();
    write_le<std::uint64_t>(os, shape.size());
    for (auto dim : shape) write_le<std::uint64_t>(os, dim);
    os.write(reinterpret_cast<const char*>(p->value.values().data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!os) throw IoError("save_checkpoint: write failed for " + path.string());
}

ModelSet ModelSet::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IoError("load_checkpoint: bad magic in " + path.string());
  const auto version = read_le<std::uint32_t>(is);
  if (version != 1)
    throw IoError("load_checkpoint: unsupported version " +
                  std::to_string(version));
  ModelDims dims;
  dims.d_in = read_le<std::uint64_t>(is);
  dims.num_classes = read_le<std::uint64_t>(is);
  dims.d_z = read_le<std::uint64_t>(is);
  dims.d_noise = read_le<std::uint64_t>(is);
  dims.enc_width = read_le<std::uint64_t>(is);
  dims.dec_width = read_le<std::uint64_t>(is);
  dims.cls_hidden = read_le<std::uint64_t>(is);
  dims.disc_width = read_le<std::uint64_t>(is);
  dims.d_f = read_le<std::uint64_t>(is);
  dims.hidden_layers = read_le<std::uint64_t>(is);

  Rng scratch(0);
  ModelSet models(dims, scratch);
  std::map<std::string, Param*> by_name;
  for (auto* p : models.params()) by_name[p->name] = p;

  const auto count = read_le<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_le<std::uint64_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rank = read_le<std::uint64_t>(is);
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = read_le<std::uint64_t>(is);
      numel *= d;
    }
    std::vector<double> vals(numel);
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!is) throw IoError("load_checkpoint: truncated payload for " + name);
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw IoError("load_checkpoint: unknown parameter " + name);
    if (it->second->value.shape() != shape)
      throw IoError("load_checkpoint: shape mismatch for " + name);
    it->second->value.mutable_values() = std::move(vals);
  }
  return models;
}

}  // namespace dmada
