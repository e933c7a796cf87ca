#include "dmada/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dmada::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr double kPi = 3.14159265358979323846;

std::uint32_t read_be32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<char*>(b), 4);
}

Tensor select_rows(const Tensor& images, const std::vector<std::size_t>& idx) {
  const std::size_t d = images.cols();
  std::vector<double> out(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(images.values().begin() + idx[i] * d,
              images.values().begin() + (idx[i] + 1) * d, out.begin() + i * d);
  return Tensor::from({idx.size(), d}, std::move(out));
}

// 8x8 glyph prototypes for digits 0-9
const std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {".####...", "#....#..", "#...##..", "#..#.#..", "##...#..", "#....#..",
     ".####...", "........"},
    {"...#....", "..##....", ".#.#....", "...#....", "...#....", "...#....",
     ".#####..", "........"},
    {".####...", "#....#..", ".....#..", "...##...", "..#.....", ".#......",
     "######..", "........"},
    {".####...", "#....#..", ".....#..", "..###...", ".....#..", "#....#..",
     ".####...", "........"},
    {"....##..", "...#.#..", "..#..#..", ".#...#..", "#######.", ".....#..",
     ".....#..", "........"},
    {"######..", "#.......", "#####...", ".....#..", ".....#..", "#....#..",
     ".####...", "........"},
    {"..###...", ".#......", "#.......", "#####...", "#....#..", "#....#..",
     ".####...", "........"},
    {"######..", ".....#..", "....#...", "...#....", "..#.....", "..#.....",
     "..#.....", "........"},
    {".####...", "#....#..", "#....#..", ".####...", "#....#..", "#....#..",
     ".####...", "........"},
    {".####...", "#....#..", "#....#..", ".#####..", ".....#..", "....#...",
     ".###....", "........"},
}};

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("load_idx: cannot open " + images_path.string());
  const auto img_magic = read_be32(imgs);
  if (!imgs || img_magic != kImagesMagic) {
    std::ostringstream os;
    os << "load_idx: bad images magic 0x" << std::hex << img_magic << " in "
       << images_path.string();
    throw IoError(os.str());
  }
  const std::size_t n = read_be32(imgs);
  const std::size_t rows = read_be32(imgs);
  const std::size_t cols = read_be32(imgs);
  if (!imgs) throw IoError("load_idx: truncated header in " +
                           images_path.string());
  std::vector<unsigned char> pixels(n * rows * cols);
  imgs.read(reinterpret_cast<char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(imgs.gcount()) != pixels.size())
    throw IoError("load_idx: truncated pixel payload in " +
                  images_path.string());

  std::ifstream lbls(labels_path, std::ios::binary);
  if (!lbls) throw IoError("load_idx: cannot open " + labels_path.string());
  const auto lbl_magic = read_be32(lbls);
  if (!lbls || lbl_magic != kLabelsMagic) {
    std::ostringstream os;
    os << "load_idx: bad labels magic 0x" << std::hex << lbl_magic << " in "
       << labels_path.string();
    throw IoError(os.str());
  }
  const std::size_t n_lbl = read_be32(lbls);
  if (n_lbl != n)
    throw IoError("load_idx: count mismatch, " + std::to_string(n) +
                  " images vs " + std::to_string(n_lbl) + " labels");
  std::vector<unsigned char> raw_labels(n_lbl);
  lbls.read(reinterpret_cast<char*>(raw_labels.data()),
            static_cast<std::streamsize>(raw_labels.size()));
  if (static_cast<std::size_t>(lbls.gcount()) != raw_labels.size())
    throw IoError("load_idx: truncated label payload in " +
                  labels_path.string());

  LabeledDataset ds;
  ds.name = images_path.stem().string();
  ds.side = (rows == cols) ? rows : 0;
  std::vector<double> vals(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i)
    vals[i] = static_cast<double>(pixels[i]) / 255.0;
  ds.images = Tensor::from({n, rows * cols}, std::move(vals));
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  return ds;
}

void save_idx(const LabeledDataset& ds,
              const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  const std::size_t side =
      ds.side ? ds.side
              : static_cast<std::size_t>(std::lround(std::sqrt(
                    static_cast<double>(ds.dim()))));
  if (side * side != ds.dim())
    throw ValueError("save_idx: dataset dimension " + std::to_string(ds.dim()) +
                     " is not a square image");
  std::ofstream imgs(images_path, std::ios::binary | std::ios::trunc);
  if (!imgs) throw IoError("save_idx: cannot open " + images_path.string());
  write_be32(imgs, kImagesMagic);
  write_be32(imgs, static_cast<std::uint32_t>(ds.size()));
  write_be32(imgs, static_cast<std::uint32_t>(side));
  write_be32(imgs, static_cast<std::uint32_t>(side));
  std::vector<unsigned char> pixels(ds.size() * ds.dim());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, ds.images.at(i)));
    pixels[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  imgs.write(reinterpret_cast<char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));

  std::ofstream lbls(labels_path, std::ios::binary | std::ios::trunc);
  if (!lbls) throw IoError("save_idx: cannot open " + labels_path.string());
  write_be32(lbls, kLabelsMagic);
  write_be32(lbls, static_cast<std::uint32_t>(ds.size()));
  std::vector<unsigned char> raw(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int l = ds.has_labels() ? ds.labels[i] : 0;
    raw[i] = static_cast<unsigned char>(l);
  }
  lbls.write(reinterpret_cast<char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
  if (!imgs || !lbls) throw IoError("save_idx: write failed");
}

Transform parse_transform(const std::string& spec) {
  const auto paren = spec.find('(');
  const std::string kind = spec.substr(0, paren);
  double arg = 0.0;
  if (paren != std::string::npos) {
    const auto close = spec.find(')', paren);
    arg = std::stod(spec.substr(paren + 1, close - paren - 1));
  }
  if (kind == "invert") return Invert{};
  if (kind == "rotate") {
    if (!(arg >= -45.0 && arg <= 45.0))
      throw ValueError("parse_transform: rotation " + std::to_string(arg) +
                       " outside [-45,45]");
    return Rotate{arg};
  }
  if (kind == "noise") {
    if (!(arg >= 0.0))
      throw ValueError("parse_transform: noise stddev must be >= 0, got " +
                       std::to_string(arg));
    return GaussianNoise{arg};
  }
  if (kind == "scale") {
    if (!(arg > 0.0 && arg <= 2.0))
      throw ValueError("parse_transform: intensity factor " +
                       std::to_string(arg) + " outside (0,2]");
    return IntensityScale{arg};
  }
  throw ValueError("parse_transform: unknown transform '" + spec + "'");
}

std::string transform_name(const Transform& t) {
  std::ostringstream os;
  std::visit(
      [&os](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Invert>) os << "invert";
        else if constexpr (std::is_same_v<T, Rotate>)
          os << "rotate(" << v.degrees << ")";
        else if constexpr (std::is_same_v<T, GaussianNoise>)
          os << "noise(" << v.stddev << ")";
        else
          os << "scale(" << v.factor << ")";
      },
      t);
  return os.str();
}

LabeledDataset synth_shift(const LabeledDataset& ds, const Transform& t,
                           Rng& rng) {
  LabeledDataset out = ds;
  out.name = ds.name + "+" + transform_name(t);
  const std::size_t n = ds.size(), d = ds.dim();
  std::vector<double> vals = ds.images.values();

  if (std::holds_alternative<Invert>(t)) {
    for (auto& v : vals) v = 1.0 - v;
  } else if (const auto* rot = std::get_if<Rotate>(&t)) {
    if (!(rot->degrees >= -45.0 && rot->degrees <= 45.0))
      throw ValueError("synth_shift: rotation angle " +
                       std::to_string(rot->degrees) + " outside [-45,45]");
    const std::size_t side = ds.side;
    if (side == 0 || side * side != d)
      throw ValueError("synth_shift: rotate needs square images");
    const double rad = rot->degrees * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double ctr = (static_cast<double>(side) - 1.0) / 2.0;
    std::vector<double> rotated(vals.size(), 0.0);
    for (std::size_t img = 0; img < n; ++img) {
      const double* src = vals.data() + img * d;
      double* dst = rotated.data() + img * d;
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          // inverse-rotate the destination pixel, bilinear sample
          const double dx = static_cast<double>(x) - ctr;
          const double dy = static_cast<double>(y) - ctr;
          const double sx = c * dx + s * dy + ctr;
          const double sy = -s * dx + c * dy + ctr;
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const double fx = sx - x0, fy = sy - y0;
          double acc = 0.0;
          for (int oy = 0; oy <= 1; ++oy) {
            for (int ox = 0; ox <= 1; ++ox) {
              const int xi = x0 + ox, yi = y0 + oy;
              if (xi < 0 || yi < 0 || xi >= static_cast<int>(side) ||
                  yi >= static_cast<int>(side))
                continue;
              const double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
              acc += w * src[yi * side + xi];
            }
          }
          dst[y * side + x] = acc;
        }
      }
    }
    vals = std::move(rotated);
  } else if (const auto* gn = std::get_if<GaussianNoise>(&t)) {
    if (!(gn->stddev >= 0.0))
      throw ValueError("synth_shift: noise stddev must be >= 0");
    for (auto& v : vals) v += gn->stddev * rng.normal();
  } else if (const auto* sc = std::get_if<IntensityScale>(&t)) {
    if (!(sc->factor > 0.0 && sc->factor <= 2.0))
      throw ValueError("synth_shift: intensity factor " +
                       std::to_string(sc->factor) + " outside (0,2]");
    for (auto& v : vals) v *= sc->factor;
  }

  for (auto& v : vals) v = std::min(1.0, std::max(0.0, v));
  out.images = Tensor::from({n, d}, std::move(vals));
  return out;
}

DomainPair make_moons_pair(std::size_t n, double noise, double shift_degrees,
                           std::uint64_t seed) {
  if (n < 2 || n % 2 != 0)
    throw ValueError("make_moons_pair: n must be even and >= 2, got " +
                     std::to_string(n));
  if (!(shift_degrees >= -45.0 && shift_degrees <= 45.0))
    throw ValueError("make_moons_pair: shift " + std::to_string(shift_degrees) +
                     " outside [-45,45]");
  Rng rng(seed);
  const double rad = shift_degrees * kPi / 180.0;
  const double rc = std::cos(rad), rs = std::sin(rad);

  auto generate = [&](Rng& r, bool rotate, const std::string& name) {
    std::vector<double> vals(n * 2);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = r.uniform() * kPi;
      double x, y;
      if (i % 2 == 0) {
        x = std::cos(t);
        y = std::sin(t);
        labels[i] = 0;
      } else {
        x = 1.0 - std::cos(t);
        y = 0.5 - std::sin(t);
        labels[i] = 1;
      }
      x += noise * r.normal();
      y += noise * r.normal();
      if (rotate) {
        const double dx = x - kMoonsCenterX, dy = y - kMoonsCenterY;
        x = kMoonsCenterX + rc * dx - rs * dy;
        y = kMoonsCenterY + rs * dx + rc * dy;
      }
      vals[i * 2 + 0] =
          std::min(1.0, std::max(0.0, (x - kMoonsCenterX) / kMoonsScale + 0.5));
      vals[i * 2 + 1] =
          std::min(1.0, std::max(0.0, (y - kMoonsCenterY) / kMoonsScale + 0.5));
    }
    LabeledDataset ds;
    ds.images = Tensor::from({n, 2}, std::move(vals));
    ds.labels = std::move(labels);
    ds.name = name;
    return ds;
  };

  DomainPair pair;
  Rng src_rng = rng.fork();
  Rng tgt_rng = rng.fork();
  pair.source = generate(src_rng, false, "moons-source");
  pair.target = generate(tgt_rng, true, "moons-target");
  pair.num_classes = 2;
  return pair;
}

LabeledDataset make_digits(std::size_t n, std::size_t side, Rng& rng) {
  if (side < 8 || side % 8 != 0)
    throw ValueError("make_digits: side must be a multiple of 8, got " +
                     std::to_string(side));
  const std::size_t scale = side / 8;
  const std::size_t d = side * side;
  std::vector<double> vals(n * d, 0.0);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(rng.index(10));
    labels[i] = cls;
    const auto& glyph = kGlyphs[cls];
    const int shift_x = static_cast<int>(rng.index(3)) - 1;
    const int shift_y = static_cast<int>(rng.index(3)) - 1;
    const double intensity = 0.75 + 0.25 * rng.uniform();
    double* img = vals.data() + i * d;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const int gy = static_cast<int>(y / scale) - shift_y;
        const int gx = static_cast<int>(x / scale) - shift_x;
        double v = 0.0;
        if (gy >= 0 && gy < 8 && gx >= 0 && gx < 8 && glyph[gy][gx] == '#')
          v = intensity;
        v += 0.05 * rng.normal();
        img[y * side + x] = std::min(1.0, std::max(0.0, v));
      }
    }
  }
  LabeledDataset ds;
  ds.images = Tensor::from({n, d}, std::move(vals));
  ds.labels = std::move(labels);
  ds.side = side;
  ds.name = "digits" + std::to_string(side);
  return ds;
}

DomainPair make_digits_pair(std::size_t n_source, std::size_t n_target,
                            std::size_t side, const Transform& shift,
                            std::uint64_t seed) {
  Rng rng(seed);
  Rng src_rng = rng.fork();
  Rng tgt_rng = rng.fork();
  DomainPair pair;
  pair.source = make_digits(n_source, side, src_rng);
  pair.source.name = "digits-source";
  LabeledDataset raw_target = make_digits(n_target, side, tgt_rng);
  Rng shift_rng = rng.fork();
  pair.target = synth_shift(raw_target, shift, shift_rng);
  pair.target.name = "digits-target";
  pair.num_classes = 10;
  return pair;
}

DomainPair protocol_subsample(const DomainPair& pair, std::size_t n_source,
                              std::size_t n_target, Rng& rng) {
  if (n_source > pair.source.size() || n_target > pair.target.size())
    throw ValueError("protocol_subsample: requested " +
                     std::to_string(n_source) + "/" +
                     std::to_string(n_target) + " from " +
                     std::to_string(pair.source.size()) + "/" +
                     std::to_string(pair.target.size()));
  if (!pair.source.has_labels())
    throw ValueError("protocol_subsample: source labels required");

  const std::size_t k = pair.num_classes;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < pair.source.size(); ++i)
    by_class[pair.source.labels[i]].push_back(i);
  for (auto& idxs : by_class) rng.shuffle(idxs);

  // per-class counts differ by at most one
  std::vector<std::size_t> want(k, n_source / k);
  for (std::size_t c = 0; c < n_source % k; ++c) want[c] += 1;
  std::vector<std::size_t> chosen;
  chosen.reserve(n_source);
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].size() < want[c])
      throw ValueError("protocol_subsample: class " + std::to_string(c) +
                       " has only " + std::to_string(by_class[c].size()) +
                       " samples, need " + std::to_string(want[c]));
    chosen.insert(chosen.end(), by_class[c].begin(),
                  by_class[c].begin() + want[c]);
  }
  rng.shuffle(chosen);

  std::vector<std::size_t> tgt_idx(pair.target.size());
  std::iota(tgt_idx.begin(), tgt_idx.end(), 0);
  rng.shuffle(tgt_idx);
  tgt_idx.resize(n_target);

  DomainPair out;
  out.num_classes = pair.num_classes;
  out.source.name = pair.source.name;
  out.source.side = pair.source.side;
  out.source.images = select_rows(pair.source.images, chosen);
  out.source.labels.reserve(n_source);
  for (auto i : chosen) out.source.labels.push_back(pair.source.labels[i]);
  out.target.name = pair.target.name;
  out.target.side = pair.target.side;
  out.target.images = select_rows(pair.target.images, tgt_idx);
  if (pair.target.has_labels()) {
    out.target.labels.reserve(n_target);
    for (auto i : tgt_idx) out.target.labels.push_back(pair.target.labels[i]);
  }
  return out;
}

BatchSampler::BatchSampler(TrainView view, std::size_t batch_size, Rng rng)
    : view_(view), batch_size_(batch_size), rng_(std::move(rng)) {
  if (batch_size_ > view_.source->size() ||
      batch_size_ > static_cast<std::size_t>(view_.target_images->rows()))
    throw ValueError("BatchSampler: batch size " +
                     std::to_string(batch_size_) +
                     " exceeds a dataset size");
  src_perm_.resize(view_.source->size());
  std::iota(src_perm_.begin(), src_perm_.end(), 0);
  rng_.shuffle(src_perm_);
  tgt_perm_.resize(view_.target_images->rows());
  std::iota(tgt_perm_.begin(), tgt_perm_.end(), 0);
  rng_.shuffle(tgt_perm_);
}

std::size_t BatchSampler::iterations_per_epoch() const {
  return (view_.source->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchSampler::draw(std::vector<std::size_t>& perm,
                                            std::size_t& cursor,
                                            std::size_t n) {
  std::vector<std::size_t> out;
  out.reserve(batch_size_);
  while (out.size() < batch_size_) {
    if (cursor == n) {
      rng_.shuffle(perm);
      cursor = 0;
    }
    out.push_back(perm[cursor++]);
  }
  return out;
}

Batch BatchSampler::next() {
  const auto si = draw(src_perm_, src_cursor_, src_perm_.size());
  const auto ti = draw(tgt_perm_, tgt_cursor_, tgt_perm_.size());
  Batch b;
  b.x_s = select_rows(view_.source->images, si);
  b.y_s.reserve(si.size());
  for (auto i : si) b.y_s.push_back(view_.source->labels[i]);
  b.x_t = select_rows(*view_.target_images, ti);
  return b;
}

}  // namespace dmada::data
