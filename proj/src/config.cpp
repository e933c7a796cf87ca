#include "dmada/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dmada {

namespace {

enum class Kind { f64, i32, u64, boolean, text };

struct Entry {
  const char* section;
  const char* key;
  Kind kind;
  std::size_t offset;
};

#define DMADA_FIELD(section, name, kind) \
  Entry { section, #name, Kind::kind, offsetof(RunConfig, name) }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      DMADA_FIELD("train", alpha, f64),
      DMADA_FIELD("train", omega, f64),
      DMADA_FIELD("train", phi, f64),
      DMADA_FIELD("train", learning_rate, f64),
      DMADA_FIELD("train", epochs, i32),
      DMADA_FIELD("train", batch_size, i32),
      DMADA_FIELD("train", seed, u64),
      DMADA_FIELD("train", tau_start, f64),
      DMADA_FIELD("train", tau_end, f64),
      DMADA_FIELD("train", saturating_gen, boolean),
      DMADA_FIELD("train", per_sample_lambda, boolean),
      DMADA_FIELD("train", checkpoint_every, i32),
      DMADA_FIELD("train", eval_every, i32),
      DMADA_FIELD("toggles", pixel_mixup, boolean),
      DMADA_FIELD("toggles", feature_mixup, boolean),
      DMADA_FIELD("toggles", triplet, boolean),
      DMADA_FIELD("toggles", d_cls_branch, boolean),
      DMADA_FIELD("toggles", pseudo_labels, boolean),
      DMADA_FIELD("model", d_z, u64),
      DMADA_FIELD("model", d_noise, u64),
      DMADA_FIELD("model", enc_width, u64),
      DMADA_FIELD("model", dec_width, u64),
      DMADA_FIELD("model", cls_hidden, u64),
      DMADA_FIELD("model", disc_width, u64),
      DMADA_FIELD("model", d_f, u64),
      DMADA_FIELD("model", hidden_layers, u64),
      DMADA_FIELD("data", task, text),
      DMADA_FIELD("data", n_source, u64),
      DMADA_FIELD("data", n_target, u64),
      DMADA_FIELD("data", noise, f64),
      DMADA_FIELD("data", shift, f64),
      DMADA_FIELD("data", side, u64),
      DMADA_FIELD("data", transform, text),
      DMADA_FIELD("data", source_images, text),
      DMADA_FIELD("data", source_labels, text),
      DMADA_FIELD("data", target_images, text),
      DMADA_FIELD("data", target_labels, text),
  };
  return entries;
}

#undef DMADA_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void assign(RunConfig& cfg, const Entry& entry, const std::string& raw,
            const std::string& where) {
  char* base = reinterpret_cast<char*>(&cfg);
  void* field = base + entry.offset;
  try {
    switch (entry.kind) {
      case Kind::f64:
        *static_cast<double*>(field) = std::stod(raw);
        break;
      case Kind::i32:
        *static_cast<int*>(field) = std::stoi(raw);
        break;
      case Kind::u64:
        *static_cast<std::uint64_t*>(field) = std::stoull(raw);
        break;
      case Kind::boolean: {
        std::string v = raw;
        std::transform(v.begin(), v.end(), v.begin(), ::tolower);
        if (v == "true" || v == "1" || v == "yes")
          *static_cast<bool*>(field) = true;
        else if (v == "false" || v == "0" || v == "no")
          *static_cast<bool*>(field) = false;
        else
          throw ValueError("not a boolean: '" + raw + "'");
        break;
      }
      case Kind::text:
        *static_cast<std::string*>(field) = raw;
        break;
    }
  } catch (const std::exception& e) {
    throw ValueError("config " + where + ": cannot parse value '" + raw +
                     "' for key '" + entry.key + "' (" + e.what() + ")");
  }
}

std::string format(const RunConfig& cfg, const Entry& entry) {
  const char* base = reinterpret_cast<const char*>(&cfg);
  const void* field = base + entry.offset;
  std::ostringstream os;
  switch (entry.kind) {
    case Kind::f64: {
      os.precision(17);
      os << *static_cast<const double*>(field);
      break;
    }
    case Kind::i32:
      os << *static_cast<const int*>(field);
      break;
    case Kind::u64:
      os << *static_cast<const std::uint64_t*>(field);
      break;
    case Kind::boolean:
      os << (*static_cast<const bool*>(field) ? "true" : "false");
      break;
    case Kind::text:
      os << *static_cast<const std::string*>(field);
      break;
  }
  return os.str();
}

const Entry& find_entry(const std::string& section, const std::string& key,
                        const std::string& where) {
  const Entry* match = nullptr;
  for (const auto& e : registry()) {
    if (key != e.key) continue;
    if (!section.empty() && section != e.section) continue;
    if (match)
      throw ValueError("config " + where + ": ambiguous key '" + key + "'");
    match = &e;
  }
  if (!match)
    throw ValueError("config " + where + ": unknown key '" +
                     (section.empty() ? key : section + "." + key) + "'");
  return *match;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where =
        origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValueError("config " + where + ": malformed section '" + line +
                         "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValueError("config " + where + ": expected key=value, got '" +
                       line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    assign(cfg, find_entry(section, key, where), value, where);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return parse(os.str(), path.string());
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValueError("override '" + assignment + "': expected key=value");
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  std::string section;
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  assign(*this, find_entry(section, key, "override"), value, "override");
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw ValueError("config: " + msg);
  };
  if (!(alpha > 0)) fail("alpha must be > 0");
  if (omega < 0 || phi < 0) fail("omega and phi must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0)) fail("learning_rate must be > 0");
  if (!(tau_end > 0 && tau_end <= tau_start && tau_start < 1))
    fail("need 0 < tau_end <= tau_start < 1");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (d_z == 0 || d_f == 0 || hidden_layers == 0)
    fail("model widths must be positive");
  if (task != "moons" && task != "digits" && task != "idx")
    fail("task must be moons, digits or idx");
}

std::string RunConfig::snapshot() const {
  std::ostringstream os;
  std::string current;
  for (const auto& e : registry()) {
    if (current != e.section) {
      if (!current.empty()) os << "\n";
      current = e.section;
      os << "[" << current << "]\n";
    }
    os << e.key << " = " << format(*this, e) << "\n";
  }
  return os.str();
}

ModelDims RunConfig::dims_for(std::size_t d_in,
                              std::size_t num_classes) const {
  ModelDims dims;
  dims.d_in = d_in;
  dims.num_classes = num_classes;
  dims.d_z = d_z;
  dims.d_noise = d_noise;
  dims.enc_width = enc_width;
  dims.dec_width = dec_width;
  dims.cls_hidden = cls_hidden;
  dims.disc_width = disc_width;
  dims.d_f = d_f;
  dims.hidden_layers = hidden_layers;
  return dims;
}

}  // namespace dmada
