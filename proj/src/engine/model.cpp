#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include <json.hpp>

#include "pti/error.hpp"
#include "pti/model.hpp"

namespace pti::engine {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'T', 'I', 'F'};
constexpr std::size_t kHeaderBytes = 16;

std::string dims_string(const std::vector<std::size_t>& d) {
  std::string out = "[";
  for (std::size_t i = 0; i < d.size(); ++i) out += (i ? "," : "") + std::to_string(d[i]);
  return out + "]";
}

json variant_to_json(const nn::OperatorVariant& v) {
  return {{"activation", nn::to_string(v.activation)},
          {"attention_norm", nn::to_string(v.attention_norm)},
          {"ln1", nn::to_string(v.ln1)},
          {"ln2", nn::to_string(v.ln2)}};
}

nn::OperatorVariant variant_from_json(const json& j) {
  nn::OperatorVariant v;
  v.activation = nn::parse_activation(j.at("activation").get<std::string>());
  v.attention_norm = nn::parse_attention_norm(j.at("attention_norm").get<std::string>());
  v.ln1 = nn::parse_norm(j.at("ln1").get<std::string>());
  v.ln2 = nn::parse_norm(j.at("ln2").get<std::string>());
  return v;
}

json config_json(const ModelConfig& c) {
  json variants = json::array();
  for (const auto& v : c.variants) variants.push_back(variant_to_json(v));
  return {{"n_blocks", c.n_blocks},   {"embed_dim", c.embed_dim},     {"n_heads", c.n_heads},
          {"ffn_dim", c.ffn_dim},     {"max_seq_len", c.max_seq_len}, {"n_labels", c.n_labels},
          {"ring_bits", c.fp.ell},    {"frac_bits", c.fp.frac_bits},  {"variants", variants}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.n_blocks = j.at("n_blocks").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.ffn_dim = j.value("ffn_dim", 4 * c.embed_dim);
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.n_labels = j.value("n_labels", std::size_t{0});
  c.fp = FixedPointParams::make(j.value("ring_bits", 41), j.value("frac_bits", 13));
  if (j.contains("variants")) {
    for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_json(v));
  } else {
    c.variants.assign(c.n_blocks, nn::OperatorVariant{});
  }
  c.validate();
  return c;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_blocks == 0) throw ConfigError("model needs at least one block");
  if (embed_dim == 0 || n_heads == 0 || embed_dim % n_heads != 0) {
    throw ConfigError("embed_dim must be a positive multiple of n_heads");
  }
  if (ffn_dim == 0 || max_seq_len == 0) throw ConfigError("ffn_dim and max_seq_len must be positive");
  if (variants.size() != n_blocks) throw ConfigError("need one operator variant per block");
}

ModelConfig ModelConfig::bert_tiny() {
  ModelConfig c;
  c.variants.assign(c.n_blocks, nn::OperatorVariant{});
  return c;
}

std::string config_to_json(const ModelConfig& c) { return config_json(c).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_tensors(const ModelConfig& c) {
  const std::size_t e = c.embed_dim, h = c.ffn_dim;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  for (std::size_t i = 0; i < c.n_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    for (const char* proj : {"q", "k", "v", "o"}) {
      out.push_back({p + "attn." + proj + ".weight", {e, e}});
      out.push_back({p + "attn." + proj + ".bias", {e}});
    }
    out.push_back({p + "ln1.gamma", {e}});
    out.push_back({p + "ln1.beta", {e}});
    out.push_back({p + "ffn.fc1.weight", {h, e}});
    out.push_back({p + "ffn.fc1.bias", {h}});
    out.push_back({p + "ffn.fc2.weight", {e, h}});
    out.push_back({p + "ffn.fc2.bias", {e}});
    out.push_back({p + "ln2.gamma", {e}});
    out.push_back({p + "ln2.beta", {e}});
  }
  if (c.n_labels > 0) {
    out.push_back({"head.weight", {c.n_labels, e}});
    out.push_back({"head.bias", {c.n_labels}});
  }
  return out;
}

ModelBundle::ModelBundle(ModelConfig config, std::map<std::string, FloatTensor> tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {
  config_.validate();
  for (const auto& [name, dims] : expected_tensors(config_)) {
    const auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ModelError("missing tensor '" + name + "'");
    const FloatTensor& t = it->second;
    if (t.shape != dims) {
      throw ModelError("dimension mismatch for tensor '" + name + "': expected " + dims_string(dims) + ", got " +
                       dims_string(t.shape));
    }
    if (t.values.size() != PlainTensor::count(t.shape)) {
      throw ModelError("tensor '" + name + "' has the wrong number of values");
    }
    std::vector<double> v(t.values.begin(), t.values.end());
    try {
      encoded_.emplace(name, encode_tensor(t.shape, v, config_.fp));
    } catch (const RangeError&) {
      throw ModelError("tensor '" + name + "' has values outside the fixed-point range");
    }
  }
}

ModelBundle ModelBundle::public_view(ModelConfig config) {
  config.validate();
  ModelBundle b;
  b.config_ = std::move(config);
  return b;
}

const FloatTensor& ModelBundle::raw(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ModelError("missing tensor '" + name + "'");
  return it->second;
}

const PlainTensor& ModelBundle::encoded(const std::string& name) const {
  const auto it = encoded_.find(name);
  if (it == encoded_.end()) throw ModelError("missing tensor '" + name + "'");
  return it->second;
}

nn::AffineParams ModelBundle::affine(const std::string& prefix) const {
  nn::AffineParams a;
  a.gamma = encoded(prefix + ".gamma").data;
  a.beta = encoded(prefix + ".beta").data;
  return a;
}

ModelBundle ModelBundle::with_variants(std::vector<nn::OperatorVariant> variants) const {
  ModelBundle b = *this;
  b.config_.variants = std::move(variants);
  b.config_.validate();
  return b;
}

std::vector<std::uint8_t> serialize_model(const ModelBundle& bundle) {
  json dir = json::object();
  std::vector<std::uint8_t> blob;
  for (const auto& [name, t] : bundle.tensors()) {
    dir[name] = {{"offset", blob.size()}, {"dims", t.shape}, {"dtype", "float32"}};
    for (float v : t.values) put_le(blob, std::bit_cast<std::uint32_t>(v));
  }
  const json manifest = {{"format", "PTIF"},
                         {"version", kPtifVersion},
                         {"config", config_json(bundle.config())},
                         {"tensors", dir}};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kPtifVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

ModelBundle parse_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ModelError("bad magic: not a PTIF model file");
  }
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kPtifVersion) throw ModelError("unsupported PTIF version " + std::to_string(version));
  const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (manifest_len > bytes.size() - kHeaderBytes) throw ModelError("truncated manifest");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + manifest_len);
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed manifest: ") + e.what());
  }
  const std::uint8_t* blob = bytes.data() + kHeaderBytes + manifest_len;
  const std::size_t blob_len = bytes.size() - kHeaderBytes - manifest_len;

  ModelConfig config;
  std::map<std::string, FloatTensor> tensors;
  try {
    if (manifest.value("version", 0u) != kPtifVersion) throw ModelError("manifest version does not match header");
    config = config_from(manifest.at("config"));
    for (const auto& [name, entry] : manifest.at("tensors").items()) {
      if (entry.value("dtype", "") != "float32") throw ModelError("tensor '" + name + "' is not float32");
      FloatTensor t;
      t.shape = entry.at("dims").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t n = PlainTensor::count(t.shape);
      if (offset > blob_len || n > (blob_len - offset) / 4) {
        throw ModelError("tensor '" + name + "' extends past the end of the file");
      }
      t.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(blob + offset + 4 * i));
      }
      tensors.emplace(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed manifest: ") + e.what());
  }
  return ModelBundle(std::move(config), std::move(tensors));
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_model(bytes);
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  const auto bytes = serialize_model(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

ModelBundle random_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::map<std::string, FloatTensor> tensors;
  for (const auto& [name, dims] : expected_tensors(config)) {
    FloatTensor t{dims, std::vector<float>(PlainTensor::count(dims))};
    const bool is_weight = name.ends_with(".weight");
    const bool is_gamma = name.ends_with(".gamma");
    const double scale = is_weight ? 1.0 / std::sqrt(static_cast<double>(dims.back())) : 0.1;
    std::normal_distribution<double> dist(is_gamma ? 1.0 : 0.0, scale);
    for (auto& v : t.values) v = static_cast<float>(dist(rng));
    tensors.emplace(name, std::move(t));
  }
  return ModelBundle(config, std::move(tensors));
}

std::vector<double> random_input(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(rows * cols);
  for (auto& v : out) v = std::clamp(dist(rng), -nn::kActivationBound, nn::kActivationBound);
  return out;
}

}  // namespace pti::engine
