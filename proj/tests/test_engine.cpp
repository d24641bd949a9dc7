#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <thread>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "two_party.hpp"

using namespace pti;
using namespace pti::engine;

namespace {

ModelConfig small_config(std::size_t blocks = 1, std::size_t labels = 0) {
  ModelConfig c;
  c.n_blocks = blocks;
  c.embed_dim = 32;
  c.n_heads = 2;
  c.ffn_dim = 64;
  c.max_seq_len = 16;
  c.n_labels = labels;
  c.variants.assign(blocks, nn::OperatorVariant{});
  return c;
}

nn::OperatorVariant substituted() {
  return {nn::Activation::kRelu, nn::AttentionNorm::kSoftmaxSub, nn::Norm::kLayerNormSub, nn::Norm::kLayerNormSub};
}

std::map<std::string, FloatTensor> zero_tensors(const ModelConfig& c) {
  std::map<std::string, FloatTensor> t;
  for (const auto& [name, dims] : expected_tensors(c)) {
    const bool gamma = name.ends_with(".gamma");
    t[name] = FloatTensor{dims, std::vector<float>(PlainTensor::count(dims), gamma ? 1.0f : 0.0f)};
  }
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string temp_path(const char* name) { return std::string("/tmp/pti_test_") + name; }

}  // namespace

TEST_CASE("BERT-Tiny fixture round-trips through the model file") {
  const ModelBundle b = random_model(ModelConfig::bert_tiny(), 3);
  const std::string path = temp_path("tiny.ptif");
  save_model(b, path);
  const ModelBundle loaded = load_model(path);
  CHECK(loaded.config().n_blocks == 2);
  CHECK(loaded.config().embed_dim == 128);
  CHECK(loaded.config().n_heads == 2);
  CHECK(loaded.config().head_dim() == 64);
  CHECK(loaded.config().ffn_dim == 512);
  CHECK(loaded.config().max_seq_len == 128);
  CHECK(loaded.config() == b.config());
  CHECK(loaded.tensors() == b.tensors());
  for (const auto& [name, dims] : expected_tensors(b.config())) CHECK(loaded.encoded(name) == b.encoded(name));
  CHECK(serialize_model(loaded) == serialize_model(b));
  std::remove(path.c_str());
}

TEST_CASE("model file errors name the offending tensor") {
  const ModelConfig c = small_config(1, 2);
  auto tensors = zero_tensors(c);

  auto bad_dims = tensors;
  bad_dims["blocks.0.ffn.fc1.weight"].shape = {32, 64};
  try {
    ModelBundle(c, bad_dims);
    FAIL("expected a dimension error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
    CHECK(std::string(e.what()).find("blocks.0.ffn.fc1.weight") != std::string::npos);
  }

  auto missing = tensors;
  missing.erase("head.bias");
  try {
    ModelBundle(c, missing);
    FAIL("expected a missing-tensor error");
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("missing tensor 'head.bias'") != std::string::npos);
  }

  auto bytes = serialize_model(ModelBundle(c, tensors));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(parse_model(bad_magic), doctest::Contains("bad magic"), ModelError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_WITH_AS(parse_model(bad_version), doctest::Contains("unsupported PTIF version 2"), ModelError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 4);
  CHECK_THROWS_WITH_AS(parse_model(truncated), doctest::Contains("extends past the end"), ModelError);
  CHECK_THROWS_AS(load_model(temp_path("does_not_exist.ptif")), IoError);
}

TEST_CASE("config JSON round-trips and rejects unknown variants") {
  ModelConfig c = small_config(2, 3);
  c.variants[1] = substituted();
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK_THROWS_AS(config_from_json(R"({"n_blocks":1,"embed_dim":4,"n_heads":2,"max_seq_len":4,
      "variants":[{"activation":"swish","attention_norm":"softmax","ln1":"layernorm","ln2":"layernorm"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"n_blocks":1,"embed_dim":5,"n_heads":2,"max_seq_len":4})"), ConfigError);
}

TEST_CASE("reference GELU path evaluates GELU(1) = 0.8412") {
  // Zero attention, LN1' with beta 0, fc1 biases [1, 0], fc2 identity: the
  // block output is the centered pair (GELU(1), GELU(0)).
  ModelConfig c = small_config();
  c.embed_dim = 2;
  c.n_heads = 1;
  c.ffn_dim = 2;
  c.variants[0].ln1 = nn::Norm::kLayerNormSub;
  c.variants[0].ln2 = nn::Norm::kLayerNormSub;
  auto t = zero_tensors(c);
  t["blocks.0.ffn.fc1.bias"].values = {1.0f, 0.0f};
  t["blocks.0.ffn.fc2.weight"].values = {1.0f, 0.0f, 0.0f, 1.0f};
  const ModelBundle b(c, t);
  const PlainTensor x = encode_tensor({1, 2}, std::vector<double>{0.4, 0.4}, c.fp);
  const auto y = decode_tensor(reference_forward(b, x), c.fp);
  CHECK(y[0] - y[1] == doctest::Approx(0.8412).epsilon(0.0005));
}

TEST_CASE("zero input and zero weights give the head bias") {
  ModelConfig c = small_config(1, 3);
  auto t = zero_tensors(c);
  t["head.bias"].values = {0.5f, -1.25f, 2.0f};
  const ModelBundle b(c, t);
  const PlainTensor x({4, c.embed_dim});
  const PlainTensor ref = reference_forward(b, x);
  CHECK(ref == b.encoded("head.bias"));

  const auto local = run_local(b, std::vector<double>(x.size(), 0.0), 4, testing::small_options());
  CHECK(max_abs_diff(local.client.values, {0.5, -1.25, 2.0}) <= 4.0 / 8192);
}

TEST_CASE("zero weights with LayerNorm' centre the input") {
  ModelConfig c = small_config();
  c.variants[0] = substituted();
  const ModelBundle b(c, zero_tensors(c));
  const std::size_t rows = 4;
  const auto x = random_input(rows, c.embed_dim, 21);
  std::vector<double> centered(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c.embed_dim; ++j) mean += x[r * c.embed_dim + j];
    mean /= static_cast<double>(c.embed_dim);
    for (std::size_t j = 0; j < c.embed_dim; ++j) centered[r * c.embed_dim + j] = x[r * c.embed_dim + j] - mean;
  }
  const auto local = run_local(b, x, rows, testing::small_options());
  CHECK(max_abs_diff(local.client.values, centered) <= 8.0 / 8192);
}

TEST_CASE("private block matches the fixed-point reference for both variants") {
  for (const bool sub : {false, true}) {
    CAPTURE(sub);
    ModelConfig c = small_config();
    if (sub) c.variants[0] = substituted();
    const ModelBundle b = random_model(c, 5);
    const std::size_t rows = 8;
    const auto x = random_input(rows, c.embed_dim, 6);
    const auto ref = decode_tensor(reference_forward(b, encode_tensor({rows, c.embed_dim}, x, c.fp)), c.fp);
    const auto local = run_local(b, x, rows, testing::small_options());
    CHECK(max_abs_diff(local.client.values, ref) <= std::ldexp(1.0, -5));
    CHECK(max_abs_diff(ref, float_forward(b, x, rows)) <= std::ldexp(1.0, -6));
  }
}

TEST_CASE("fixed-point reference agrees with the float forward on random models") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig c = small_config(2, 4);
    if (seed % 2) c.variants[1] = substituted();
    const ModelBundle b = random_model(c, 100 + seed);
    const auto x = random_input(12, c.embed_dim, 200 + seed);
    const auto ref = decode_tensor(reference_forward(b, encode_tensor({12, c.embed_dim}, x, c.fp)), c.fp);
    CHECK(max_abs_diff(ref, float_forward(b, x, 12)) <= std::ldexp(1.0, -6));
  }
}

TEST_CASE("reference raises overflow on unbounded activations") {
  const ModelConfig c = small_config();
  auto t = random_model(c, 9).tensors();
  for (auto& v : t["blocks.0.ffn.fc1.weight"].values) v *= 200.0f;
  const ModelBundle b(c, t);
  const PlainTensor x = encode_tensor({4, c.embed_dim}, random_input(4, c.embed_dim, 1), c.fp);
  CHECK_THROWS_WITH_AS(reference_forward(b, x), doctest::Contains("blocks.0.ffn"), OverflowError);
}

TEST_CASE("two-block model: logits argmax matches the reference") {
  const ModelConfig c = small_config(2, 3);
  const ModelBundle b = random_model(c, 17);
  int agree = 0;
  const int runs = 10;
  for (int i = 0; i < runs; ++i) {
    const auto x = random_input(6, c.embed_dim, 300 + i);
    const auto ref = decode_tensor(reference_forward(b, encode_tensor({6, c.embed_dim}, x, c.fp)), c.fp);
    auto opts = testing::small_options();
    opts.seed = 40 + i;
    const auto got = run_local(b, x, 6, opts).client.values;
    CHECK(max_abs_diff(got, ref) <= std::ldexp(1.0, -5));
    agree += std::max_element(got.begin(), got.end()) - got.begin() ==
             std::max_element(ref.begin(), ref.end()) - ref.begin();
  }
  CHECK(agree >= runs - 1);
}

TEST_CASE("cost report: totals, categories, determinism, and the insecure flag") {
  const ModelConfig c = small_config(1, 2);
  const ModelBundle b = random_model(c, 23);
  const auto x = random_input(4, c.embed_dim, 24);
  const auto r1 = run_local(b, x, 4, testing::small_options());
  const auto r2 = run_local(b, x, 4, testing::small_options());
  const CostReport& rep = r1.client.report;

  mpc::CategoryCost sum;
  for (const auto& cat : rep.categories) sum += cat;
  CHECK(sum.bytes() == rep.total.bytes());
  CHECK(sum.rounds == rep.total.rounds);
  using mpc::Category;
  for (Category cat : {Category::kMatMul, Category::kSoftmax, Category::kGelu, Category::kLayerNorm,
                       Category::kTruncation, Category::kOther}) {
    CAPTURE(mpc::category_name(cat));
    CHECK(rep.category(cat).bytes() > 0);
  }
  CHECK(rep.primitives[static_cast<std::size_t>(Category::kEleMul)].bytes() > 0);
  CHECK_FALSE(rep.insecure);
  CHECK(rep.total.bytes() == r1.server.total.bytes());
  CHECK(rep.total.bytes() == r2.client.report.total.bytes());
  CHECK(r1.client.output == r2.client.output);

  const auto ideal = run_local(b, x, 4, testing::small_options(4096, mpc::Backend::kIdeal));
  CHECK(ideal.client.report.insecure);
  CHECK(ideal.server.insecure);
  CHECK(ideal.client.report.to_json().find("\"insecure\": true") != std::string::npos);
}

TEST_CASE("pipe and TCP runs reconstruct identical logits") {
  const ModelConfig c = small_config(1, 3);
  const ModelBundle b = random_model(c, 31);
  const auto x = random_input(5, c.embed_dim, 32);
  const auto opts = testing::small_options();
  const auto local = run_local(b, x, 5, opts);

  const std::string address = "127.0.0.1:39517";
  CostReport server_report;
  std::thread server([&] { server_report = serve(mpc::tcp_listen(address), b, opts); });
  const ClientOutcome remote = connect_and_infer(mpc::tcp_connect(address), x, 5, opts);
  server.join();
  CHECK(remote.output == local.client.output);
  CHECK(remote.report.total.bytes() == local.client.report.total.bytes());
  CHECK(server_report.total.bytes() == remote.report.total.bytes());
}

TEST_CASE("substituted operators cost fewer bytes than the originals") {
  ModelConfig c = small_config();
  const ModelBundle orig = random_model(c, 41);
  const ModelBundle sub = orig.with_variants({substituted()});
  const auto x = random_input(8, c.embed_dim, 42);
  const auto a = run_local(orig, x, 8, testing::small_options());
  const auto s = run_local(sub, x, 8, testing::small_options());
  CHECK(s.client.report.total.bytes() < a.client.report.total.bytes());
}
