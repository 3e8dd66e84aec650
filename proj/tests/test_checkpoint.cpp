#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "askme/checkpoint.hpp"

using namespace askme;

namespace {

std::shared_ptr<EmbeddingTable> small_table() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<std::string> ids;
  std::vector<std::vector<float>> fixed;
  for (int i = 0; i < 8; ++i) {
    ids.push_back("q" + std::to_string(i));
    std::vector<float> row(4);
    for (float& v : row) v = u(rng);
    fixed.push_back(std::move(row));
  }
  return std::make_shared<EmbeddingTable>(std::move(ids), std::move(fixed));
}

Model small_model() {
  ModelConfig cfg;
  cfg.fixed_dim = 4;
  cfg.learned_dim = 3;
  cfg.segment_cap = 7;
  cfg.n_similar = 4;
  cfg.lambda = 0.025;
  cfg.history_cap = 9;
  cfg.group_softmax = false;
  return Model(Variant::kAskMeP, cfg, small_table(), 17);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("checkpoints round-trip parameters, variant, and configuration") {
  Model model = small_model();
  const std::string path = temp_path("askme_ckpt_roundtrip.bin");
  save_checkpoint(path, model);

  Model loaded = load_checkpoint(path, small_table());
  CHECK(loaded.variant == Variant::kAskMeP);
  CHECK(loaded.cfg.fixed_dim == 4);
  CHECK(loaded.cfg.learned_dim == 3);
  CHECK(loaded.cfg.segment_cap == 7);
  CHECK(loaded.cfg.n_similar == 4);
  CHECK(loaded.cfg.lambda == 0.025);
  CHECK(loaded.cfg.history_cap == 9);
  CHECK(loaded.cfg.group_softmax == false);

  REQUIRE(loaded.params.names() == model.params.names());
  for (const auto& name : model.params.names()) {
    const Tensor& a = model.params.get(name);
    const Tensor& b = loaded.params.get(name);
    CHECK(a.shape == b.shape);
    CHECK(a.data == b.data);  // bit-exact
  }
  std::remove(path.c_str());
}

TEST_CASE("saving twice produces byte-identical files") {
  Model model = small_model();
  const std::string p1 = temp_path("askme_ckpt_a.bin");
  const std::string p2 = temp_path("askme_ckpt_b.bin");
  save_checkpoint(p1, model);
  save_checkpoint(p2, model);
  CHECK(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("every single-byte corruption is caught by the checksum") {
  Model model = small_model();
  const std::string path = temp_path("askme_ckpt_corrupt.bin");
  save_checkpoint(path, model);
  const std::string good = slurp(path);
  REQUIRE(good.size() > 64);

  // Flip a byte at a few scattered offsets, including header and payload.
  for (std::size_t off : {std::size_t{0}, std::size_t{5}, std::size_t{20},
                          good.size() / 2, good.size() - 6}) {
    std::string bad = good;
    bad[off] = static_cast<char>(bad[off] ^ 0x40);
    spit(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path, small_table()), CorruptCheckpointError);
  }
  std::remove(path.c_str());
}

TEST_CASE("truncated checkpoints are rejected") {
  Model model = small_model();
  const std::string path = temp_path("askme_ckpt_trunc.bin");
  save_checkpoint(path, model);
  const std::string good = slurp(path);

  for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{15},
                          good.size() / 3, good.size() - 1}) {
    spit(path, good.substr(0, len));
    CHECK_THROWS_AS(load_checkpoint(path, small_table()), CorruptCheckpointError);
  }
  std::remove(path.c_str());
}

TEST_CASE("wrong magic and unsupported versions are rejected with the CRC intact") {
  Model model = small_model();
  const std::string path = temp_path("askme_ckpt_magic.bin");
  save_checkpoint(path, model);
  std::string body = slurp(path);
  body.resize(body.size() - 4);  // strip CRC

  auto reseal = [&](std::string b) {
    std::uint32_t c = crc32(reinterpret_cast<const unsigned char*>(b.data()), b.size());
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((c >> (8 * i)) & 0xff));
    spit(path, b);
  };

  SUBCASE("bad magic") {
    std::string b = body;
    b[0] = 'X';
    reseal(b);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, small_table()),
                         doctest::Contains("magic"), CorruptCheckpointError);
  }
  SUBCASE("unsupported version") {
    std::string b = body;
    b[4] = 9;
    reseal(b);
    CHECK_THROWS_WITH_AS(load_checkpoint(path, small_table()),
                         doctest::Contains("version"), CorruptCheckpointError);
  }
  std::remove(path.c_str());
}

TEST_CASE("a missing checkpoint file raises an IO error") {
  CHECK_THROWS_AS(load_checkpoint(temp_path("askme_no_such_ckpt.bin"), small_table()),
                  IoError);
}
