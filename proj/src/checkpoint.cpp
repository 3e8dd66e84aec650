#include "askme/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "askme/corpus.hpp"

namespace askme {

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  std::uint16_t u16() { return static_cast<std::uint16_t>(u8() | (u8() << 8)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(u8()) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  unsigned u8() {
    need(1);
    return p_[pos_++];
  }
  void need(std::size_t len) {
    if (pos_ + len > n_) throw CorruptCheckpointError("checkpoint truncated");
  }
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

void append_tensor(std::string& body, const std::string& name, const Tensor& t) {
  put_u16(body, static_cast<std::uint16_t>(name.size()));
  body.append(name);
  body.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape) put_u32(body, static_cast<std::uint32_t>(d));
  for (double v : t.data) put_f64(body, v);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  std::string body;
  body.append("ASKM");
  put_u32(body, 1);

  std::vector<std::pair<std::string, Tensor>> metas = {
      {"meta.variant", Tensor::scalar(static_cast<double>(model.variant))},
      {"meta.fixed_dim", Tensor::scalar(static_cast<double>(model.cfg.fixed_dim))},
      {"meta.learned_dim", Tensor::scalar(static_cast<double>(model.cfg.learned_dim))},
      {"meta.segment_cap", Tensor::scalar(static_cast<double>(model.cfg.segment_cap))},
      {"meta.n_similar", Tensor::scalar(static_cast<double>(model.cfg.n_similar))},
      {"meta.lambda", Tensor::scalar(model.cfg.lambda)},
      {"meta.history_cap", Tensor::scalar(static_cast<double>(model.cfg.history_cap))},
      {"meta.group_softmax", Tensor::scalar(model.cfg.group_softmax ? 1.0 : 0.0)},
  };
  put_u32(body, static_cast<std::uint32_t>(metas.size() + model.params.count()));
  for (const auto& [name, t] : metas) append_tensor(body, name, t);
  for (const std::string& name : model.params.names()) {
    append_tensor(body, name, model.params.get(name));
  }
  put_u32(body, crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed: " + path);
}

Model load_checkpoint(const std::string& path,
                      std::shared_ptr<EmbeddingTable> emb) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 16) throw CorruptCheckpointError("checkpoint too short");

  const std::size_t body_len = blob.size() - 4;
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<std::uint32_t>(bytes[body_len + i]) << (8 * i);
  }
  if (crc32(bytes, body_len) != stored) {
    throw CorruptCheckpointError("checkpoint CRC mismatch: " + path);
  }

  Reader r(bytes, body_len);
  if (r.bytes(4) != "ASKM") throw CorruptCheckpointError("bad magic, expected ASKM");
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw CorruptCheckpointError("unsupported checkpoint version " +
                                 std::to_string(version));
  }
  const std::uint32_t count = r.u32();

  std::unordered_map<std::string, double> meta;
  ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u16());
    const std::size_t rank = r.bytes(1)[0];
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      shape[d] = r.u32();
      n *= shape[d];
    }
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    if (name.starts_with("meta.")) {
      meta[name] = data.at(0);
    } else {
      params.add(name, Tensor(std::move(shape), std::move(data)));
    }
  }

  auto meta_get = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw CorruptCheckpointError("missing " + key);
    return it->second;
  };
  ModelConfig cfg;
  cfg.fixed_dim = static_cast<std::size_t>(meta_get("meta.fixed_dim"));
  cfg.learned_dim = static_cast<std::size_t>(meta_get("meta.learned_dim"));
  cfg.segment_cap = static_cast<std::size_t>(meta_get("meta.segment_cap"));
  cfg.n_similar = static_cast<std::size_t>(meta_get("meta.n_similar"));
  cfg.lambda = meta_get("meta.lambda");
  cfg.history_cap = static_cast<std::size_t>(meta_get("meta.history_cap"));
  cfg.group_softmax = meta_get("meta.group_softmax") != 0.0;
  const auto variant = static_cast<Variant>(static_cast<int>(meta_get("meta.variant")));
  return Model(variant, cfg, std::move(emb), std::move(params));
}

}  // namespace askme
