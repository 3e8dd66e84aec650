#include "askme/embedding.hpp"

#include <cstring>
#include <fstream>

#include "askme/corpus.hpp"

namespace askme {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_embeddings_f32(const std::string& path,
                          const std::vector<std::vector<float>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embeddings: " + path);
  const std::uint32_t nrows = static_cast<std::uint32_t>(rows.size());
  const std::uint32_t ncols =
      rows.empty() ? 0 : static_cast<std::uint32_t>(rows[0].size());
  out.write("AEMB", 4);
  put_u32(out, 1);
  put_u32(out, nrows);
  put_u32(out, ncols);
  for (const auto& row : rows) {
    if (row.size() != ncols) throw ShapeError("embeddings: ragged rows");
    for (float v : row) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::vector<float>> read_embeddings_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AEMB", 4) != 0) {
    throw ParseError(path + ": bad magic, expected AEMB");
  }
  const std::uint32_t version = get_u32(in);
  if (version != 1) {
    throw ParseError(path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t nrows = get_u32(in);
  const std::uint32_t ncols = get_u32(in);
  std::vector<std::vector<float>> rows(nrows, std::vector<float>(ncols));
  for (auto& row : rows) {
    for (float& v : row) {
      std::uint32_t bits = get_u32(in);
      std::memcpy(&v, &bits, 4);
    }
  }
  if (!in) throw ParseError(path + ": truncated payload");
  return rows;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> question_ids,
                               std::vector<std::vector<float>> fixed)
    : ids_(std::move(question_ids)) {
  if (ids_.size() != fixed.size()) {
    throw ShapeError("EmbeddingTable: " + std::to_string(ids_.size()) +
                     " ids vs " + std::to_string(fixed.size()) + " rows");
  }
  fixed_dim_ = fixed.empty() ? 0 : fixed[0].size();
  fixed_.reserve(ids_.size() * fixed_dim_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (fixed[i].size() != fixed_dim_) throw ShapeError("EmbeddingTable: ragged rows");
    fixed_.insert(fixed_.end(), fixed[i].begin(), fixed[i].end());
    index_.emplace(ids_[i], i);
  }
  if (index_.size() != ids_.size()) {
    throw std::invalid_argument("EmbeddingTable: duplicate question ids");
  }
}

std::size_t EmbeddingTable::row_of(const std::string& question_id) const {
  auto it = index_.find(question_id);
  if (it == index_.end()) {
    throw std::out_of_range("EmbeddingTable: unknown question " + question_id);
  }
  return it->second;
}

bool EmbeddingTable::has(const std::string& question_id) const {
  return index_.count(question_id) != 0;
}

std::vector<double> EmbeddingTable::fixed_row(std::size_t r) const {
  std::vector<double> out(fixed_dim_);
  for (std::size_t j = 0; j < fixed_dim_; ++j) out[j] = fixed_[r * fixed_dim_ + j];
  return out;
}

}  // namespace askme
