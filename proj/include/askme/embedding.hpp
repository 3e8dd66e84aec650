#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "askme/params.hpp"
#include "askme/tensor.hpp"

namespace askme {

// embeddings.f32: 16-byte header (magic "AEMB", u32 version=1, u32 rows,
// u32 cols) followed by little-endian float32 values, row-major.
void write_embeddings_f32(const std::string& path,
                          const std::vector<std::vector<float>>& rows);
std::vector<std::vector<float>> read_embeddings_f32(const std::string& path);

// Question embeddings: a frozen fixed part loaded from embeddings.f32 plus a
// learned part (trainable tensor "emb.learned" in the ParamStore). lookup()
// concatenates the two, so the full dimension is fixed_dim + learned_dim.
class EmbeddingTable {
 public:
  // Row order of `fixed` defines the question index; `question_ids[i]` names
  // row i.
  EmbeddingTable(std::vector<std::string> question_ids,
                 std::vector<std::vector<float>> fixed);

  std::size_t question_count() const { return ids_.size(); }
  std::size_t fixed_dim() const { return fixed_dim_; }
  const std::vector<std::string>& question_ids() const { return ids_; }

  std::size_t row_of(const std::string& question_id) const;
  bool has(const std::string& question_id) const;

  // The frozen fixed part of row r, as doubles.
  std::vector<double> fixed_row(std::size_t r) const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> fixed_;  // row-major, question_count x fixed_dim
  std::size_t fixed_dim_ = 0;
};

}  // namespace askme
