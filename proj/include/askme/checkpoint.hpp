#pragma once

#include <memory>
#include <string>

#include "askme/model.hpp"

namespace askme {

class CorruptCheckpointError : public std::runtime_error {
 public:
  explicit CorruptCheckpointError(const std::string& what)
      : std::runtime_error(what) {}
};

// Checkpoint file: magic "ASKM", u32 version=1, u32 tensor-count; per tensor:
// u16 name-length, UTF-8 name, u8 rank, u32 dims[rank], little-endian f64
// payload; trailing CRC32 of all preceding bytes. Model variant and config
// travel as scalar "meta.*" tensors.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path,
                      std::shared_ptr<EmbeddingTable> emb);

std::uint32_t crc32(const unsigned char* data, std::size_t len);

}  // namespace askme
