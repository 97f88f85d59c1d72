#pragma once

// On-disk formats:
//  - raw tensor: magic "DLT1", u8 rank, u32-LE extents, f64-LE payload;
//  - checkpoint: magic "DLC1", length-prefixed config JSON, FNV-1a digest of
//    the config bytes, then count-prefixed (name, raw tensor) records;
//  - frames: binary PPM (P6, 8-bit).
// All loaders throw IoError on malformed or truncated input.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dirlatent/tensor.hpp"

namespace dirlatent::serialize {

// FNV-1a 64-bit digest, used to fingerprint checkpoint configs.
uint64_t fnv1a64(const void* data, size_t size);

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Named-tensor container with the configuration it was produced under.
struct Checkpoint {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> tensors;

    uint64_t config_digest() const;
    const Tensor& tensor(const std::string& name) const;  // IoError if absent
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// 8-bit binary PPM frames. Writing clamps to [0, 1] and quantizes to 255
// levels; frames must be [H, W, 3].
void write_ppm(const std::string& path, const Tensor& frame);
Tensor read_ppm(const std::string& path);

}  // namespace dirlatent::serialize
