#pragma once

#include <map>
#include <string>
#include <vector>

#include "vpfd/param_store.hpp"
#include "vpfd/tensor.hpp"

namespace vpfd {

// Self-describing binary container: a text metadata block ("key = value"
// lines, sorted) followed by named float64 arrays. Round-trips bit-exactly.
// Layout (little-endian):
//   magic   "VPFDCK01"
//   u32     format version (1)
//   u64     meta length, meta bytes
//   u64     array count
//   per array: u32 name length, name bytes, u8 dtype (1 = f64),
//              u32 rank, u64 dims[rank], f64 data[numel]
struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, nn::Tensor>> arrays;

  const nn::Tensor* find(const std::string& name) const;
  std::string meta_or(const std::string& key, const std::string& fallback) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& ck);
CheckpointData load_checkpoint(const std::string& path);

// Appends every parameter as "<prefix><name>".
void store_params(CheckpointData& ck, const nn::ParamStore& store, const std::string& prefix = "");
// Loads every parameter of `store` from "<prefix><name>"; missing or
// shape-mismatched arrays are an error.
void load_params(const CheckpointData& ck, nn::ParamStore& store, const std::string& prefix = "");

}  // namespace vpfd
