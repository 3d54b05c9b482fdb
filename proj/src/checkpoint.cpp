#include "vpfd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vpfd/errors.hpp"

namespace vpfd {

namespace {

constexpr char kMagic[9] = "VPFDCK01";

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

const nn::Tensor* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string CheckpointData::meta_or(const std::string& key, const std::string& fallback) const {
  auto it = meta.find(key);
  return it == meta.end() ? fallback : it->second;
}

void save_checkpoint(const std::string& path, const CheckpointData& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(kMagic, 8);
  put<uint32_t>(f, 1);

  std::string meta;
  for (const auto& [k, v] : ck.meta) meta += k + " = " + v + "\n";
  put<uint64_t>(f, meta.size());
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));

  put<uint64_t>(f, ck.arrays.size());
  for (const auto& [name, t] : ck.arrays) {
    put<uint32_t>(f, static_cast<uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(f, 1);
    put<uint32_t>(f, static_cast<uint32_t>(t.rank()));
    for (nn::Index d : t.shape) put<uint64_t>(f, static_cast<uint64_t>(d));
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!f) throw DataError("short write to checkpoint: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DependencyError("missing checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) throw DataError("bad checkpoint magic: " + path);
  const uint32_t version = get<uint32_t>(f, path);
  if (version != 1) throw DataError("unsupported checkpoint version: " + path);

  CheckpointData ck;
  const uint64_t meta_len = get<uint64_t>(f, path);
  std::string meta(meta_len, '\0');
  f.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!f) throw DataError("truncated checkpoint: " + path);
  size_t pos = 0;
  while (pos < meta.size()) {
    size_t eol = meta.find('\n', pos);
    if (eol == std::string::npos) eol = meta.size();
    const std::string line = meta.substr(pos, eol - pos);
    pos = eol + 1;
    const size_t sep = line.find(" = ");
    if (sep != std::string::npos) ck.meta[line.substr(0, sep)] = line.substr(sep + 3);
  }

  const uint64_t count = get<uint64_t>(f, path);
  ck.arrays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t name_len = get<uint32_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw DataError("truncated checkpoint: " + path);
    const uint8_t dtype = get<uint8_t>(f, path);
    if (dtype != 1) throw DataError("unsupported dtype in checkpoint: " + path);
    const uint32_t rank = get<uint32_t>(f, path);
    std::vector<nn::Index> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<nn::Index>(get<uint64_t>(f, path));
    nn::Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw DataError("truncated checkpoint: " + path);
    ck.arrays.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void store_params(CheckpointData& ck, const nn::ParamStore& store, const std::string& prefix) {
  for (const nn::Param* p : store.all()) ck.arrays.emplace_back(prefix + p->name, p->value);
}

void load_params(const CheckpointData& ck, nn::ParamStore& store, const std::string& prefix) {
  for (nn::Param* p : store.all()) {
    const nn::Tensor* t = ck.find(prefix + p->name);
    if (t == nullptr) throw DataError("checkpoint is missing parameter: " + prefix + p->name);
    if (t->shape != p->value.shape) {
      throw DataError("checkpoint shape mismatch for " + prefix + p->name + ": file " + t->shape_str() +
                      " vs model " + p->value.shape_str());
    }
    p->value.data = t->data;
  }
}

}  // namespace vpfd
