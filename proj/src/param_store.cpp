#include "vpfd/param_store.hpp"

#include <stdexcept>

namespace vpfd::nn {

Param& ParamStore::create(const std::string& name, std::vector<Index> shape) {
  if (has(name)) throw std::logic_error("param already exists: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor::zeros(std::move(shape));
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no such param: " + name);
  return *params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no such param: " + name);
  return *params_[it->second];
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

Index ParamStore::total_values() const {
  Index n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  for (auto& p : params_) {
    const Param& src = other.at(p->name);
    if (src.value.shape != p->value.shape) {
      throw std::invalid_argument("param shape mismatch for " + p->name);
    }
    p->value.data = src.value.data;
  }
}

}  // namespace vpfd::nn
