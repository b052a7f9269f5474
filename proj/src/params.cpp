#include "aggnet/params.hpp"

#include "aggnet/errors.hpp"

namespace aggnet {

Param& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_[name] = entries_.size();
  Param& p = entries_.emplace_back();
  p.name = name;
  p.grad = Tensor::zeros(init.shape());
  p.value = std::move(init);
  p.trainable = trainable;
  return p;
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second];
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const Param& p : entries_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (Param& p : entries_) p.grad.fill(0.0);
}

void ParamStore::scale_grads(double s) {
  for (Param& p : entries_) {
    if (p.trainable) p.grad.scale(s);
  }
}

}  // namespace aggnet
