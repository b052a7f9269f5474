#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "aggnet/tensor.hpp"

namespace aggnet {

// One named parameter tensor with its gradient accumulator. Frozen entries
// (trainable == false) still serialize with the model but the optimizer and
// backward passes leave them alone.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Insertion-ordered registry of parameters. The order parameters are added is
// the order they are serialized and the order the optimizer walks them, which
// keeps runs bitwise reproducible. Storage is a deque so references stay valid
// as the model registers more entries.
class ParamStore {
 public:
  Param& add(const std::string& name, Tensor init, bool trainable = true);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t count() const { return entries_.size(); }
  Param& entry(std::size_t i) { return entries_[i]; }
  const Param& entry(std::size_t i) const { return entries_[i]; }

  // Total scalar count across all entries (trainable or not).
  std::size_t total_size() const;

  void zero_grads();
  void scale_grads(double s);

 private:
  std::deque<Param> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace aggnet
