#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "idv/tensor.hpp"

namespace idv {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  std::size_t index = 0;  // position in the owning store
};

/// Gradients laid out by Parameter::index; used as a per-pair accumulation
/// target when several graphs are reduced in a fixed order.
using ParamGrads = std::vector<Tensor>;

/// Ordered name -> parameter map. Iteration follows insertion order, and
/// references stay valid as parameters are added.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter& add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  Parameter& at(std::size_t index) { return params_.at(index); }
  const Parameter& at(std::size_t index) const { return params_.at(index); }

  std::size_t size() const { return params_.size(); }
  std::size_t num_elements() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  ParamGrads zero_grads_like() const;

  /// True when every value tensor is bitwise equal (names and order too).
  bool same_values(const ParamStore& other) const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace idv
