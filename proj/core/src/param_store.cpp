#include "idv/param_store.hpp"

#include "idv/error.hpp"

namespace idv {

ParamStore::ParamStore(const ParamStore& other)
    : params_(other.params_), index_(other.index_) {}

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this != &other) {
    params_ = other.params_;
    index_ = other.index_;
  }
  return *this;
}

Parameter& ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw InvalidArgument("duplicate parameter '" + name + "'");
  const std::size_t idx = params_.size();
  Tensor grad(value.shape(), 0.0);
  index_.emplace(name, idx);
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad), idx});
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

Parameter& ParamStore::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParamStore::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

std::size_t ParamStore::num_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

ParamGrads ParamStore::zero_grads_like() const {
  ParamGrads grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.value.shape(), 0.0);
  return grads;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name) return false;
    if (!(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

}  // namespace idv
