#include "mmfuse/models/params.hpp"

#include <bit>
#include <cmath>

#include "mmfuse/error.hpp"

namespace mmfuse {

bool is_running_stat(std::string_view name) {
  return name.ends_with(".running_mean") || name.ends_with(".running_var");
}

Tensor& ModelParams::add(const std::string& name, Tensor value, bool trainable) {
  auto [it, inserted] = entries_.try_emplace(name, ParamEntry{std::move(value), trainable && !is_running_stat(name)});
  if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
  return it->second.value;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.value;
}

const Tensor& ModelParams::at(const std::string& name) const { return const_cast<ModelParams*>(this)->at(name); }

bool ModelParams::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second.trainable;
}

void ModelParams::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& [name, e] : entries_) {
    if (name.starts_with(prefix)) e.trainable = trainable && !is_running_stat(name);
  }
}

std::vector<Tensor*> ModelParams::trainable_tensors() {
  std::vector<Tensor*> out;
  for (auto& [name, e] : entries_) {
    if (e.trainable) out.push_back(&e.value);
  }
  return out;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::size_t ModelParams::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

void ModelParams::merge(const ModelParams& other, std::string_view prefix) {
  for (const auto& [name, e] : other.entries_) {
    if (!name.starts_with(prefix)) continue;
    Tensor copy = e.value;
    copy.drop_grad();
    add(name, std::move(copy), e.trainable);
  }
}

ModelParams ModelParams::subset(std::string_view prefix) const {
  ModelParams out;
  out.merge(*this, prefix);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [name, e] : entries_) e.value.zero_grad();
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  for (const auto& [name, e] : entries_) {
    for (char c : name) feed(static_cast<unsigned char>(c));
    for (std::size_t d : e.value.shape()) feed(d);
    for (double v : e.value.data()) feed(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, RngStream& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Var Binder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  Tensor& t = params_.at(name);
  const Var v = (!constants_only_ && params_.trainable(name)) ? tape_.parameter(t) : tape_.constant(t);
  bound_.emplace(name, v);
  return v;
}

}  // namespace mmfuse
