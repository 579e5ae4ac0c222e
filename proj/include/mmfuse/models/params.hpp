#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmfuse/numerics/rng.hpp"
#include "mmfuse/numerics/tape.hpp"

namespace mmfuse {

struct ParamEntry {
  Tensor value;
  // Frozen entries (and running statistics) are never handed to the optimizer.
  bool trainable = true;
};

/// Named parameter tensors of one model, iterated in name order.
class ModelParams {
 public:
  /// Throws ConfigError when the name is already taken.
  Tensor& add(const std::string& name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool trainable(const std::string& name) const;

  /// Marks every entry whose name starts with prefix; running statistics
  /// stay frozen regardless.
  void set_trainable(std::string_view prefix, bool trainable);

  std::vector<Tensor*> trainable_tensors();
  std::vector<std::string> names() const;
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t element_count() const;

  /// Copies every entry of other whose name starts with prefix (names kept).
  void merge(const ModelParams& other, std::string_view prefix = "");
  ModelParams subset(std::string_view prefix) const;

  void zero_grad();
  /// Hash over names, shapes and exact value bits.
  std::uint64_t checksum() const;

 private:
  std::map<std::string, ParamEntry> entries_;
};

bool is_running_stat(std::string_view name);

/// Uniform on +-sqrt(1/fan_in).
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, RngStream& rng);

/// Places parameters on a tape, once per name. Trainable entries become
/// gradient-bound leaves; frozen ones (or all, with constants_only) become
/// constants.
class Binder {
 public:
  Binder(Tape& tape, ModelParams& params, bool constants_only = false)
      : tape_(tape), params_(params), constants_only_(constants_only) {}

  Var operator()(const std::string& name);
  Tensor& tensor(const std::string& name) { return params_.at(name); }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  ModelParams& params_;
  bool constants_only_;
  std::unordered_map<std::string, Var> bound_;
};

}  // namespace mmfuse
