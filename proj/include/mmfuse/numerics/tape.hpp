#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "mmfuse/numerics/tensor.hpp"

namespace mmfuse {

enum class Mode { Train, Eval };

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Reverse-mode autodiff tape.
///
/// Values are appended in evaluation order, so the node list is topologically
/// sorted by construction. Nodes are only recorded when some input requires a
/// gradient; backward() replays them once, newest first.
class Tape {
 public:
  /// Backward rule for one node. Receives the tape and the node's output; it
  /// reads grad(out) and accumulates into grad_buffer() of inputs that
  /// require_grad().
  using BackwardFn = std::function<void(Tape&, Var out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (read it with grad()).
  Var input(Tensor value);
  /// Leaf bound to an external tensor; backward() adds into param.grad.
  /// The tensor must outlive the tape and must not be resized meanwhile.
  Var parameter(Tensor& param);

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  /// Gradient of v; empty span when nothing flowed into v.
  std::span<const double> grad(Var v) const;
  /// Mutable gradient buffer of v, zero-initialised on first access.
  std::span<double> grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once.
  /// Throws ContractError when loss is not a single element or when the tape
  /// was already replayed.
  void backward(Var loss);

  std::size_t size() const { return entries_.size(); }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Entry {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    Tensor* bound = nullptr;
  };
  struct Node {
    std::size_t output;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, Tensor* bound);
  const Entry& entry(Var v) const;
  Entry& entry(Var v);

  std::deque<Entry> entries_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace mmfuse
