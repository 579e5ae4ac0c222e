#include "mmfuse/numerics/tape.hpp"

#include <algorithm>

#include "mmfuse/error.hpp"

namespace mmfuse {

Var Tape::push(Tensor value, bool requires_grad, Tensor* bound) {
  entries_.push_back(Entry{std::move(value), {}, requires_grad, bound});
  return Var{entries_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::parameter(Tensor& param) {
  Tensor copy = param;
  copy.drop_grad();
  return push(std::move(copy), true, &param);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [this](Var v) { return v.valid() && entry(v).requires_grad; });
  Var out = push(std::move(value), needs, nullptr);
  if (needs) nodes_.push_back(Node{out.id, std::move(backward)});
  return out;
}

const Tape::Entry& Tape::entry(Var v) const {
  if (v.id >= entries_.size()) throw ContractError("variable does not belong to this tape");
  return entries_[v.id];
}

Tape::Entry& Tape::entry(Var v) {
  if (v.id >= entries_.size()) throw ContractError("variable does not belong to this tape");
  return entries_[v.id];
}

const Tensor& Tape::value(Var v) const { return entry(v).value; }

bool Tape::requires_grad(Var v) const { return entry(v).requires_grad; }

std::span<const double> Tape::grad(Var v) const { return entry(v).grad; }

std::span<double> Tape::grad_buffer(Var v) {
  Entry& e = entry(v);
  if (e.grad.empty()) e.grad.assign(e.value.size(), 0.0);
  return e.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw ContractError("backward() already ran on this tape");
  if (value(loss).size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  consumed_ = true;
  if (!entry(loss).requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (entries_[it->output].grad.empty()) continue;
    it->backward(*this, Var{it->output});
  }
  for (Entry& e : entries_) {
    if (!e.bound || e.grad.empty()) continue;
    e.bound->ensure_grad();
    auto g = e.bound->grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += e.grad[i];
  }
}

}  // namespace mmfuse
