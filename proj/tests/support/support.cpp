#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "mmfuse/models/baselines.hpp"
#include "mmfuse/models/encoder.hpp"
#include "mmfuse/models/fusion.hpp"
#include "mmfuse/numerics/ops.hpp"

namespace mmfuse::testing {

Tensor random_tensor(Shape shape, RngStream& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

namespace {

double evaluate(const std::vector<Tensor*>& tensors, const LossFn& loss) {
  Tape tape;
  std::vector<Var> leaves;
  for (Tensor* t : tensors) leaves.push_back(tape.constant(*t));
  return tape.value(loss(tape, leaves))[0];
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_per_tensor, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (max_per_tensor == 0 || n <= max_per_tensor) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(max_per_tensor);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void record(GradcheckResult& r, double analytic, double numeric, double floor, const std::string& where) {
  const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
  ++r.checked;
  if (r.worst.empty() || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst = where;
  }
}

}  // namespace

GradcheckResult gradcheck(const std::vector<Tensor*>& tensors, const LossFn& loss, double eps, double floor,
                          std::size_t max_per_tensor, std::uint64_t seed) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* t : tensors) {
      t->ensure_grad();
      t->zero_grad();
      leaves.push_back(tape.parameter(*t));
    }
    tape.backward(loss(tape, leaves));
    for (Tensor* t : tensors) analytic.emplace_back(t->grad().begin(), t->grad().end());
  }
  GradcheckResult r;
  RngStream rng(seed);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor& t = *tensors[k];
    for (std::size_t i : probe_indices(t.size(), max_per_tensor, rng)) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double up = evaluate(tensors, loss);
      t[i] = saved - eps;
      const double down = evaluate(tensors, loss);
      t[i] = saved;
      record(r, analytic[k][i], (up - down) / (2 * eps), floor,
             "tensor" + std::to_string(k) + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

GradcheckResult gradcheck_model(Model& model, const std::array<Tensor, 3>& inputs, const std::vector<double>& labels,
                                Mode mode, std::size_t max_per_tensor, double eps, double floor) {
  const std::array<bool, 3> used = model.uses();
  auto run = [&](ParamBinding binding) {
    Tape tape;
    ModelInputs x;
    for (std::size_t m = 0; m < 3; ++m) {
      if (used[m]) x[m] = tape.constant(inputs[m]);
    }
    RngStream rng(99);
    Var logits = model.forward(tape, x, mode, rng, binding);
    Var loss = ops::bce_with_logits(tape, logits, labels);
    const double value = tape.value(loss)[0];
    if (binding == ParamBinding::Trainable) tape.backward(loss);
    return value;
  };
  ModelParams& params = model.params();
  params.set_trainable("", true);
  for (Tensor* t : params.trainable_tensors()) {
    t->ensure_grad();
    t->zero_grad();
  }
  run(ParamBinding::Trainable);
  GradcheckResult r;
  RngStream pick(7);
  for (const std::string& name : params.names()) {
    if (!params.trainable(name)) continue;
    Tensor& t = params.at(name);
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i : probe_indices(t.size(), max_per_tensor, pick)) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double up = run(ParamBinding::Constant);
      t[i] = saved - eps;
      const double down = run(ParamBinding::Constant);
      t[i] = saved;
      record(r, analytic[i], (up - down) / (2 * eps), floor, name + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

namespace {

// sum(y * w) with fixed random w, so no output direction cancels.
Var project(Tape& tape, Var y, RngStream& rng) {
  const Tensor& v = tape.value(y);
  Var w = tape.constant(random_tensor(v.shape(), rng));
  return ops::sum(tape, ops::mul(tape, y, w));
}

std::array<Tensor, 3> toy_inputs(std::size_t batch, std::size_t frames, RngStream& rng) {
  return {random_tensor({batch, frames, kAudioFeatures}, rng), random_tensor({batch, frames, kVideoFeatures}, rng),
          random_tensor({batch, frames, kTextFeatures}, rng)};
}

}  // namespace

std::vector<GradientCase> gradient_suite(std::uint64_t seed) {
  std::vector<GradientCase> out;
  RngStream root(seed);
  auto layer = [&](const std::string& name, std::vector<Tensor> tensors,
                   std::function<Var(Tape&, const std::vector<Var>&)> body) {
    const std::uint64_t proj_seed = root.derive(name).derive("projection").seed();
    std::vector<Tensor*> ptrs;
    for (Tensor& t : tensors) ptrs.push_back(&t);
    LossFn loss = [&](Tape& tape, const std::vector<Var>& v) {
      RngStream proj(proj_seed);
      return project(tape, body(tape, v), proj);
    };
    out.push_back({name, gradcheck(ptrs, loss)});
  };

  RngStream g = root.derive("tensors");
  layer("conv1d", {random_tensor({2, 9, 3}, g), random_tensor({4, 3, 3}, g), random_tensor({4}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::conv1d(t, v[0], v[1], v[2], 2); });

  Tensor rm({3}, 0.0), rv({3}, 1.0);
  layer("batch_norm_train", {random_tensor({2, 5, 3}, g), random_tensor({3}, g, 0.5, 1.5), random_tensor({3}, g)},
        [&](Tape& t, const std::vector<Var>& v) {
          return ops::batch_norm(t, v[0], v[1], v[2], {&rm, &rv, 0.1}, 1e-5, Mode::Train);
        });
  Tensor em = random_tensor({3}, g), ev = random_tensor({3}, g, 0.5, 2.0);
  layer("batch_norm_eval", {random_tensor({2, 5, 3}, g), random_tensor({3}, g, 0.5, 1.5), random_tensor({3}, g)},
        [&](Tape& t, const std::vector<Var>& v) {
          return ops::batch_norm(t, v[0], v[1], v[2], {&em, &ev, 0.1}, 1e-5, Mode::Eval);
        });
  layer("linear", {random_tensor({5, 3}, g), random_tensor({4, 3}, g), random_tensor({4}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::linear(t, v[0], v[1], v[2]); });
  {
    std::vector<Tensor> ts{random_tensor({2, 4, 4}, g)};
    for (int i = 0; i < 4; ++i) {
      ts.push_back(random_tensor({4, 4}, g));
      ts.push_back(random_tensor({4}, g));
    }
    layer("attention", std::move(ts), [](Tape& t, const std::vector<Var>& v) {
      return ops::multi_head_self_attention(t, v[0], {v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]}, 2);
    });
  }
  layer("layer_norm", {random_tensor({3, 5}, g), random_tensor({5}, g, 0.5, 1.5), random_tensor({5}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::layer_norm(t, v[0], v[1], v[2], 1e-5); });
  for (bool reverse : {false, true}) {
    layer(reverse ? "lstm_reverse" : "lstm",
          {random_tensor({2, 5, 3}, g), random_tensor({8, 3}, g), random_tensor({8, 2}, g), random_tensor({8}, g)},
          [reverse](Tape& t, const std::vector<Var>& v) { return ops::lstm(t, v[0], v[1], v[2], v[3], reverse); });
  }
  layer("max_mean_pool", {random_tensor({2, 6, 3}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::max_mean_pool(t, v[0]); });
  layer("dropout_eval", {random_tensor({3, 4}, g)}, [](Tape& t, const std::vector<Var>& v) {
    RngStream r(3);
    return ops::dropout(t, v[0], 0.4, Mode::Eval, r);
  });
  layer("dropout_train_fixed_mask", {random_tensor({3, 4}, g)}, [](Tape& t, const std::vector<Var>& v) {
    RngStream r(3);
    return ops::dropout(t, v[0], 0.4, Mode::Train, r);
  });
  layer("softmax", {random_tensor({3, 4}, g)}, [](Tape& t, const std::vector<Var>& v) { return ops::softmax(t, v[0]); });
  layer("sigmoid_tanh", {random_tensor({3, 4}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::sigmoid(t, ops::tanh(t, v[0])); });
  layer("time_step_concat", {random_tensor({2, 4, 3}, g), random_tensor({2, 4, 2}, g)},
        [](Tape& t, const std::vector<Var>& v) {
          return ops::concat_last(t, {ops::time_step(t, v[0], 3), ops::time_step(t, v[1], 1)});
        });
  layer("weighted_time_sum", {random_tensor({2, 4, 3}, g), random_tensor({2, 4}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::weighted_time_sum(t, v[0], ops::softmax(t, v[1])); });
  layer("outer_fusion", {random_tensor({2, 2}, g), random_tensor({2, 3}, g), random_tensor({2, 2}, g)},
        [](Tape& t, const std::vector<Var>& v) { return ops::outer_fusion(t, {v[0], v[1], v[2]}); });
  layer("bce_with_logits", {random_tensor({4}, g, -3, 3)}, [](Tape& t, const std::vector<Var>& v) {
    const std::vector<double> y{1, 0, 1, 0};
    return ops::bce_with_logits(t, v[0], y);
  });

  // Full architectures on a toy batch: B = 3, T = 20.
  const std::vector<double> labels{1, 0, 1};
  RngStream mg = root.derive("models");
  const std::array<Tensor, 3> x = toy_inputs(3, 20, mg);
  EncoderConfig enc;
  enc.layers = {{4, 3, 2}, {4, 3, 1}};
  enc.head_hidden = {4};
  FusionConfig fus;
  fus.heads = 2;
  fus.ff_dim = 8;
  fus.head_hidden = {4};
  {
    RngStream init = mg.derive("unimodal");
    UnimodalModel m(Modality::Video, enc, init);
    out.push_back({"unimodal_encoder_head", gradcheck_model(m, x, labels, Mode::Train)});
  }
  {
    RngStream init = mg.derive("dynamic");
    DynamicFusionModel m(enc, fus, init);
    out.push_back({"cnn_dynamic_attention", gradcheck_model(m, x, labels, Mode::Train)});
  }
  for (BaselineVariant v : {BaselineVariant::LstmConcat, BaselineVariant::BiLstmStaticAttention,
                            BaselineVariant::LstmTensorFusion}) {
    BaselineConfig bc;
    bc.variant = v;
    bc.hidden = 2;
    bc.head_hidden = {4};
    RngStream init = mg.derive(baseline_variant_name(v));
    BaselineModel m(bc, init);
    out.push_back({std::string(baseline_variant_name(v)), gradcheck_model(m, x, labels, Mode::Train)});
  }
  return out;
}

CohortConfig small_cohort_config(std::size_t participants, std::size_t frames, std::uint64_t seed) {
  CohortConfig c;
  c.n_participants = participants;
  c.frames = frames;
  c.seed = seed;
  return c;
}

}  // namespace mmfuse::testing
