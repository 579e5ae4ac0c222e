#include "mmfuse/training/pipeline.hpp"

#include <cstring>
#include <numeric>

#include "mmfuse/error.hpp"
#include "mmfuse/models/baselines.hpp"
#include "mmfuse/models/encoder.hpp"
#include "mmfuse/models/fusion.hpp"

namespace mmfuse {

namespace {

TrainConfig derived_train_config(const TrainConfig& base, const HyperParams& hyper, const RngStream& rng) {
  TrainConfig c = base;
  c.adam.lr = hyper.adam.lr;
  c.adam.weight_decay = hyper.adam.weight_decay;
  c.seed = rng.seed();
  return c;
}

}  // namespace

OwnedExamples embed_examples(const std::array<Model*, 3>& unimodal, const ExampleSet& set, std::size_t batch_size) {
  OwnedExamples out;
  out.tensors.resize(set.size());
  RngStream unused(0);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    rows.resize(std::min(batch_size, set.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    auto batch = stack_batch(set, rows);
    for (Modality m : kModalities) {
      auto* enc = dynamic_cast<UnimodalModel*>(unimodal[index_of(m)]);
      if (!enc) throw ContractError("embed_examples needs unimodal encoder models");
      Tape tape;
      const Var e = enc->embed(tape, tape.constant(std::move(batch[index_of(m)])), Mode::Eval, unused,
                               ParamBinding::Constant);
      const Tensor& ev = tape.value(e);
      const std::size_t te = ev.dim(1), dm = ev.dim(2);
      for (std::size_t b = 0; b < rows.size(); ++b) {
        Tensor t({te, dm});
        std::memcpy(t.ptr(), ev.ptr() + b * te * dm, te * dm * sizeof(double));
        out.tensors[rows[b]][index_of(m)] = std::move(t);
      }
    }
  }
  return out;
}

RepeatOutcome run_pipeline(const std::vector<SessionRecord>& cohort, const PipelineSpec& spec,
                           const HyperParams& hyper, std::size_t repeat, std::uint64_t seed, TrainedPipeline* keep) {
  const RngStream root(seed);
  Split split = split_cohort(cohort, spec.ratios, spec.level, root);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw TrainingError("split left an empty partition");
  }
  ExampleSet train = make_examples(cohort, split.train, spec.scale);
  ExampleSet val = make_examples(cohort, split.val, spec.scale);
  ExampleSet test = make_examples(cohort, split.test, spec.scale);
  std::optional<FeatureMask> mask;
  if (spec.keep) {
    FeatureMask fm;
    fm.keep = *spec.keep;
    fm.fill = feature_means(cohort, split.train);
    for (Modality m : kModalities) {
      if (fm.keep[index_of(m)].size() != feature_dim(m)) throw DimensionError("feature mask width mismatch");
    }
    mask = fm;
    train.mask = val.mask = test.mask = mask;
  }

  RepeatOutcome out;
  out.repeat = repeat;
  out.seed = seed;
  out.n_train = train.size();
  out.n_val = val.size();
  out.n_test = test.size();
  out.config = to_json(hyper);

  std::unique_ptr<Model> model;
  std::array<std::unique_ptr<Model>, 3> unimodal;

  if (spec.architecture == Architecture::DynamicFusion) {
    for (Modality m : kModalities) {
      const RngStream mrng = root.derive("unimodal").derive(modality_name(m));
      RngStream init = mrng.derive("init");
      auto u = std::make_unique<UnimodalModel>(m, hyper.encoder, init);
      fit(*u, train, val, derived_train_config(spec.train, hyper, mrng.derive("fit")));
      if (spec.unimodal) out.unimodal_test_f1[index_of(m)] = evaluate_f1(*u, test);
      unimodal[index_of(m)] = std::move(u);
    }
    std::array<const UnimodalModel*, 3> encoders;
    std::array<Model*, 3> encoder_models;
    for (std::size_t m = 0; m < 3; ++m) {
      encoders[m] = static_cast<const UnimodalModel*>(unimodal[m].get());
      encoder_models[m] = unimodal[m].get();
    }
    const RngStream frng = root.derive("fusion");
    RngStream init = frng.derive("init");
    FusionHeadModel head(hyper.fusion, hyper.encoder.embedding_dim(), init);
    const TrainConfig fcfg = derived_train_config(spec.train, hyper, frng.derive("fit"));
    if (spec.train.encoder_freeze == EncoderFreeze::Frozen) {
      const OwnedExamples etrain = embed_examples(encoder_models, train);
      const OwnedExamples eval = embed_examples(encoder_models, val);
      const OwnedExamples etest = embed_examples(encoder_models, test);
      const ExampleSet vtrain = etrain.view(train.labels);
      const ExampleSet vval = eval.view(val.labels);
      const ExampleSet vtest = etest.view(test.labels);
      fit(head, vtrain, vval, fcfg);
      out.train_f1 = evaluate_f1(head, vtrain);
      out.val_f1 = evaluate_f1(head, vval);
      out.test_f1 = evaluate_f1(head, vtest);
      model = std::make_unique<DynamicFusionModel>(encoders, head);
    } else {
      auto full = std::make_unique<DynamicFusionModel>(encoders, head);
      fit(*full, train, val, fcfg);
      out.train_f1 = evaluate_f1(*full, train);
      out.val_f1 = evaluate_f1(*full, val);
      out.test_f1 = evaluate_f1(*full, test);
      model = std::move(full);
    }
  } else {
    BaselineConfig bc = hyper.baseline;
    bc.variant = baseline_variant(spec.architecture);
    bc.modalities = {true, true, true};
    const RngStream brng = root.derive("baseline");
    RngStream init = brng.derive("init");
    auto b = std::make_unique<BaselineModel>(bc, init);
    fit(*b, train, val, derived_train_config(spec.train, hyper, brng.derive("fit")));
    out.train_f1 = evaluate_f1(*b, train);
    out.val_f1 = evaluate_f1(*b, val);
    out.test_f1 = evaluate_f1(*b, test);
    model = std::move(b);
    if (spec.unimodal) {
      for (Modality m : kModalities) {
        BaselineConfig uc = bc;
        uc.modalities = {false, false, false};
        uc.modalities[index_of(m)] = true;
        const RngStream urng = root.derive("baseline_unimodal").derive(modality_name(m));
        RngStream uinit = urng.derive("init");
        auto u = std::make_unique<BaselineModel>(uc, uinit);
        fit(*u, train, val, derived_train_config(spec.train, hyper, urng.derive("fit")));
        out.unimodal_test_f1[index_of(m)] = evaluate_f1(*u, test);
        unimodal[index_of(m)] = std::move(u);
      }
    }
  }

  if (keep) {
    keep->split = std::move(split);
    keep->model = std::move(model);
    keep->unimodal = std::move(unimodal);
    keep->mask = mask;
  }
  return out;
}

}  // namespace mmfuse
