#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmfuse/error.hpp"
#include "mmfuse/models/encoder.hpp"
#include "mmfuse/models/fusion.hpp"
#include "mmfuse/training/experiment.hpp"
#include "mmfuse/training/metrics.hpp"
#include "mmfuse/training/results_io.hpp"
#include "support.hpp"

using namespace mmfuse;
using testing::random_tensor;

namespace {

double sort_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

// Planted cohort with balanced labels on the planted scale.
std::vector<SessionRecord> planted_cohort(std::size_t participants, std::uint64_t seed, std::size_t frames = 40) {
  CohortConfig c = testing::small_cohort_config(participants, frames, seed);
  c.prevalence[0] = 0.5;
  c.qc_violation_rates = {0, 0, 0, 0};
  return generate_cohort(c);
}

HyperParams small_hyper() {
  HyperParams h;
  h.encoder.layers = {{8, 5, 2}, {8, 3, 2}};
  h.encoder.head_hidden = {8};
  h.fusion.ff_dim = 16;
  h.fusion.head_hidden = {8};
  h.baseline.hidden = 4;
  h.baseline.head_hidden = {8};
  h.adam.lr = 3e-3;
  return h;
}

ExperimentSpec small_spec(Architecture arch, std::size_t repeats) {
  ExperimentSpec s;
  s.pipeline.architecture = arch;
  s.pipeline.hyper = small_hyper();
  s.pipeline.train.epochs = 3;
  s.pipeline.train.adam = s.pipeline.hyper.adam;
  s.search_mode = SearchMode::Off;
  s.repeats = repeats;
  s.base_seed = 21;
  return s;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("f1 special cases") {
    const std::vector<int> y{1, 0, 1, 1, 0};
    CHECK(f1_score(std::vector<double>{1, 0, 1, 1, 0}, y) == 1.0);
    const Confusion c{.tp = 2, .fp = 1, .fn = 1};
    CHECK(std::abs(f1_from_confusion(c) - 2.0 / 3.0) < 1e-15);
    CHECK(f1_score(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.1}, y) == 0.0);
    // threshold is inclusive
    CHECK(confusion(std::vector<double>{0.5}, std::vector<int>{1}).tp == 1);
    CHECK_THROWS_AS(f1_score(std::vector<double>{}, std::vector<int>{}), MetricError);
    CHECK_THROWS_AS(f1_score(std::vector<double>{0.2}, std::vector<int>{2}), MetricError);
    CHECK_THROWS_AS(f1_score(std::vector<double>{0.2, 0.3}, std::vector<int>{1}), MetricError);
  }

  TEST_CASE("f1 agrees with a precision-recall oracle on random instances") {
    RngStream rng(1);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng.uniform_index(12);
      std::vector<double> p(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = rng.uniform();
        y[i] = rng.bernoulli(0.5);
      }
      double tp = 0, pp = 0, ap = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool pred = p[i] >= 0.5;
        tp += pred && y[i];
        pp += pred;
        ap += y[i];
      }
      const double prec = pp > 0 ? tp / pp : 0, rec = ap > 0 ? tp / ap : 0;
      const double expect = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0;
      CHECK(std::abs(f1_score(p, y) - expect) < 1e-12);
    }
  }

  TEST_CASE("median") {
    CHECK(median({0.6, 0.8, 0.7}) == 0.7);
    CHECK(median({0.4, 0.4, 0.4, 0.4}) == 0.4);
    RngStream rng(2);
    std::vector<double> v(100);
    for (double& x : v) x = rng.uniform();
    CHECK(median(v) == sort_median(v));
    CHECK_THROWS_AS(median({}), MetricError);
  }

  TEST_CASE("percentage difference examples") {
    CHECK(round_to(percentage_difference(0.633, 0.632), 2) == 0.16);
    CHECK(percentage_difference(0.629, 0.629) == 0.0);
    CHECK(std::abs(percentage_difference(0.664, 0.644) - 3.05) <= 0.06);
    for (double v : {0.1, 0.5, 0.93}) CHECK(percentage_difference(v, v) == 0.0);
    CHECK_THROWS_AS(percentage_difference(0.5, 0.0), MetricError);
  }

  TEST_CASE("training loss descends on a convex toy head") {
    RngStream rng(3);
    FusionConfig f;
    f.layers = 0;
    f.head_hidden = {};
    f.heads = 1;
    FusionHeadModel m(f, 3, rng);
    OwnedExamples data;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
      const int y = i % 2;
      std::array<Tensor, 3> t;
      for (auto& e : t) {
        e = random_tensor({4, 3}, rng);
        for (double& v : e.data()) v += y ? 0.5 : -0.5;
      }
      data.tensors.push_back(std::move(t));
      labels.push_back(y);
    }
    const ExampleSet set = data.view(labels);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 40;
    tc.adam.lr = 1e-3;
    const FitResult r = fit(m, set, set, tc);
    REQUIRE(r.history.size() == 5);
    for (std::size_t e = 1; e < 5; ++e) CHECK(r.history[e].val_loss <= r.history[e - 1].val_loss);
  }

  TEST_CASE("fit is reproducible, honours zero epochs and rejects empty splits") {
    const auto cohort = planted_cohort(30, 4);
    std::vector<std::size_t> idx(cohort.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const ExampleSet set = make_examples(cohort, idx, Scale::PHQ9);
    EncoderConfig enc;
    enc.layers = {{4, 5, 2}};
    TrainConfig tc;
    tc.epochs = 2;
    tc.seed = 9;
    auto trained = [&] {
      RngStream init(5);
      UnimodalModel m(Modality::Audio, enc, init);
      fit(m, set, set, tc);
      return m.params().checksum();
    };
    CHECK(trained() == trained());
    RngStream init(5);
    UnimodalModel m(Modality::Audio, enc, init);
    const auto before = m.params().checksum();
    tc.epochs = 0;
    const FitResult r = fit(m, set, set, tc);
    CHECK(r.best_epoch == 0);
    CHECK(m.params().checksum() == before);
    const ExampleSet empty = make_examples(cohort, {}, Scale::PHQ9);
    tc.epochs = 1;
    CHECK_THROWS_AS(fit(m, empty, set, tc), TrainingError);
  }

  TEST_CASE("pretraining beats an untrained encoder on planted data") {
    const auto cohort = planted_cohort(120, 5);
    const Split s = split_cohort(cohort, {}, SplitLevel::Participant, RngStream(1));
    const ExampleSet train = make_examples(cohort, s.train, Scale::PHQ9);
    const ExampleSet val = make_examples(cohort, s.val, Scale::PHQ9);
    const HyperParams h = small_hyper();
    RngStream init(6);
    UnimodalModel untrained(Modality::Video, h.encoder, init);
    UnimodalModel trained = untrained;
    TrainConfig tc;
    tc.epochs = 15;
    tc.adam.lr = 3e-3;
    fit(trained, train, val, tc);
    CHECK(evaluate_f1(trained, val) > evaluate_f1(untrained, val));
  }

  TEST_CASE("trained fusion beats the majority-class predictor on planted data") {
    // The co-occurrence signal needs a few hundred sessions and the default model size.
    const auto cohort = planted_cohort(250, 6, 100);
    PipelineSpec spec;
    spec.train.epochs = 15;
    const RepeatOutcome r = run_pipeline(cohort, spec, spec.hyper, 0, 3);
    const Split s = split_cohort(cohort, spec.ratios, spec.level, RngStream(3));
    double pos = 0;
    for (std::size_t i : s.test) pos += derive_labels(cohort[i].scales)[0];
    const double p = pos / static_cast<double>(s.test.size());
    const double majority = 2 * p / (1 + p);
    CHECK(r.test_f1 > majority);
    CHECK(r.n_test == s.test.size());
  }

  TEST_CASE("random search") {
    SearchSpace space;
    space.budget = 1;
    const HyperParams base = small_hyper();
    const SearchResult one = random_search(space, base, [](const HyperParams& h) { return h.adam.lr; }, RngStream(3));
    REQUIRE(one.trace.size() == 1);
    CHECK(one.best_score == *one.trace[0].score);
    CHECK(to_json(one.best) == to_json(one.trace[0].params));

    space.budget = 12;
    const SearchResult many = random_search(space, base, [](const HyperParams& h) { return h.adam.lr; }, RngStream(4));
    double best = -1;
    for (const auto& t : many.trace) best = std::max(best, *t.score);
    CHECK(many.best_score == best);
    for (const auto& t : many.trace) {
      CHECK(t.params.adam.lr >= space.lr_min);
      CHECK(t.params.adam.lr <= space.lr_max);
    }

    int calls = 0;
    CHECK_THROWS_AS(random_search(space, base,
                                  [&](const HyperParams&) -> double {
                                    ++calls;
                                    throw TrainingError("boom");
                                  },
                                  RngStream(5)),
                    TrainingError);
    CHECK(calls == 12);
  }

  TEST_CASE("random search lands in the top decile of an enumerated objective") {
    SearchSpace space;
    space.lr_min = space.lr_max = 1e-3;
    space.budget = 50;
    auto objective = [](const HyperParams& h) {
      const double L = static_cast<double>(h.encoder.layers.size()), C = static_cast<double>(h.encoder.layers[0].channels),
                   K = static_cast<double>(h.encoder.layers[0].kernel), F = static_cast<double>(h.fusion.layers),
                   ff = static_cast<double>(h.fusion.ff_dim), H = static_cast<double>(h.fusion.heads),
                   Hl = static_cast<double>(h.baseline.hidden);
      return -(L - 2) * (L - 2) - (C - 16) * (C - 16) / 64 - (K - 5) * (K - 5) / 4 - (F - 1) * (F - 1) -
             (ff - 32) * (ff - 32) / 256 - (H - 2) * (H - 2) - (Hl - 8) * (Hl - 8) / 16 -
             (h.encoder.head_hidden.empty() ? 0.5 : 0.0) - h.adam.weight_decay * 1000;
    };
    std::vector<double> grid;
    HyperParams h = small_hyper();
    for (auto L : space.cnn_layers)
      for (auto C : space.cnn_channels)
        for (auto K : space.kernel_sizes)
          for (auto fc : space.fc_layers)
            for (auto F : space.transformer_layers)
              for (auto ff : space.transformer_ff)
                for (auto H : space.attention_heads)
                  for (auto Hl : space.lstm_hidden)
                    for (auto wd : space.weight_decay) {
                      h.encoder.layers.assign(L, {C, K, 2});
                      h.encoder.head_hidden.assign(fc, 8);
                      h.fusion.layers = F;
                      h.fusion.ff_dim = ff;
                      h.fusion.heads = H;
                      h.baseline.hidden = Hl;
                      h.adam.weight_decay = wd;
                      grid.push_back(objective(h));
                    }
    std::sort(grid.begin(), grid.end());
    const double decile = grid[static_cast<std::size_t>(0.9 * static_cast<double>(grid.size()))];
    const SearchResult r = random_search(space, small_hyper(), objective, RngStream(8));
    CHECK(r.best_score >= decile);
    CHECK(r.best_score <= grid.back());
  }

  TEST_CASE("repeat runner orders outcomes, aggregates medians and reports failures") {
    auto fn = [](std::size_t i, std::uint64_t seed) {
      RepeatOutcome o;
      o.repeat = i;
      o.seed = seed;
      o.test_f1 = RngStream(seed).uniform();
      o.unimodal_test_f1 = {0.5, 0.25, std::nullopt};
      return o;
    };
    const auto serial = run_repeats(100, 7, 1, fn);
    const auto parallel = run_repeats(100, 7, 4, fn);
    REQUIRE(serial.size() == 100);
    std::vector<double> f1;
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(serial[i].repeat == i);
      CHECK(serial[i].seed == 7 + i);
      CHECK(parallel[i].test_f1 == serial[i].test_f1);
      f1.push_back(serial[i].test_f1);
    }
    const ExperimentResult agg = aggregate(Scale::PHQ9, Architecture::DynamicFusion, serial);
    CHECK(agg.median_test_f1 == sort_median(f1));
    CHECK(agg.best_unimodal_median == 0.5);
    CHECK(*agg.percentage_difference == percentage_difference(agg.median_test_f1, 0.5));
    CHECK_FALSE(agg.median_unimodal_test_f1[2].has_value());

    auto constant = [](std::size_t i, std::uint64_t) {
      RepeatOutcome o;
      o.repeat = i;
      o.test_f1 = 0.625;
      return o;
    };
    CHECK(aggregate(Scale::GAD7, Architecture::LstmConcat, run_repeats(6, 0, 2, constant)).median_test_f1 == 0.625);
    const auto three = aggregate(Scale::GAD7, Architecture::LstmConcat,
                                 run_repeats(3, 0, 1, [](std::size_t i, std::uint64_t) {
                                   RepeatOutcome o;
                                   o.repeat = i;
                                   o.test_f1 = 0.6 + 0.1 * static_cast<double>(2 - i);
                                   return o;
                                 }));
    CHECK(std::abs(three.median_test_f1 - 0.7) < 1e-15);

    try {
      run_repeats(5, 0, 2, [](std::size_t i, std::uint64_t) -> RepeatOutcome {
        if (i == 3 || i == 1) throw TrainingError("diverged");
        return {};
      });
      FAIL("expected RepeatFailure");
    } catch (const RepeatFailure& e) {
      CHECK(e.repeat() == 1);
    }
  }

  TEST_CASE("repeated evaluation smoke run and output tables") {
    const auto cohort = planted_cohort(40, 7);
    ExperimentSpec spec = small_spec(Architecture::DynamicFusion, 3);
    ExperimentResult dyn = evaluate_repeated(cohort, spec);
    REQUIRE(dyn.repeats.size() == 3);
    std::vector<double> f1;
    for (const auto& r : dyn.repeats) f1.push_back(r.test_f1);
    CHECK(dyn.median_test_f1 == sort_median(f1));
    REQUIRE(dyn.best_unimodal_median.has_value());
    spec.jobs = 2;
    const ExperimentResult again = evaluate_repeated(cohort, spec);
    CHECK(repeats_csv(again) == repeats_csv(dyn));

    ExperimentSpec base = small_spec(Architecture::LstmConcat, 3);
    base.pipeline.unimodal = false;
    const ExperimentResult lstm = evaluate_repeated(cohort, base);
    CHECK_FALSE(lstm.percentage_difference.has_value());

    const std::vector<ExperimentResult> all{dyn, lstm};
    const std::string csv = repeats_csv(dyn);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("repeat,seed,n_train,n_val,n_test,train_f1,val_f1,test_f1,", 0) == 0);
    const util::Json summary = summary_json(all);
    CHECK(summary.at("experiments").size() == 2);
    CHECK(table2_csv(all).find("percentage_difference") != std::string::npos);
    CHECK(table1_csv(all).find("cnn_dynamic_attention,PHQ9") != std::string::npos);
  }

  TEST_CASE("search once resolves the same hyperparameters for every repeat") {
    const auto cohort = planted_cohort(30, 8);
    ExperimentSpec spec = small_spec(Architecture::LstmConcat, 2);
    spec.search_mode = SearchMode::Once;
    spec.search.budget = 2;
    spec.search.lstm_hidden = {2, 3};
    spec.search.cnn_layers = {1};
    spec.pipeline.train.epochs = 1;
    std::optional<SearchResult> trace;
    const HyperParams h = resolve_hyperparams(cohort, spec, &trace);
    REQUIRE(trace.has_value());
    CHECK(trace->trace.size() == 2);
    const ExperimentResult r = evaluate_repeated(cohort, spec);
    for (const auto& rep : r.repeats) CHECK(rep.config.at("baseline").at("hidden") == h.baseline.hidden);
  }

  TEST_CASE("train config json is strict") {
    CHECK_THROWS_AS(train_config_from_json(util::Json{{"epoch", 3}}), ConfigError);
    TrainConfig t;
    t.epochs = 7;
    t.encoder_freeze = EncoderFreeze::Finetune;
    CHECK(to_json(train_config_from_json(to_json(t))) == to_json(t));
    CHECK_THROWS_AS(validate(TrainConfig{.batch_size = 0}), ConfigError);
  }
}
