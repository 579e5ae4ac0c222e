#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/explain/export.hpp"
#include "mmfuse/explain/reduce.hpp"
#include "mmfuse/models/fusion.hpp"
#include "mmfuse/numerics/ops.hpp"
#include "support.hpp"

using namespace mmfuse;
using testing::random_tensor;

namespace {

SessionInputs random_session(std::size_t T, RngStream& rng) {
  return {random_tensor({T, kAudioFeatures}, rng), random_tensor({T, kVideoFeatures}, rng),
          random_tensor({T, kTextFeatures}, rng)};
}

// f(x) = sum_m sum_{t,d} w_m[t, d] * x_m[t, d]
LogitFn linear_logit(const SessionInputs& w) {
  return [w](Tape& tape, const ModelInputs& in) {
    Var total;
    for (std::size_t m = 0; m < 3; ++m) {
      const Tensor& x = tape.value(in[m]);
      const std::size_t B = x.dim(0), n = x.dim(1) * x.dim(2);
      Var s = ops::linear(tape, ops::reshape(tape, in[m], {B, n}), tape.constant(w[m].reshaped({1, n})), Var{});
      s = ops::reshape(tape, s, {B});
      total = total.valid() ? ops::add(tape, total, s) : s;
    }
    return total;
  };
}

AttributionResult with_values(const std::vector<double>& audio_first_row, std::size_t frames = 1) {
  AttributionResult r;
  r.values = {Tensor({frames, kAudioFeatures}), Tensor({frames, kVideoFeatures}), Tensor({frames, kTextFeatures})};
  for (std::size_t i = 0; i < audio_first_row.size(); ++i) r.values[0][i] = audio_first_row[i];
  return r;
}

}  // namespace

TEST_SUITE("explain") {
  TEST_CASE("integrated gradients is exact for a linear logit at any step count") {
    RngStream rng(1);
    const SessionInputs w = random_session(4, rng), x = random_session(4, rng);
    const SessionInputs zero{Tensor({4, kAudioFeatures}), Tensor({4, kVideoFeatures}), Tensor({4, kTextFeatures})};
    for (std::size_t steps : {1, 7, 64}) {
      const AttributionResult r = integrated_gradients(linear_logit(w), x, zero, {steps, 5});
      for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t i = 0; i < x[m].size(); ++i) CHECK(std::abs(r.values[m][i] - w[m][i] * x[m][i]) < 1e-10);
      }
      CHECK(std::abs(r.residuals[0]) < 1e-10);
    }
  }

  TEST_CASE("zero path gives zero attribution") {
    RngStream rng(2);
    EncoderConfig enc;
    enc.layers = {{4, 3, 2}};
    DynamicFusionModel m(enc, FusionConfig{}, rng);
    const SessionInputs x = random_session(12, rng);
    const AttributionResult r = integrated_gradients(model_logit(m), x, x, {16, 8});
    for (const Tensor& v : r.values) {
      for (double a : v.values()) CHECK(a == 0.0);
    }
    CHECK(r.output - r.baseline_output == 0.0);
    const std::vector<SessionInputs> pool{x};
    const AttributionResult g = gradient_explainer(model_logit(m), x, pool, 1, RngStream(1), {16, 8});
    for (const Tensor& v : g.values) {
      for (double a : v.values()) CHECK(a == 0.0);
    }
  }

  TEST_CASE("completeness on the fusion model agrees with a fine-grid oracle") {
    RngStream rng(3);
    EncoderConfig enc;
    enc.layers = {{4, 3, 2}, {4, 3, 1}};
    enc.head_hidden = {4};
    FusionConfig fus;
    fus.ff_dim = 8;
    DynamicFusionModel m(enc, fus, rng);
    const SessionInputs x = random_session(20, rng), b = random_session(20, rng);
    const AttributionResult coarse = integrated_gradients(model_logit(m), x, b, {256, 64});
    const AttributionResult fine = integrated_gradients(model_logit(m), x, b, {4096, 256});
    const double delta = coarse.output - coarse.baseline_output;
    CHECK(std::abs(coarse.total() - delta) <= 1e-3 * std::abs(delta) + 1e-6);
    CHECK(std::abs(fine.total() - delta) <= 1e-3 * std::abs(delta) + 1e-6);
    CHECK(std::abs(coarse.total() - fine.total()) <= 1e-3 * std::abs(delta) + 1e-6);
  }

  TEST_CASE("gradient explainer") {
    RngStream rng(4);
    const SessionInputs w = random_session(3, rng), x = random_session(3, rng);
    std::vector<SessionInputs> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(random_session(3, rng));
    SUBCASE("linear logit matches the closed form against the pool mean") {
      const AttributionResult r = gradient_explainer(linear_logit(w), x, pool, 5, RngStream(2), {8, 4});
      for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t i = 0; i < x[m].size(); ++i) {
          double mean = 0;
          for (const auto& p : pool) mean += p[m][i] / 5;
          CHECK(std::abs(r.values[m][i] - w[m][i] * (x[m][i] - mean)) < 1e-10);
        }
      }
      CHECK(r.residuals.size() == 5);
    }
    SUBCASE("a single baseline reduces to integrated gradients") {
      RngStream pick(6);
      const std::size_t chosen = sample_without_replacement(pool.size(), 1, pick)[0];
      EncoderConfig enc;
      enc.layers = {{4, 3, 1}};
      RngStream init(3);
      DynamicFusionModel m(enc, FusionConfig{}, init);
      const AttributionResult g = gradient_explainer(model_logit(m), x, pool, 1, RngStream(6), {16, 8});
      const AttributionResult ig = integrated_gradients(model_logit(m), x, pool[chosen], {16, 8});
      for (std::size_t k = 0; k < 3; ++k) CHECK(g.values[k].values() == ig.values[k].values());
    }
    SUBCASE("invalid requests") {
      CHECK_THROWS_AS(gradient_explainer(linear_logit(w), x, pool, 6, RngStream(1)), ConfigError);
      CHECK_THROWS_AS(gradient_explainer(linear_logit(w), x, pool, 0, RngStream(1)), ConfigError);
      const SessionInputs other = random_session(4, rng);
      CHECK_THROWS_AS(integrated_gradients(linear_logit(w), x, other), DimensionError);
    }
  }

  TEST_CASE("sampling without replacement") {
    RngStream rng(5);
    const auto s = sample_without_replacement(20, 20, rng);
    std::vector<std::size_t> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 20; ++i) CHECK(sorted[i] == i);
  }

  TEST_CASE("global importance") {
    const std::vector<AttributionResult> one{with_values({-2, 1, 0})};
    const GlobalImportance g = global_importance(one);
    CHECK(g.scores[0] == 2.0);
    CHECK(g.scores[1] == 1.0);
    CHECK(g.scores[2] == 0.0);
    CHECK(g.ranking[0] == 0);
    CHECK(g.ranking[1] == 1);
    CHECK(g.ranking[2] == 2);
    CHECK(g.ranking.size() == 197);

    const GlobalImportance z = global_importance(std::vector<AttributionResult>{with_values({})});
    for (std::size_t i = 0; i < 197; ++i) CHECK(z.ranking[i] == i);

    // Two sessions, two frames: mean |a| over 4 values per feature.
    AttributionResult a = with_values({1, -3}, 2), b = with_values({-1, 0}, 2);
    a.values[0].at(1, 0) = 2;
    b.values[0].at(1, 1) = -5;
    a.values[2].at(0, 51) = 0.5;
    const GlobalImportance h = global_importance(std::vector<AttributionResult>{a, b});
    CHECK(h.scores[0] == doctest::Approx((1 + 2 + 1 + 0) / 4.0));
    CHECK(h.scores[1] == doctest::Approx((3 + 0 + 0 + 5) / 4.0));
    CHECK(h.scores[196] == doctest::Approx(0.5 / 4.0));
    CHECK(h.ranking[0] == 1);
    CHECK(h.ranking[1] == 0);
    CHECK(h.ranking[2] == 196);
    CHECK_THROWS_AS(global_importance(std::vector<AttributionResult>{}), ContractError);
  }

  TEST_CASE("top-k counts and selections") {
    CHECK(top_k_count(100) == 197);
    CHECK(top_k_count(5) == 10);
    CHECK(top_k_count(50) == 99);
    CHECK(top_k_count(10) == 20);
    CHECK(top_k_count(25) == 50);
    CHECK_THROWS_AS(top_k_count(0), ConfigError);
    CHECK_THROWS_AS(top_k_count(100.5), ConfigError);
    std::vector<double> scores(197);
    for (std::size_t i = 0; i < 197; ++i) scores[i] = static_cast<double>(i);
    const FeatureSelection s = select_top_features(rank_scores(scores), 5);
    REQUIRE(s.features.size() == 10);
    CHECK(s.features[0] == 196);
    std::size_t kept = 0;
    for (const auto& k : s.keep) kept += static_cast<std::size_t>(std::count(k.begin(), k.end(), 1));
    CHECK(kept == 10);
    CHECK(std::count(s.keep[2].begin(), s.keep[2].end(), 1) == 10);
  }

  TEST_CASE("time series partitions the total attribution") {
    RngStream rng(7);
    AttributionResult r;
    r.values = {random_tensor({9, kAudioFeatures}, rng), random_tensor({9, kVideoFeatures}, rng),
                random_tensor({9, kTextFeatures}, rng)};
    double sum = 0;
    for (std::size_t g = 0; g < 197; ++g) {
      const auto series = attribution_timeseries(r, g);
      REQUIRE(series.size() == 9);
      CHECK(series[3].frame == 3);
      CHECK(series[3].seconds == doctest::Approx(0.3));
      for (const auto& p : series) sum += p.value;
    }
    CHECK(std::abs(sum - r.total()) < 1e-10);
    CHECK_THROWS_AS(attribution_timeseries(r, 197), DimensionError);
  }

  TEST_CASE("csv exports") {
    RngStream rng(8);
    std::vector<double> scores(197);
    for (double& s : scores) s = rng.uniform();
    const GlobalImportance g = rank_scores(scores);
    const std::string csv = importance_csv(g);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 198);
    const GlobalImportance back = parse_importance_csv(csv);
    CHECK(back.ranking == g.ranking);
    CHECK(back.scores == g.scores);
    CHECK_THROWS_AS(parse_importance_csv("a,b\n"), IoError);

    AttributionResult r;
    r.values = {random_tensor({6, kAudioFeatures}, rng), random_tensor({6, kVideoFeatures}, rng),
                random_tensor({6, kTextFeatures}, rng)};
    const std::string ts = timeseries_csv("P00001-s1", 130, attribution_timeseries(r, 130));
    CHECK(std::count(ts.begin(), ts.end(), '\n') == 7);
    CHECK(ts.rfind("session_id,modality,feature_name,frame,timestamp_s,shap_value\n", 0) == 0);

    std::vector<ReducedRow> rows;
    for (double p : kDefaultReducePercents) rows.push_back({p, top_k_count(p), 0.5, {}});
    const std::string red = reduced_csv(rows);
    CHECK(std::count(red.begin(), red.end(), '\n') == 7);

    const std::vector<std::string> ids{"a-s1"};
    const std::vector<AttributionResult> one{r};
    const std::string all = attributions_csv(ids, one);
    CHECK(static_cast<std::size_t>(std::count(all.begin(), all.end(), '\n')) == 1 + 6 * 197);
  }

  TEST_CASE("explain_sessions is independent of the job count") {
    CohortConfig c = testing::small_cohort_config(12, 30, 3);
    const auto cohort = generate_cohort(c);
    EncoderConfig enc;
    enc.layers = {{4, 3, 2}};
    RngStream init(2);
    DynamicFusionModel m(enc, FusionConfig{}, init);
    std::vector<std::size_t> targets{0, 1, 2}, pool{3, 4, 5, 6, 7};
    ExplainOptions o;
    o.ig = {8, 8};
    o.n_baselines = 3;
    o.seed = 5;
    const auto a = explain_sessions(m, cohort, targets, pool, std::nullopt, o);
    o.jobs = 3;
    const auto b = explain_sessions(m, cohort, targets, pool, std::nullopt, o);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(a[i].values[k].values() == b[i].values[k].values());
    }
  }

  TEST_CASE("reduced-feature rows: full percentage reproduces the full experiment") {
    CohortConfig c = testing::small_cohort_config(30, 30, 4);
    const auto cohort = generate_cohort(c);
    ExperimentSpec spec;
    spec.pipeline.architecture = Architecture::LstmConcat;
    spec.pipeline.hyper.baseline.hidden = 2;
    spec.pipeline.train.epochs = 2;
    spec.pipeline.unimodal = false;
    spec.search_mode = SearchMode::Off;
    spec.repeats = 2;
    std::vector<double> scores(197, 0.0);
    for (std::size_t i = 0; i < 197; ++i) scores[i] = static_cast<double>(197 - i);
    const std::vector<double> pcts{5, 100};
    const auto rows = reduced_feature_experiment(cohort, spec, rank_scores(scores), pcts);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n_features == 10);
    CHECK(rows[1].n_features == 197);
    const ExperimentResult full = evaluate_repeated(cohort, spec);
    CHECK(rows[1].median_test_f1 == full.median_test_f1);
  }
}
