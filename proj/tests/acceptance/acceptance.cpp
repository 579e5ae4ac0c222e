// Acceptance checks. `mmfuse_acceptance N` runs criterion N and prints one
// PASS/FAIL line; the exit status is 0 on PASS.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/dataset/cohort.hpp"
#include "mmfuse/dataset/cohort_io.hpp"
#include "mmfuse/dataset/features.hpp"
#include "mmfuse/dataset/qc.hpp"
#include "mmfuse/dataset/scales.hpp"
#include "mmfuse/explain/attribution.hpp"
#include "mmfuse/explain/importance.hpp"
#include "mmfuse/explain/reduce.hpp"
#include "mmfuse/numerics/ops.hpp"
#include "mmfuse/training/experiment.hpp"
#include "mmfuse/training/metrics.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace mmfuse;
using Json = nlohmann::json;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<SessionRecord> qc_passed(std::vector<SessionRecord> sessions) {
  const QcReport report = run_qc(sessions);
  std::vector<SessionRecord> kept;
  for (std::size_t i : report.passed) kept.push_back(std::move(sessions[i]));
  return kept;
}

// Interaction-planted cohort shared by criteria 5, 7 and 8.
CohortConfig planted_cohort(std::uint64_t seed) {
  CohortConfig c;
  c.n_participants = 500;
  c.frames = 100;
  c.seed = seed;
  return c;
}

ExperimentSpec protocol_spec(Architecture arch, std::size_t repeats) {
  ExperimentSpec s;
  s.pipeline.architecture = arch;
  s.pipeline.scale = Scale::PHQ9;
  s.search_mode = SearchMode::Off;
  s.repeats = repeats;
  s.base_seed = 0;
  return s;
}

std::vector<std::size_t> planted_global_features() {
  std::vector<std::size_t> g;
  for (const PlantedFeature& f : default_planted_features()) g.push_back(global_feature_index(f.modality, f.index));
  return g;
}

// Trains repeat 0 of the dynamic model and attributes its test sessions.
GlobalImportance trained_importance(const std::vector<SessionRecord>& cohort, std::size_t max_sessions) {
  const ExperimentSpec spec = protocol_spec(Architecture::DynamicFusion, 1);
  TrainedPipeline trained;
  PipelineSpec ps = spec.pipeline;
  ps.unimodal = false;
  run_pipeline(cohort, ps, ps.hyper, 0, spec.base_seed, &trained);
  std::vector<std::size_t> targets = trained.split.test;
  if (targets.size() > max_sessions) targets.resize(max_sessions);
  ExplainOptions eo;
  eo.ig = {64, 64};
  eo.n_baselines = 8;
  eo.seed = 1;
  const auto attr = explain_sessions(*trained.model, cohort, targets, trained.split.train, std::nullopt, eo);
  return global_importance(attr);
}

// 1. Gradient fidelity.
Verdict gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = testing::gradient_suite(2024);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  std::string where;
  for (const auto& c : cases) {
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      where = c.name + " " + c.result.worst;
    }
  }
  const bool pass = worst < 1e-4 && elapsed < 300.0 && !cases.empty();
  return {pass, std::to_string(cases.size()) + " cases, max relative error " + fmt(worst * 1e6, 3) + "e-6 at " +
                    where + ", " + fmt(elapsed, 1) + " s"};
}

// 2. Attribution axioms. Completeness is checked on a trained default-size
// fusion model, test sessions against training-session baselines.
Verdict attribution_axioms() {
  CohortConfig c = planted_cohort(3);
  c.n_participants = 200;
  const auto cohort = qc_passed(generate_cohort(c));
  PipelineSpec ps = protocol_spec(Architecture::DynamicFusion, 1).pipeline;
  ps.unimodal = false;
  TrainedPipeline trained;
  run_pipeline(cohort, ps, ps.hyper, 0, 0, &trained);
  const LogitFn f = model_logit(*trained.model);

  const std::size_t pairs = 20;
  std::size_t within = 0;
  std::vector<double> ratios;
  double oracle_worst = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const SessionInputs x = session_inputs(cohort[trained.split.test[k]]);
    const SessionInputs b = session_inputs(cohort[trained.split.train[k]]);
    const AttributionResult r = integrated_gradients(f, x, b, {256, 64});
    const double delta = r.output - r.baseline_output;
    const double bound = 1e-3 * std::abs(delta) + 1e-6;
    const double err = std::abs(r.total() - delta);
    ratios.push_back(err / bound);
    within += err <= bound ? 1 : 0;
    if (k < 3) {
      const AttributionResult fine = integrated_gradients(f, x, b, {4096, 64});
      oracle_worst = std::max(oracle_worst, std::abs(fine.total() - delta) / bound);
    }
  }
  const bool completeness = within == pairs;
  const double worst_completeness = *std::max_element(ratios.begin(), ratios.end());

  RngStream rng(11);
  SessionInputs w, x, zero;
  for (Modality m : kModalities) {
    const std::size_t k = index_of(m);
    w[k] = testing::random_tensor({10, feature_dim(m)}, rng);
    x[k] = testing::random_tensor({10, feature_dim(m)}, rng);
    zero[k] = Tensor({10, feature_dim(m)});
  }
  const LogitFn linear = [&w](Tape& tape, const ModelInputs& in) {
    Var total;
    for (std::size_t m = 0; m < 3; ++m) {
      const Tensor& v = tape.value(in[m]);
      const std::size_t B = v.dim(0), n = v.dim(1) * v.dim(2);
      Var s = ops::linear(tape, ops::reshape(tape, in[m], {B, n}), tape.constant(w[m].reshaped({1, n})), Var{});
      s = ops::reshape(tape, s, {B});
      total = total.valid() ? ops::add(tape, total, s) : s;
    }
    return total;
  };
  double linear_err = 0.0;
  for (std::size_t steps : {1, 16, 256}) {
    const AttributionResult r = integrated_gradients(linear, x, zero, {steps, 64});
    for (std::size_t m = 0; m < 3; ++m) {
      for (std::size_t i = 0; i < x[m].size(); ++i) {
        linear_err = std::max(linear_err, std::abs(r.values[m][i] - w[m][i] * x[m][i]));
      }
    }
  }

  bool zero_path = true;
  const SessionInputs same = session_inputs(cohort[trained.split.test[0]]);
  const AttributionResult z = integrated_gradients(f, same, same, {256, 64});
  for (const Tensor& v : z.values) {
    for (double a : v.values()) zero_path = zero_path && a == 0.0;
  }

  const bool pass = completeness && linear_err <= 1e-10 && zero_path;
  return {pass, "completeness within bound for " + std::to_string(within) + "/" + std::to_string(pairs) +
                    " pairs at m=256, error/bound median " + fmt(median(ratios), 2) + " max " +
                    fmt(worst_completeness, 2) + " (m=4096 max " + fmt(oracle_worst, 2) + "), linear exactness " +
                    fmt(linear_err * 1e12, 3) + "e-12, zero path " + (zero_path ? "exact" : "non-zero")};
}

// 3. Cohort calibration.
Verdict cohort_calibration() {
  CohortConfig c;
  c.n_participants = 2000;
  c.frames = 30;
  c.seed = 42;
  const auto a = generate_cohort(c);
  const auto b = generate_cohort(c);
  const auto p = realized_prevalence(a);
  const std::array<double, 3> target{0.714, 0.578, 0.673};
  bool within = true;
  std::string detail = "prevalences";
  for (std::size_t s = 0; s < 3; ++s) {
    within = within && std::abs(p[s] - target[s]) <= 0.02;
    detail += " " + fmt(p[s], 3);
  }
  const bool same = serialize_cohort(a) == serialize_cohort(b);
  return {within && same, detail + " over " + std::to_string(a.size()) + " sessions, deterministic " +
                              (same ? "yes" : "no")};
}

// 4. QC correctness.
Verdict qc_correctness() {
  const std::vector<std::array<double, 4>> rates{{0.05, 0.05, 0.05, 0.05}, {0.2, 0.0, 0.3, 0.1}, {0.5, 0.5, 0.5, 0.5}};
  std::size_t planted = 0, recalled = 0, clean = 0, false_flags = 0;
  bool totals = true;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    CohortConfig c;
    c.n_participants = 400;
    c.frames = 30;
    c.seed = 100 + k;
    c.qc_violation_rates = rates[k];
    auto sessions = generate_cohort(c);
    const QcReport report = run_qc(sessions);
    totals = totals && report.flag_counts == planted_violation_counts(sessions);
    for (const SessionRecord& s : sessions) {
      for (QcFlag f : kQcFlags) {
        const bool truth = s.planted.violations.count(f) > 0;
        const bool flagged = s.qc_flags.count(f) > 0;
        if (truth) {
          ++planted;
          recalled += flagged ? 1 : 0;
        } else {
          ++clean;
          false_flags += flagged ? 1 : 0;
        }
      }
    }
  }
  const double recall = planted ? static_cast<double>(recalled) / planted : 0.0;
  const double false_rate = static_cast<double>(false_flags) / clean;
  const bool pass = planted > 0 && recall == 1.0 && false_rate == 0.0 && totals;
  return {pass, "recall " + fmt(recall, 4) + " over " + std::to_string(planted) + " planted, false-flag rate " +
                    fmt(false_rate, 4) + ", totals " + (totals ? "match" : "differ")};
}

// 5. Dynamic-fusion advantage.
Verdict fusion_advantage() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cohort = qc_passed(generate_cohort(planted_cohort(7)));
  const std::size_t repeats = 20;
  const ExperimentResult dyn = evaluate_repeated(cohort, protocol_spec(Architecture::DynamicFusion, repeats));
  std::string detail = "dynamic " + fmt(dyn.median_test_f1) + ", best unimodal " +
                       fmt(dyn.best_unimodal_median.value_or(NAN));
  bool pass = dyn.repeats.size() == repeats && dyn.best_unimodal_median &&
              dyn.median_test_f1 >= *dyn.best_unimodal_median + 0.02;
  for (Architecture a : {Architecture::LstmConcat, Architecture::BiLstmStaticAttention, Architecture::LstmTensorFusion}) {
    ExperimentSpec spec = protocol_spec(a, repeats);
    spec.pipeline.unimodal = false;
    const ExperimentResult r = evaluate_repeated(cohort, spec);
    detail += ", " + std::string(architecture_name(a)) + " " + fmt(r.median_test_f1);
    pass = pass && dyn.median_test_f1 > r.median_test_f1;
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 7200.0;
  return {pass, detail + " (" + std::to_string(repeats) + " repeats, " + std::to_string(cohort.size()) +
                    " sessions, " + fmt(elapsed / 60.0, 1) + " min)"};
}

// 6. Percentage difference.
Verdict percentage_differences() {
  const double a = round_to(percentage_difference(0.633, 0.632), 2);
  const double b = percentage_difference(0.629, 0.629);
  const double c = percentage_difference(0.664, 0.644);
  const bool pass = a == 0.16 && b == 0.0 && std::abs(c - 3.05) <= 0.06;
  return {pass, "(0.633,0.632) -> " + fmt(a, 2) + ", (0.629,0.629) -> " + fmt(b, 2) + ", (0.664,0.644) -> " + fmt(c, 3)};
}

// 7. Planted-feature recovery. N = 1000: at N = 500 an occasional training
// run overfits one modality and its attributions say more about the
// overfit than about the planted features.
Verdict planted_recovery() {
  const auto planted = planted_global_features();
  const std::size_t k = top_k_count(10);
  std::string detail = "top-" + std::to_string(k) + " recall per seed:";
  double worst = 1.0, total = 0.0;
  for (std::uint64_t seed : {21, 22, 23, 24, 25}) {
    CohortConfig c = planted_cohort(seed);
    c.n_participants = 1000;
    const auto cohort = qc_passed(generate_cohort(c));
    const GlobalImportance gi = trained_importance(cohort, 60);
    const std::set<std::size_t> top(gi.ranking.begin(), gi.ranking.begin() + static_cast<long>(k));
    std::size_t hit = 0;
    for (std::size_t g : planted) hit += top.count(g);
    const double recall = static_cast<double>(hit) / planted.size();
    worst = std::min(worst, recall);
    total += recall;
    detail += " " + fmt(recall, 2);
  }
  return {worst >= 0.8, detail + ", min " + fmt(worst, 2) + ", mean " + fmt(total / 5, 2)};
}

// 8. Reduced-feature stability.
Verdict reduced_stability() {
  const auto cohort = qc_passed(generate_cohort(planted_cohort(8)));
  const GlobalImportance gi = trained_importance(cohort, 60);
  const std::vector<double> pcts{25, 100};
  const auto rows = reduced_feature_experiment(cohort, protocol_spec(Architecture::DynamicFusion, 20), gi, pcts);
  const double gap = std::abs(rows[0].median_test_f1 - rows[1].median_test_f1);
  return {gap <= 0.03, "pct 25 (" + std::to_string(rows[0].n_features) + " features) " + fmt(rows[0].median_test_f1) +
                           ", pct 100 " + fmt(rows[1].median_test_f1) + ", gap " + fmt(gap)};
}

// 9. End-to-end determinism of the CLI.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return files;
}

Verdict cli_determinism() {
  const char* bin = std::getenv("MMFUSE_BIN");
  if (!bin) return {false, "MMFUSE_BIN not set"};
  const fs::path root = fs::temp_directory_path() / "mmfuse_acceptance_9";
  fs::remove_all(root);
  fs::create_directories(root);
  auto write = [&](const std::string& name, const Json& j) {
    std::ofstream(root / name) << j.dump(2);
    return (root / name).string();
  };
  const std::string cohort = (root / "data" / "cohort.ndjson").string();
  const Json model = {{"scales", {"PHQ9"}},
                      {"repeats", 3},
                      {"search_mode", "once"},
                      {"search", {{"budget", 2}}},
                      {"train", {{"epochs", 3}}},
                      {"encoder", {{"layers", {{{"channels", 8}, {"kernel", 5}, {"stride", 2}}}}}},
                      {"baseline", {{"hidden", 4}}}};
  Json train = model;
  train["cohort"] = cohort;
  train["architectures"] = {"cnn_dynamic_attention", "lstm_tensor_fusion"};
  Json reduce = model;
  reduce["cohort"] = cohort;
  reduce["architectures"] = {"lstm_concat"};
  reduce["pcts"] = {25, 100};

  struct Step {
    std::string command, config;
  };
  auto steps_for = [&](const std::string& run) {
    const std::string out = (root / run).string();
    reduce["importance"] = out + "/explain/global_importance.csv";
    return std::vector<Step>{
        {"gen-data", write("gen.json", {{"n_participants", 60}, {"frames", 40}, {"seed", 9}})},
        {"qc", write("qc.json", {{"cohort", cohort}})},
        {"train", write("train.json", train)},
        {"eval", write(run + "_eval.json", {{"cohort", cohort},
                                            {"checkpoint", out + "/train/checkpoints/PHQ9_cnn_dynamic_attention.json"},
                                            {"partition", "all"}})},
        {"explain", write(run + "_explain.json",
                          {{"cohort", cohort},
                           {"checkpoint", out + "/train/checkpoints/PHQ9_cnn_dynamic_attention.json"},
                           {"steps", 16},
                           {"n_baselines", 4},
                           {"max_sessions", 6}})},
        {"reduce", write(run + "_reduce.json", reduce)},
        {"report", write(run + "_report.json", {{"summaries", {out + "/train/summary.json"}}})},
    };
  };
  auto run_all = [&](const std::string& run, std::size_t jobs) {
    fs::create_directories(root / "data");
    for (const Step& s : steps_for(run)) {
      const std::string out_dir = s.command == "gen-data" ? (root / "data").string() : (root / run / s.command).string();
      const std::string cmd = std::string("\"") + bin + "\" --config \"" + s.config + "\" --out \"" + out_dir +
                              "\" --jobs " + std::to_string(jobs) + " " + s.command + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) return s.command;
    }
    return std::string();
  };
  std::string detail;
  bool pass = true;
  for (auto [run, jobs] : std::vector<std::pair<std::string, std::size_t>>{{"a", 2}, {"b", 2}, {"c", 1}}) {
    const auto cohort_before = fs::exists(cohort) ? snapshot(root / "data") : std::map<std::string, std::string>{};
    const std::string failed = run_all(run, jobs);
    if (!failed.empty()) return {false, "command " + failed + " failed in run " + run};
    if (!cohort_before.empty() && snapshot(root / "data") != cohort_before) {
      pass = false;
      detail += " gen-data output changed;";
    }
  }
  const auto a = snapshot(root / "a"), b = snapshot(root / "b"), c = snapshot(root / "c");
  const bool ab = a == b;
  const bool ac = a == c;
  pass = pass && ab && ac && !a.empty();
  fs::remove_all(root);
  return {pass, std::to_string(a.size()) + " output files;" + detail + " jobs=2 reruns " +
                    (ab ? "identical" : "differ") + ", jobs=2 vs jobs=1 " + (ac ? "identical" : "differ")};
}

// 10. Protocol conformance.
Verdict protocol_conformance() {
  CohortConfig c = testing::small_cohort_config(60, 30, 5);
  const auto cohort = qc_passed(generate_cohort(c));
  ExperimentSpec spec = protocol_spec(Architecture::LstmConcat, 100);
  spec.pipeline.unimodal = false;
  spec.pipeline.hyper.baseline.hidden = 2;
  spec.pipeline.hyper.baseline.head_hidden = {4};
  spec.pipeline.train.epochs = 2;
  const ExperimentResult r = evaluate_repeated(cohort, spec);
  std::vector<double> f1;
  bool ordered = r.repeats.size() == 100;
  for (std::size_t i = 0; i < r.repeats.size(); ++i) {
    ordered = ordered && r.repeats[i].repeat == i;
    f1.push_back(r.repeats[i].test_f1);
  }
  std::sort(f1.begin(), f1.end());
  const double oracle_median = f1.size() == 100 ? (f1[49] + f1[50]) / 2 : NAN;
  const bool median_ok = r.median_test_f1 == oracle_median;

  RngStream rng(77);
  std::size_t f1_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 30);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform();
      y[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = p[i] >= 0.5;
      tp += pred && y[i] == 1;
      fp += pred && y[i] == 0;
      fn += !pred && y[i] == 1;
    }
    const double expect = 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    if (std::abs(f1_score(p, y) - expect) > 1e-15) ++f1_mismatch;
  }
  const bool pass = ordered && median_ok && f1_mismatch == 0;
  return {pass, std::to_string(r.repeats.size()) + " repeat rows, median " + fmt(r.median_test_f1) + " vs oracle " +
                    fmt(oracle_median) + ", F1 mismatches " + std::to_string(f1_mismatch) + "/1000"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"attribution axioms", attribution_axioms},
      {"cohort calibration", cohort_calibration},
      {"qc correctness", qc_correctness},
      {"dynamic-fusion advantage", fusion_advantage},
      {"percentage difference", percentage_differences},
      {"planted-feature recovery", planted_recovery},
      {"reduced-feature stability", reduced_stability},
      {"end-to-end determinism", cli_determinism},
      {"protocol conformance", protocol_conformance},
  };
  if (argc != 2) {
    std::cerr << "usage: mmfuse_acceptance <1-" << criteria.size() << ">\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  if (n < 1 || n > static_cast<int>(criteria.size())) {
    std::cerr << "unknown criterion " << argv[1] << "\n";
    return 2;
  }
  const auto& [name, fn] = criteria[static_cast<std::size_t>(n - 1)];
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  std::cout << "criterion " << n << " " << name << ": " << (v.pass ? "PASS" : "FAIL") << " (" << v.detail << ")"
            << std::endl;
  return v.pass ? 0 : 1;
}
