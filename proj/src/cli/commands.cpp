#include "mmfuse/cli/commands.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <functional>
#include <sstream>

#include "mmfuse/dataset/cohort.hpp"
#include "mmfuse/dataset/cohort_io.hpp"
#include "mmfuse/dataset/qc.hpp"
#include "mmfuse/error.hpp"
#include "mmfuse/explain/export.hpp"
#include "mmfuse/explain/reduce.hpp"
#include "mmfuse/models/checkpoint.hpp"
#include "mmfuse/models/fusion.hpp"
#include "mmfuse/training/metrics.hpp"
#include "mmfuse/training/results_io.hpp"

namespace mmfuse::cli {

namespace fs = std::filesystem;
using util::Json;

namespace {

Json load_config(const GlobalOptions& o) { return o.config ? util::load_json_file(*o.config) : Json::object(); }

std::string out_path(const GlobalOptions& o, const std::string& name) {
  fs::create_directories(o.out);
  return (fs::path(o.out) / name).string();
}

void write_out(const GlobalOptions& o, const std::string& name, const std::string& text) {
  const fs::path p = fs::path(out_path(o, name));
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  util::write_text_file(p.string(), text);
}

std::vector<SessionRecord> qc_passed(std::vector<SessionRecord> sessions) {
  std::vector<SessionRecord> kept;
  for (SessionRecord& s : sessions) {
    s.qc_flags = qc_screen(s);
    if (s.qc_flags.empty()) kept.push_back(std::move(s));
  }
  return kept;
}

QcThresholds thresholds_from_json(const Json& j) {
  const char* ctx = "qc.thresholds";
  util::require_object(j, ctx);
  util::reject_unknown_keys(
      j, {"max_frame_failure_fraction", "min_word_count", "min_legibility", "max_probe_disagreement"}, ctx);
  QcThresholds t;
  util::read_optional(j, "max_frame_failure_fraction", t.max_frame_failure_fraction, ctx);
  util::read_optional(j, "min_word_count", t.min_word_count, ctx);
  util::read_optional(j, "min_legibility", t.min_legibility, ctx);
  util::read_optional(j, "max_probe_disagreement", t.max_probe_disagreement, ctx);
  return t;
}

struct SplitSettings {
  SplitLevel level = SplitLevel::Participant;
  SplitRatios ratios;
};

SplitSettings split_from_json(const Json& j) {
  const char* ctx = "split";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j, {"level", "ratios"}, ctx);
  SplitSettings s;
  if (j.contains("level")) s.level = parse_split_level(util::read_required<std::string>(j, "level", ctx));
  if (j.contains("ratios")) {
    const auto r = util::read_required<std::array<double, 3>>(j, "ratios", ctx);
    s.ratios = {r[0], r[1], r[2]};
  }
  return s;
}

Json split_to_json(const SplitSettings& s) {
  return {{"level", split_level_name(s.level)}, {"ratios", {s.ratios.train, s.ratios.val, s.ratios.test}}};
}

struct ExperimentConfig {
  std::string cohort;
  std::vector<Scale> scales{Scale::PHQ9};
  std::vector<Architecture> architectures{kArchitectures.begin(), kArchitectures.end()};
  ExperimentSpec spec;
  bool apply_qc = true;
  bool checkpoints = true;
  // reduce only
  std::string importance;
  std::vector<double> pcts{kDefaultReducePercents.begin(), kDefaultReducePercents.end()};
};

ExperimentConfig experiment_from_json(const Json& j, const GlobalOptions& o, bool reduce) {
  const char* ctx = "experiment";
  util::require_object(j, ctx);
  std::initializer_list<std::string_view> common{"cohort", "scales", "architectures", "repeats", "seed", "search_mode",
                                                 "search", "train", "encoder", "fusion", "baseline", "split",
                                                 "unimodal", "apply_qc", "checkpoints"};
  std::initializer_list<std::string_view> with_reduce{
      "cohort", "scales", "architectures", "repeats", "seed", "search_mode", "search", "train", "encoder",
      "fusion", "baseline", "split", "unimodal", "apply_qc", "checkpoints", "importance", "pcts"};
  util::reject_unknown_keys(j, reduce ? with_reduce : common, ctx);
  ExperimentConfig c;
  c.cohort = util::read_required<std::string>(j, "cohort", ctx);
  if (j.contains("scales")) {
    c.scales.clear();
    for (const auto& s : util::read_required<std::vector<std::string>>(j, "scales", ctx)) c.scales.push_back(parse_scale(s));
  }
  if (j.contains("architectures")) {
    c.architectures.clear();
    for (const auto& a : util::read_required<std::vector<std::string>>(j, "architectures", ctx)) {
      c.architectures.push_back(parse_architecture(a));
    }
  }
  if (c.scales.empty() || c.architectures.empty()) throw ConfigError("experiment: scales and architectures must not be empty");
  ExperimentSpec& s = c.spec;
  util::read_optional(j, "repeats", s.repeats, ctx);
  util::read_optional(j, "seed", s.base_seed, ctx);
  if (o.seed) s.base_seed = *o.seed;
  s.jobs = o.jobs;
  if (j.contains("search_mode")) s.search_mode = parse_search_mode(util::read_required<std::string>(j, "search_mode", ctx));
  if (j.contains("search")) s.search = search_space_from_json(j.at("search"));
  if (j.contains("train")) s.pipeline.train = train_config_from_json(j.at("train"));
  if (j.contains("encoder")) s.pipeline.hyper.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("fusion")) s.pipeline.hyper.fusion = fusion_config_from_json(j.at("fusion"));
  if (j.contains("baseline")) s.pipeline.hyper.baseline = baseline_config_from_json(j.at("baseline"));
  s.pipeline.hyper.adam = s.pipeline.train.adam;
  validate(s.pipeline.hyper.fusion, 3 * s.pipeline.hyper.encoder.embedding_dim());
  if (j.contains("split")) {
    const SplitSettings split = split_from_json(j.at("split"));
    s.pipeline.level = split.level;
    s.pipeline.ratios = split.ratios;
  }
  util::read_optional(j, "unimodal", s.pipeline.unimodal, ctx);
  util::read_optional(j, "apply_qc", c.apply_qc, ctx);
  util::read_optional(j, "checkpoints", c.checkpoints, ctx);
  if (s.repeats == 0) throw ConfigError("experiment.repeats must be at least 1");
  if (reduce) {
    c.importance = util::read_required<std::string>(j, "importance", ctx);
    util::read_optional(j, "pcts", c.pcts, ctx);
    if (c.pcts.empty()) throw ConfigError("experiment.pcts must not be empty");
    for (double p : c.pcts) top_k_count(p);
    if (c.scales.size() != 1 || c.architectures.size() != 1) {
      throw ConfigError("reduce takes exactly one scale and one architecture");
    }
  }
  return c;
}

std::vector<SessionRecord> load_cohort(const std::string& path, bool apply_qc) {
  if (!fs::exists(path)) throw IoError("cohort file not found: " + path);
  std::vector<SessionRecord> sessions = read_cohort(path);
  if (apply_qc) sessions = qc_passed(std::move(sessions));
  if (sessions.empty()) throw ValidationError("no sessions left to use in " + path);
  return sessions;
}

std::string experiment_stem(Scale s, Architecture a) {
  return std::string(scale_name(s)) + "_" + std::string(architecture_name(a));
}

}  // namespace

void cmd_gen_data(const GlobalOptions& o, std::ostream& out, std::ostream& err) {
  CohortConfig config = cohort_config_from_json(load_config(o));
  if (o.seed) config.seed = *o.seed;
  if (o.verbose) err << "generating " << config.n_participants << " participants\n";
  const std::vector<SessionRecord> sessions = generate_cohort(config);
  write_cohort(out_path(o, "cohort.ndjson"), sessions);
  const Json manifest = cohort_manifest(config, sessions);
  write_out(o, "manifest.json", manifest.dump(2) + "\n");
  out << "generated " << sessions.size() << " sessions from " << manifest["participants"].get<std::size_t>()
      << " participants\n";
  const auto prev = realized_prevalence(sessions);
  for (Scale s : kScales) {
    out << "prevalence " << scale_name(s) << " " << format_number(prev[static_cast<std::size_t>(s)], 4) << " (target "
        << format_number(config.prevalence[static_cast<std::size_t>(s)], 3) << ")\n";
  }
  const auto planted = planted_violation_counts(sessions);
  for (QcFlag f : kQcFlags) out << "planted " << qc_flag_name(f) << " " << planted[static_cast<std::size_t>(f)] << "\n";
}

void cmd_qc(const GlobalOptions& o, std::ostream& out, std::ostream&) {
  const Json j = load_config(o);
  util::require_object(j, "qc");
  util::reject_unknown_keys(j, {"cohort", "thresholds"}, "qc");
  const std::string path = util::read_required<std::string>(j, "cohort", "qc");
  const QcThresholds th = j.contains("thresholds") ? thresholds_from_json(j.at("thresholds")) : QcThresholds{};
  if (!fs::exists(path)) throw IoError("cohort file not found: " + path);
  std::vector<SessionRecord> sessions = read_cohort(path);
  const QcReport report = run_qc(sessions, th);
  std::vector<SessionRecord> passed;
  Json failed = Json::array();
  for (std::size_t i : report.passed) passed.push_back(sessions[i]);
  for (std::size_t i : report.failed) {
    Json flags = Json::array();
    for (QcFlag f : sessions[i].qc_flags) flags.push_back(qc_flag_name(f));
    failed.push_back({{"session_id", sessions[i].id()}, {"flags", flags}});
  }
  Json counts = Json::object();
  for (QcFlag f : kQcFlags) counts[std::string(qc_flag_name(f))] = report.flag_counts[static_cast<std::size_t>(f)];
  const Json doc = {{"total", report.total}, {"passed", report.passed.size()}, {"flag_counts", counts},
                    {"failed_sessions", failed}, {"summary", report.summary_line()}};
  write_out(o, "qc_report.json", doc.dump(2) + "\n");
  write_cohort(out_path(o, "qc_passed.ndjson"), passed);
  out << report.summary_line() << "\n";
  for (QcFlag f : kQcFlags) out << "flag " << qc_flag_name(f) << " " << report.flag_counts[static_cast<std::size_t>(f)] << "\n";
}

void cmd_train(const GlobalOptions& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = experiment_from_json(load_config(o), o, false);
  const std::vector<SessionRecord> cohort = load_cohort(c.cohort, c.apply_qc);
  std::vector<ExperimentResult> results;
  for (Scale scale : c.scales) {
    for (Architecture arch : c.architectures) {
      ExperimentSpec spec = c.spec;
      spec.pipeline.scale = scale;
      spec.pipeline.architecture = arch;
      if (o.verbose) err << "running " << experiment_stem(scale, arch) << " x" << spec.repeats << "\n";
      TrainedPipeline first;
      ExperimentResult res = evaluate_repeated(cohort, spec, c.checkpoints ? &first : nullptr);
      const std::string stem = experiment_stem(scale, arch);
      write_out(o, stem + "_repeats.csv", repeats_csv(res));
      if (c.checkpoints && first.model) {
        Json ck = checkpoint_json(*first.model);
        ck["meta"] = {{"scale", scale_name(scale)},
                      {"split_seed", spec.base_seed},
                      {"split", split_to_json({spec.pipeline.level, spec.pipeline.ratios})},
                      {"apply_qc", c.apply_qc}};
        write_out(o, "checkpoints/" + stem + ".json", ck.dump() + "\n");
      }
      out << stem << " median_test_f1 " << format_number(res.median_test_f1, 4);
      if (res.best_unimodal_median) out << " best_unimodal " << format_number(*res.best_unimodal_median, 4);
      if (res.percentage_difference) {
        out << " percentage_difference " << format_number(round_to(*res.percentage_difference, 2), 2);
      }
      out << "\n";
      results.push_back(std::move(res));
    }
  }
  write_out(o, "summary.json", summary_json(results).dump(2) + "\n");
  write_out(o, "table1.csv", table1_csv(results));
  write_out(o, "table2.csv", table2_csv(results));
  write_out(o, "table5.csv", table5_csv(results));
}

namespace {

struct LoadedCheckpoint {
  Json doc;
  std::unique_ptr<Model> model;
};

LoadedCheckpoint read_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path);
  LoadedCheckpoint ck;
  try {
    ck.doc = Json::parse(util::read_text_file(path));
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  ck.model = load_model(ck.doc);
  return ck;
}

}  // namespace

void cmd_eval(const GlobalOptions& o, std::ostream& out, std::ostream&) {
  const Json j = load_config(o);
  const char* ctx = "eval";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j, {"cohort", "checkpoint", "scale", "partition", "apply_qc"}, ctx);
  LoadedCheckpoint ck = read_checkpoint(util::read_required<std::string>(j, "checkpoint", ctx));
  const Json meta = ck.doc.value("meta", Json::object());
  bool apply_qc = meta.value("apply_qc", true);
  util::read_optional(j, "apply_qc", apply_qc, ctx);
  const std::vector<SessionRecord> cohort = load_cohort(util::read_required<std::string>(j, "cohort", ctx), apply_qc);
  std::string scale_text = meta.value("scale", std::string("PHQ9"));
  util::read_optional(j, "scale", scale_text, ctx);
  const Scale scale = parse_scale(scale_text);
  std::string partition = "test";
  util::read_optional(j, "partition", partition, ctx);
  std::vector<std::size_t> rows;
  if (partition == "all") {
    rows.resize(cohort.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    if (!meta.contains("split_seed")) throw ConfigError("checkpoint has no split metadata; use partition \"all\"");
    const SplitSettings ss = split_from_json(meta.at("split"));
    const Split split = split_cohort(cohort, ss.ratios, ss.level, RngStream(meta.at("split_seed").get<std::uint64_t>()));
    if (partition == "train") rows = split.train;
    else if (partition == "val") rows = split.val;
    else if (partition == "test") rows = split.test;
    else throw ConfigError("eval.partition must be train, val, test or all");
  }
  ExampleSet set = make_examples(cohort, rows, scale);
  if (auto* fusion = dynamic_cast<FusionHeadModel*>(ck.model.get()); fusion) {
    throw ConfigError("eval needs a model that reads raw features, not a fusion stage checkpoint");
  }
  const std::vector<double> p = predict_probabilities(*ck.model, set);
  const Confusion cm = confusion(p, set.labels);
  std::ostringstream pred;
  pred << "session_id,label,probability\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pred << csv_field(cohort[rows[i]].id()) << ',' << set.labels[i] << ',' << format_number(p[i], 9) << '\n';
  }
  write_out(o, "predictions.csv", pred.str());
  const double f1 = f1_from_confusion(cm);
  const Json doc = {{"scale", scale_name(scale)}, {"partition", partition}, {"sessions", rows.size()}, {"f1", f1},
                    {"confusion", {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}}}};
  write_out(o, "eval.json", doc.dump(2) + "\n");
  out << "f1 " << format_number(f1, 4) << " on " << rows.size() << " " << partition << " sessions\n";
}

void cmd_explain(const GlobalOptions& o, std::ostream& out, std::ostream& err) {
  const Json j = load_config(o);
  const char* ctx = "explain";
  util::require_object(j, ctx);
  util::reject_unknown_keys(j,
                            {"cohort", "checkpoint", "steps", "chunk", "n_baselines", "max_sessions",
                             "export_attributions", "seed", "apply_qc"},
                            ctx);
  LoadedCheckpoint ck = read_checkpoint(util::read_required<std::string>(j, "checkpoint", ctx));
  const Json meta = ck.doc.value("meta", Json::object());
  if (!meta.contains("split_seed")) throw ConfigError("checkpoint has no split metadata");
  bool apply_qc = meta.value("apply_qc", true);
  util::read_optional(j, "apply_qc", apply_qc, ctx);
  const std::vector<SessionRecord> cohort = load_cohort(util::read_required<std::string>(j, "cohort", ctx), apply_qc);
  ExplainOptions eo;
  util::read_optional(j, "steps", eo.ig.steps, ctx);
  util::read_optional(j, "chunk", eo.ig.chunk, ctx);
  util::read_optional(j, "n_baselines", eo.n_baselines, ctx);
  util::read_optional(j, "seed", eo.seed, ctx);
  if (o.seed) eo.seed = *o.seed;
  eo.jobs = o.jobs;
  std::size_t max_sessions = 0;
  util::read_optional(j, "max_sessions", max_sessions, ctx);
  bool export_all = false;
  util::read_optional(j, "export_attributions", export_all, ctx);

  const SplitSettings ss = split_from_json(meta.at("split"));
  const Split split = split_cohort(cohort, ss.ratios, ss.level, RngStream(meta.at("split_seed").get<std::uint64_t>()));
  std::vector<std::size_t> targets = split.test;
  if (max_sessions > 0 && targets.size() > max_sessions) targets.resize(max_sessions);
  if (o.verbose) err << "explaining " << targets.size() << " sessions\n";
  const std::vector<AttributionResult> attr = explain_sessions(*ck.model, cohort, targets, split.train, std::nullopt, eo);
  const GlobalImportance gi = global_importance(attr);
  write_out(o, "global_importance.csv", importance_csv(gi));

  std::vector<std::string> ids;
  for (std::size_t t : targets) ids.push_back(cohort[t].id());
  if (export_all) write_out(o, "attributions.csv", attributions_csv(ids, attr));
  // Top-ranked feature of each modality.
  std::array<std::size_t, 3> top{};
  std::array<bool, 3> seen{};
  for (std::size_t g : gi.ranking) {
    const std::size_t m = index_of(split_global_index(g).first);
    if (!seen[m]) {
      seen[m] = true;
      top[m] = g;
    }
  }
  double max_residual = 0.0;
  for (std::size_t s = 0; s < attr.size(); ++s) {
    for (Modality m : kModalities) {
      const std::size_t g = top[index_of(m)];
      write_out(o, "timeseries/" + ids[s] + "_" + std::string(modality_name(m)) + ".csv",
                timeseries_csv(ids[s], g, attribution_timeseries(attr[s], g)));
    }
    for (double r : attr[s].residuals) max_residual = std::max(max_residual, std::abs(r));
  }
  Json top_json = Json::object();
  for (Modality m : kModalities) {
    const auto local = split_global_index(top[index_of(m)]).second;
    top_json[std::string(modality_name(m))] = feature_name(m, local);
  }
  const Json doc = {{"sessions", targets.size()},
                    {"steps", eo.ig.steps},
                    {"n_baselines", eo.n_baselines},
                    {"max_abs_completeness_residual", max_residual},
                    {"top_feature_per_modality", top_json}};
  write_out(o, "explain_summary.json", doc.dump(2) + "\n");
  const auto [m0, l0] = split_global_index(gi.ranking[0]);
  out << "explained " << targets.size() << " sessions; top feature " << feature_name(m0, l0) << " ("
      << modality_name(m0) << ")\n";
}

void cmd_reduce(const GlobalOptions& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = experiment_from_json(load_config(o), o, true);
  if (!fs::exists(c.importance)) throw IoError("importance file not found: " + c.importance);
  const GlobalImportance gi = parse_importance_csv(util::read_text_file(c.importance));
  const std::vector<SessionRecord> cohort = load_cohort(c.cohort, c.apply_qc);
  ExperimentSpec spec = c.spec;
  spec.pipeline.scale = c.scales.front();
  spec.pipeline.architecture = c.architectures.front();
  if (o.verbose) err << "reduced-feature study over " << c.pcts.size() << " percentages\n";
  const std::vector<ReducedRow> rows = reduced_feature_experiment(cohort, spec, gi, c.pcts);
  write_out(o, "reduced_features.csv", reduced_csv(rows));
  for (const ReducedRow& r : rows) {
    out << "pct " << format_number(r.pct, 0) << " features " << r.n_features << " median_test_f1 "
        << format_number(r.median_test_f1, 4) << "\n";
  }
}

void cmd_report(const GlobalOptions& o, std::ostream& out, std::ostream&) {
  const Json j = load_config(o);
  util::require_object(j, "report");
  util::reject_unknown_keys(j, {"summaries"}, "report");
  std::vector<std::string> paths{(fs::path(o.out) / "summary.json").string()};
  util::read_optional(j, "summaries", paths, "report");
  std::ostringstream md;
  md << "| architecture | scale | best unimodal F1 | multimodal F1 | % difference |\n";
  md << "|---|---|---|---|---|\n";
  for (const std::string& p : paths) {
    if (!fs::exists(p)) throw IoError("summary not found: " + p);
    const Json s = util::load_json_file(p);
    for (const Json& e : s.at("experiments")) {
      auto cell = [](const Json& v, int decimals) { return v.is_null() ? std::string("-") : format_number(v.get<double>(), decimals); };
      md << "| " << e.at("architecture").get<std::string>() << " | " << e.at("scale").get<std::string>() << " | "
         << cell(e.at("best_unimodal_median"), 3) << " | " << cell(e.at("median_test_f1"), 3) << " | "
         << cell(e.at("percentage_difference"), 2) << " |\n";
    }
  }
  write_out(o, "report.md", md.str());
  out << md.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal mood-symptom classification toolkit", "mmfuse"};
  app.require_subcommand(1);
  GlobalOptions o;
  std::string config;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--jobs", o.jobs, "Parallel repeats / sessions")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", o.verbose, "Progress on stderr");
  app.fallthrough();

  using Command = void (*)(const GlobalOptions&, std::ostream&, std::ostream&);
  const std::vector<std::pair<std::string, Command>> commands{
      {"gen-data", cmd_gen_data}, {"qc", cmd_qc},           {"train", cmd_train},   {"eval", cmd_eval},
      {"explain", cmd_explain},   {"reduce", cmd_reduce},   {"report", cmd_report}};
  const std::vector<std::string> help{"Generate a synthetic cohort", "Screen sessions with the QC rules",
                                      "Run the repeated-split experiment",  "Score a checkpoint",
                                      "Attribute a checkpoint's predictions", "Reduced-feature study",
                                      "Combine experiment summaries"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) subs.push_back(app.add_subcommand(commands[i].first, help[i]));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  if (!config.empty()) o.config = config;
  if (seed_opt->count() > 0) o.seed = seed;

  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (subs[i]->parsed()) commands[i].second(o, out, err);
    }
  } catch (const RepeatFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const MetricError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const DegenerateBatchError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace mmfuse::cli
