#include "mmfuse/training/results_io.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "mmfuse/training/metrics.hpp"

namespace mmfuse {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_number(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

util::Json optional_json(const std::optional<double>& v) { return v ? util::Json(*v) : util::Json(nullptr); }

}  // namespace

std::string repeats_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "repeat,seed,n_train,n_val,n_test,train_f1,val_f1,test_f1,audio_test_f1,video_test_f1,text_test_f1,config\n";
  for (const RepeatOutcome& o : r.repeats) {
    out << o.repeat << ',' << o.seed << ',' << o.n_train << ',' << o.n_val << ',' << o.n_test << ','
        << format_number(o.train_f1) << ',' << format_number(o.val_f1) << ',' << format_number(o.test_f1) << ','
        << optional_number(o.unimodal_test_f1[0]) << ',' << optional_number(o.unimodal_test_f1[1]) << ','
        << optional_number(o.unimodal_test_f1[2]) << ',' << csv_field(o.config.dump()) << '\n';
  }
  return out.str();
}

util::Json summary_json(const std::vector<ExperimentResult>& results) {
  util::Json experiments = util::Json::array();
  for (const ExperimentResult& r : results) {
    util::Json e = {{"scale", scale_name(r.scale)},
                    {"architecture", architecture_name(r.architecture)},
                    {"repeats", r.repeats.size()},
                    {"median_test_f1", r.median_test_f1},
                    {"median_unimodal_test_f1",
                     {{"audio", optional_json(r.median_unimodal_test_f1[0])},
                      {"video", optional_json(r.median_unimodal_test_f1[1])},
                      {"text", optional_json(r.median_unimodal_test_f1[2])}}},
                    {"best_unimodal_median", optional_json(r.best_unimodal_median)},
                    {"percentage_difference",
                     r.percentage_difference ? util::Json(round_to(*r.percentage_difference, 2)) : util::Json(nullptr)}};
    if (r.search) {
      util::Json trace = util::Json::array();
      for (const SearchTrial& t : r.search->trace) {
        trace.push_back({{"index", t.index},
                         {"score", optional_json(t.score)},
                         {"error", t.error},
                         {"config", to_json(t.params)}});
      }
      e["search"] = {{"best_index", r.search->best_index}, {"best_score", r.search->best_score}, {"trace", trace}};
    }
    experiments.push_back(std::move(e));
  }
  return {{"experiments", experiments},
          {"table1", table1_csv(results)},
          {"table2", table2_csv(results)},
          {"table5", table5_csv(results)}};
}

std::string table1_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "architecture,scale,median_test_f1\n";
  for (const ExperimentResult& r : results) {
    out << architecture_name(r.architecture) << ',' << scale_name(r.scale) << ',' << format_number(r.median_test_f1, 3)
        << '\n';
  }
  return out.str();
}

std::string table2_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "architecture,scale,percentage_difference\n";
  for (const ExperimentResult& r : results) {
    out << architecture_name(r.architecture) << ',' << scale_name(r.scale) << ','
        << (r.percentage_difference ? format_number(round_to(*r.percentage_difference, 2), 2) : "") << '\n';
  }
  return out.str();
}

std::string table5_csv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "architecture,scale,best_unimodal_median_f1,multimodal_median_f1,percentage_difference\n";
  for (const ExperimentResult& r : results) {
    out << architecture_name(r.architecture) << ',' << scale_name(r.scale) << ','
        << (r.best_unimodal_median ? format_number(*r.best_unimodal_median, 3) : "") << ','
        << format_number(r.median_test_f1, 3) << ','
        << (r.percentage_difference ? format_number(round_to(*r.percentage_difference, 2), 2) : "") << '\n';
  }
  return out.str();
}

}  // namespace mmfuse
