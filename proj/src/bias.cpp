#include "synthdet/bias.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "subprocess.hpp"

namespace synthdet {

const char* axis_name(DemographicAxis axis) {
  switch (axis) {
    case DemographicAxis::Ethnicity: return "ethnicity";
    case DemographicAxis::Gender: return "gender";
    case DemographicAxis::Age: return "age";
  }
  throw ValidationError("unknown demographic axis");
}

namespace {

int facet_index(const DemographicProfile& p, DemographicAxis axis) {
  switch (axis) {
    case DemographicAxis::Ethnicity: return static_cast<int>(p.ethnicity);
    case DemographicAxis::Gender: return static_cast<int>(p.gender);
    case DemographicAxis::Age: return p.age_bucket;
  }
  throw ValidationError("unknown demographic axis");
}

std::string facet_label(DemographicAxis axis, int index) {
  switch (axis) {
    case DemographicAxis::Ethnicity: return kEthnicityLabels[index];
    case DemographicAxis::Gender: return kGenderLabels[index];
    case DemographicAxis::Age: return age_bucket_label(index);
  }
  throw ValidationError("unknown demographic axis");
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Max |a - b| over unordered distinct pairs, first maximal pair in facet
// order wins. One entry: value 0, the entry paired with itself.
MetricResult max_pairwise(const std::vector<std::pair<std::string, double>>& entries,
                          const char* metric) {
  if (entries.empty())
    throw ValidationError(std::string(metric) +
                          ": no eligible facet with a defined value");
  if (entries.size() == 1) return {0.0, entries[0].first, entries[0].first};
  MetricResult best{-1.0, "", ""};
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const double d = std::abs(entries[i].second - entries[j].second);
      if (d > best.value) best = {d, entries[i].first, entries[j].first};
    }
  return best;
}

std::vector<std::pair<std::string, double>> eligible(
    const std::vector<FacetStats>& stats, bool filter_below_min,
    std::optional<double> FacetStats::*rate) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& s : stats) {
    if (filter_below_min && s.below_min_samples) continue;
    if (rate) {
      if (!(s.*rate)) continue;
      out.emplace_back(s.facet_label, *(s.*rate));
    } else {
      out.emplace_back(s.facet_label, s.accuracy);
    }
  }
  return out;
}

}  // namespace

std::vector<FacetStats> facet_stats(const std::vector<Label>& predictions,
                                    const std::vector<Label>& truths,
                                    const std::vector<DemographicProfile>& profiles,
                                    DemographicAxis axis, Label positive_class,
                                    long long min_samples) {
  if (predictions.empty())
    throw ValidationError("facet_stats over an empty table");
  if (predictions.size() != truths.size() ||
      predictions.size() != profiles.size())
    throw ValidationError("facet_stats: predictions, truths, and profiles "
                          "must have equal lengths");

  struct Counts {
    long long n = 0, correct = 0, pos = 0, tp = 0, neg = 0, tn = 0;
  };
  std::map<int, Counts> groups;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    validate_profile(profiles[i]);
    Counts& c = groups[facet_index(profiles[i], axis)];
    ++c.n;
    if (predictions[i] == truths[i]) ++c.correct;
    if (truths[i] == positive_class) {
      ++c.pos;
      if (predictions[i] == positive_class) ++c.tp;
    } else {
      ++c.neg;
      if (predictions[i] != positive_class) ++c.tn;
    }
  }

  std::vector<FacetStats> out;
  out.reserve(groups.size());
  for (const auto& [index, c] : groups) {
    FacetStats s;
    s.facet_label = facet_label(axis, index);
    s.n = c.n;
    s.accuracy = static_cast<double>(c.correct) / static_cast<double>(c.n);
    if (c.pos > 0)
      s.acceptance_rate = static_cast<double>(c.tp) / static_cast<double>(c.pos);
    if (c.neg > 0)
      s.rejection_rate = static_cast<double>(c.tn) / static_cast<double>(c.neg);
    s.below_min_samples = c.n <= min_samples;
    out.push_back(std::move(s));
  }
  return out;
}

MetricResult accuracy_difference(const std::vector<FacetStats>& stats,
                                 bool filter_below_min) {
  return max_pairwise(eligible(stats, filter_below_min, nullptr), "AD");
}

MetricResult dar(const std::vector<FacetStats>& stats, bool filter_below_min) {
  return max_pairwise(
      eligible(stats, filter_below_min, &FacetStats::acceptance_rate), "DAR");
}

MetricResult drr(const std::vector<FacetStats>& stats, bool filter_below_min) {
  return max_pairwise(
      eligible(stats, filter_below_min, &FacetStats::rejection_rate), "DRR");
}

namespace {

AxisMetrics compute_metrics(const std::vector<FacetStats>& stats,
                            bool filtered) {
  AxisMetrics m;
  try {
    m.ad = accuracy_difference(stats, filtered);
  } catch (const ValidationError& e) {
    m.ad_error = e.what();
  }
  try {
    m.dar = dar(stats, filtered);
  } catch (const ValidationError& e) {
    m.dar_error = e.what();
  }
  try {
    m.drr = drr(stats, filtered);
  } catch (const ValidationError& e) {
    m.drr_error = e.what();
  }
  return m;
}

}  // namespace

BiasReport audit(const std::vector<Label>& predictions,
                 const std::vector<Label>& truths,
                 const std::vector<DemographicProfile>& profiles,
                 long long min_samples) {
  BiasReport report;
  report.min_samples = min_samples;
  for (DemographicAxis axis : {DemographicAxis::Ethnicity,
                               DemographicAxis::Gender, DemographicAxis::Age}) {
    AxisReport ar;
    ar.axis = axis_name(axis);
    ar.facets = facet_stats(predictions, truths, profiles, axis, Label::Fake,
                            min_samples);
    ar.filtered = compute_metrics(ar.facets, true);
    ar.unfiltered = compute_metrics(ar.facets, false);
    report.axes.push_back(std::move(ar));
  }
  return report;
}

std::string bias_report_csv(const BiasReport& report, bool filtered) {
  std::ostringstream out;
  out << "axis,AD,DRR,DAR\n";
  for (const auto& axis : report.axes) {
    const AxisMetrics& m = filtered ? axis.filtered : axis.unfiltered;
    out << axis.axis << ','
        << (m.ad ? format_number(m.ad->value) : "nan") << ','
        << (m.drr ? format_number(m.drr->value) : "nan") << ','
        << (m.dar ? format_number(m.dar->value) : "nan") << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json metric_json(const std::optional<MetricResult>& m,
                           const std::string& error) {
  if (!m) return nlohmann::json{{"error", error}};
  return nlohmann::json{{"value", m->value},
                        {"pair", {m->facet_a, m->facet_b}}};
}

nlohmann::json metrics_json(const AxisMetrics& m) {
  return nlohmann::json{{"AD", metric_json(m.ad, m.ad_error)},
                        {"DRR", metric_json(m.drr, m.drr_error)},
                        {"DAR", metric_json(m.dar, m.dar_error)}};
}

}  // namespace

nlohmann::json bias_report_json(const BiasReport& report) {
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& axis : report.axes) {
    nlohmann::json facets = nlohmann::json::array();
    for (const auto& f : axis.facets) {
      nlohmann::json fj{{"label", f.facet_label},
                        {"n", f.n},
                        {"accuracy", f.accuracy},
                        {"below_min_samples", f.below_min_samples}};
      fj["acceptance_rate"] =
          f.acceptance_rate ? nlohmann::json(*f.acceptance_rate)
                            : nlohmann::json(nullptr);
      fj["rejection_rate"] = f.rejection_rate
                                 ? nlohmann::json(*f.rejection_rate)
                                 : nlohmann::json(nullptr);
      facets.push_back(std::move(fj));
    }
    axes.push_back(nlohmann::json{{"axis", axis.axis},
                                  {"facets", std::move(facets)},
                                  {"filtered", metrics_json(axis.filtered)},
                                  {"unfiltered", metrics_json(axis.unfiltered)}});
  }
  return nlohmann::json{{"min_samples", report.min_samples},
                        {"positive_class", report.positive_class},
                        {"axes", std::move(axes)}};
}

// ---------------------------------------------------------------------------
// Prediction tables
// ---------------------------------------------------------------------------

DemographicProfile PredictionRecord::profile() const {
  DemographicProfile p;
  p.ethnicity = parse_ethnicity(ethnicity);
  p.gender = parse_gender(gender);
  p.age_bucket = age_to_bucket(age_years);
  return p;
}

namespace {

constexpr const char* kTableHeader =
    "image_id,prediction,truth,ethnicity,gender,age";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

std::vector<PredictionRecord> parse_prediction_table(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("empty prediction table");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTableHeader)
    throw ValidationError("prediction table header must be exactly '" +
                          std::string(kTableHeader) + "', got '" + line + "'");

  std::vector<PredictionRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6)
      throw ValidationError("prediction table line " +
                            std::to_string(line_no) + ": expected 6 fields, "
                            "got " + std::to_string(fields.size()));
    PredictionRecord r;
    r.image_id = fields[0];
    r.prediction = parse_label(fields[1]);
    r.truth = parse_label(fields[2]);
    r.ethnicity = fields[3];
    r.gender = fields[4];
    try {
      std::size_t pos = 0;
      r.age_years = std::stoi(fields[5], &pos);
      if (pos != fields[5].size()) throw std::invalid_argument(fields[5]);
    } catch (const std::exception&) {
      throw ValidationError("prediction table line " +
                            std::to_string(line_no) + ": bad age '" +
                            fields[5] + "'");
    }
    (void)r.profile();  // validates ethnicity/gender/age up front
    records.push_back(std::move(r));
  }
  return records;
}

std::string prediction_table_csv(const std::vector<PredictionRecord>& records) {
  std::ostringstream out;
  out << kTableHeader << '\n';
  for (const auto& r : records)
    out << r.image_id << ',' << label_name(r.prediction) << ','
        << label_name(r.truth) << ',' << r.ethnicity << ',' << r.gender << ','
        << r.age_years << '\n';
  return out.str();
}

BiasReport audit_records(const std::vector<PredictionRecord>& records,
                         long long min_samples) {
  std::vector<Label> predictions, truths;
  std::vector<DemographicProfile> profiles;
  predictions.reserve(records.size());
  truths.reserve(records.size());
  profiles.reserve(records.size());
  for (const auto& r : records) {
    predictions.push_back(r.prediction);
    truths.push_back(r.truth);
    profiles.push_back(r.profile());
  }
  return audit(predictions, truths, profiles, min_samples);
}

// ---------------------------------------------------------------------------
// Demographic assignment
// ---------------------------------------------------------------------------

DemographicsResult assign_demographics(const std::vector<Image>& images,
                                       const AttributePredictor& predictor) {
  DemographicsResult result;
  result.profiles.resize(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      const PredictedAttributes attrs = predictor.predict(images[i]);
      DemographicProfile p;
      p.ethnicity = parse_ethnicity(attrs.ethnicity);
      p.gender = parse_gender(attrs.gender);
      p.age_bucket = age_to_bucket(attrs.age_years);
      result.profiles[i] = p;
    } catch (const std::exception& e) {
      result.errors.emplace_back(i, e.what());
    }
  }
  return result;
}

ExternalAttributePredictor::ExternalAttributePredictor(std::string command)
    : command_(std::move(command)) {
  if (command_.empty())
    throw ConfigError("empty external attribute predictor command");
}

std::string ExternalAttributePredictor::id() const {
  return "external:" + command_;
}

PredictedAttributes ExternalAttributePredictor::predict(const Image& image) const {
  detail::ScratchDir scratch("synthdet-attr-");
  const auto in_path = scratch.path / "face.png";
  const auto out_path = scratch.path / "attrs.json";
  write_png(image, in_path.string());

  const std::string cmd = detail::resolve_adapter_command(command_) +
                          " --image " + in_path.string() + " --out " +
                          out_path.string();
  const auto result = detail::run_command(cmd, scratch.path);
  if (result.exit_code != 0)
    throw AdapterError("attribute predictor failed (exit " +
                       std::to_string(result.exit_code) + "): " +
                       result.stderr_tail);

  std::ifstream in(out_path);
  if (!in)
    throw AdapterError("attribute predictor produced no output file; stderr: " +
                       result.stderr_tail);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError(std::string("attribute predictor wrote bad JSON: ") +
                       e.what());
  }
  PredictedAttributes attrs;
  try {
    attrs.ethnicity = j.at("ethnicity").get<std::string>();
    attrs.gender = j.at("gender").get<std::string>();
    attrs.age_years = j.at("age").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError(std::string("attribute predictor JSON missing field: ") +
                       e.what());
  }
  return attrs;
}

}  // namespace synthdet
