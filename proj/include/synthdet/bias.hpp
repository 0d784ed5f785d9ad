#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthdet/demographics.hpp"
#include "synthdet/detector.hpp"
#include "synthdet/image.hpp"

namespace synthdet {

inline constexpr long long kDefaultMinSamples = 500;

enum class DemographicAxis { Ethnicity, Gender, Age };
const char* axis_name(DemographicAxis axis);

// Per-facet confusion summary. AR = TP / observed positives and RR = TN /
// observed negatives stay unset when the facet has no observed positives
// (resp. negatives); such facets are skipped by DAR/DRR rather than counted
// as zero, which would fabricate disparity.
struct FacetStats {
  std::string facet_label;
  long long n = 0;
  double accuracy = 0.0;
  std::optional<double> acceptance_rate;
  std::optional<double> rejection_rate;
  bool below_min_samples = false;
};

// Max pairwise |difference| plus the facet pair attaining it. With a single
// eligible facet the value is 0 and both labels name that facet.
struct MetricResult {
  double value = 0.0;
  std::string facet_a;
  std::string facet_b;
};

// Groups by the axis's facet (natural order: ethnicity and gender in label
// order, age buckets ascending) and computes ACC/AR/RR per facet.
std::vector<FacetStats> facet_stats(const std::vector<Label>& predictions,
                                    const std::vector<Label>& truths,
                                    const std::vector<DemographicProfile>& profiles,
                                    DemographicAxis axis,
                                    Label positive_class = Label::Fake,
                                    long long min_samples = kDefaultMinSamples);

// AD / DAR / DRR. filter_below_min drops flagged facets first. Throws
// ValidationError when no eligible facet remains (or, for the rates, when
// no facet has the rate defined).
MetricResult accuracy_difference(const std::vector<FacetStats>& stats,
                                 bool filter_below_min = true);
MetricResult dar(const std::vector<FacetStats>& stats,
                 bool filter_below_min = true);
MetricResult drr(const std::vector<FacetStats>& stats,
                 bool filter_below_min = true);

// One metric triple; a metric that could not be computed (e.g. every facet
// flagged) holds the error text instead of a value.
struct AxisMetrics {
  std::optional<MetricResult> ad, dar, drr;
  std::string ad_error, dar_error, drr_error;
};

struct AxisReport {
  std::string axis;
  std::vector<FacetStats> facets;
  AxisMetrics filtered;    // headline: facets with n > min_samples
  AxisMetrics unfiltered;  // every facet
};

struct BiasReport {
  long long min_samples = kDefaultMinSamples;
  std::string positive_class = "fake";  // accept = flag-as-swapped
  std::vector<AxisReport> axes;         // ethnicity, gender, age
};

// Full three-axis audit. Metric failures on an axis are recorded in-report;
// the other axes still come out.
BiasReport audit(const std::vector<Label>& predictions,
                 const std::vector<Label>& truths,
                 const std::vector<DemographicProfile>& profiles,
                 long long min_samples = kDefaultMinSamples);

// CSV with columns exactly: axis,AD,DRR,DAR (one row per axis). Metrics that
// failed render as "nan".
std::string bias_report_csv(const BiasReport& report, bool filtered);
nlohmann::json bias_report_json(const BiasReport& report);

// --------------------------------------------------------------------------
// Prediction tables (shared CSV schema: image_id,prediction,truth,ethnicity,
// gender,age; age in years, bucketed as floor(age/10) for the audit).
// --------------------------------------------------------------------------

struct PredictionRecord {
  std::string image_id;
  Label prediction = Label::Real;
  Label truth = Label::Real;
  std::string ethnicity;
  std::string gender;
  int age_years = 0;

  DemographicProfile profile() const;
};

std::vector<PredictionRecord> parse_prediction_table(const std::string& csv);
std::string prediction_table_csv(const std::vector<PredictionRecord>& records);

BiasReport audit_records(const std::vector<PredictionRecord>& records,
                         long long min_samples = kDefaultMinSamples);

// --------------------------------------------------------------------------
// Demographic assignment
// --------------------------------------------------------------------------

struct PredictedAttributes {
  std::string ethnicity;
  std::string gender;
  int age_years = 0;
};

class AttributePredictor {
 public:
  virtual ~AttributePredictor() = default;
  virtual std::string id() const = 0;
  virtual PredictedAttributes predict(const Image& image) const = 0;
};

struct DemographicsResult {
  std::vector<std::optional<DemographicProfile>> profiles;  // one per image
  std::vector<std::pair<std::size_t, std::string>> errors;  // index, message
};

// One profile per image; per-image adapter failures are collected and the
// rest proceed. Ages map to buckets via floor(age/10).
DemographicsResult assign_demographics(const std::vector<Image>& images,
                                       const AttributePredictor& predictor);

// External predictor adapter: `cmd --image IN.png --out OUT.json` writing
// {"ethnicity": ..., "gender": ..., "age": years}.
class ExternalAttributePredictor final : public AttributePredictor {
 public:
  explicit ExternalAttributePredictor(std::string command);
  std::string id() const override;
  PredictedAttributes predict(const Image& image) const override;

 private:
  std::string command_;
};

}  // namespace synthdet
