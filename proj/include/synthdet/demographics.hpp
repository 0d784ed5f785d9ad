#pragma once

#include <array>
#include <string>

#include "synthdet/common.hpp"

namespace synthdet {

enum class Ethnicity {
  White = 0,
  Asian = 1,
  Indian = 2,
  Black = 3,
  LatinoHispanic = 4,
  MiddleEastern = 5,
};

enum class Gender { Male = 0, Female = 1 };

inline constexpr int kEthnicityCount = 6;
inline constexpr int kGenderCount = 2;
inline constexpr int kMaxAgeBucket = 11;  // bucket k covers ages [10k, 10k+10)

inline constexpr std::array<const char*, kEthnicityCount> kEthnicityLabels = {
    "white", "asian", "indian", "black", "latino_hispanic", "middle_eastern"};

inline constexpr std::array<const char*, kGenderCount> kGenderLabels = {"male",
                                                                        "female"};

// Per-image demographic facet assignment along the three audited axes.
struct DemographicProfile {
  Ethnicity ethnicity = Ethnicity::White;
  Gender gender = Gender::Male;
  int age_bucket = 0;

  bool operator==(const DemographicProfile&) const = default;
};

inline const char* ethnicity_label(Ethnicity e) {
  return kEthnicityLabels[static_cast<int>(e)];
}

inline const char* gender_label(Gender g) {
  return kGenderLabels[static_cast<int>(g)];
}

// "30-40" style bucket label; bucket 7 -> "70-80".
std::string age_bucket_label(int bucket);

// Age in years -> bucket floor(age/10). Negative or absurd ages are rejected.
int age_to_bucket(int age_years);

Ethnicity parse_ethnicity(const std::string& label);
Gender parse_gender(const std::string& label);

inline void validate_profile(const DemographicProfile& p) {
  if (p.age_bucket < 0 || p.age_bucket > kMaxAgeBucket)
    throw ValidationError("age_bucket out of range [0,11]");
}

}  // namespace synthdet
