#include "synthdet/demographics.hpp"

namespace synthdet {

std::string age_bucket_label(int bucket) {
  if (bucket < 0 || bucket > kMaxAgeBucket)
    throw ValidationError("age_bucket out of range [0,11]");
  return std::to_string(10 * bucket) + "-" + std::to_string(10 * bucket + 10);
}

int age_to_bucket(int age_years) {
  if (age_years < 0 || age_years >= 10 * (kMaxAgeBucket + 1))
    throw ValidationError("age out of supported range [0,120): " +
                          std::to_string(age_years));
  return age_years / 10;
}

Ethnicity parse_ethnicity(const std::string& label) {
  for (int i = 0; i < kEthnicityCount; ++i)
    if (label == kEthnicityLabels[i]) return static_cast<Ethnicity>(i);
  throw ValidationError("unknown ethnicity label: " + label);
}

Gender parse_gender(const std::string& label) {
  for (int i = 0; i < kGenderCount; ++i)
    if (label == kGenderLabels[i]) return static_cast<Gender>(i);
  throw ValidationError("unknown gender label: " + label);
}

}  // namespace synthdet
