#pragma once

#include <cstdint>

namespace stdpzo {

// Learning rate α_k for k >= 1. Power decay gives alpha0 / k^exponent.
// alpha0 == 0 is accepted and freezes the iterate.
struct LearningRateSchedule {
  enum class Kind { constant, power_decay };

  Kind kind = Kind::constant;
  double alpha0 = 0.1;
  double exponent = 0.0;

  static LearningRateSchedule constant(double alpha0);
  static LearningRateSchedule power_decay(double alpha0, double exponent);

  // Throws std::invalid_argument on negative / non-finite fields.
  void validate() const;
};

double schedule_rate(const LearningRateSchedule& s, std::uint64_t k);

}  // namespace stdpzo
