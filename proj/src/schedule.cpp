#include "stdpzo/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace stdpzo {

LearningRateSchedule LearningRateSchedule::constant(double alpha0) {
  LearningRateSchedule s{Kind::constant, alpha0, 0.0};
  s.validate();
  return s;
}

LearningRateSchedule LearningRateSchedule::power_decay(double alpha0,
                                                       double exponent) {
  LearningRateSchedule s{Kind::power_decay, alpha0, exponent};
  s.validate();
  return s;
}

void LearningRateSchedule::validate() const {
  if (!std::isfinite(alpha0) || alpha0 < 0.0)
    throw std::invalid_argument("learning rate alpha0 must be nonnegative");
  if (kind == Kind::power_decay && (!std::isfinite(exponent) || exponent < 0.0))
    throw std::invalid_argument("decay exponent must be nonnegative");
}

double schedule_rate(const LearningRateSchedule& s, std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("schedule_rate: k must be >= 1");
  switch (s.kind) {
    case LearningRateSchedule::Kind::constant:
      return s.alpha0;
    case LearningRateSchedule::Kind::power_decay:
      return s.alpha0 / std::pow(static_cast<double>(k), s.exponent);
  }
  return s.alpha0;
}

}  // namespace stdpzo
