#pragma once

#include <stdexcept>
#include <string>

namespace twosample {

enum class errc {
  non_finite_value,
  value_outside_support,
  invalid_measure,
  mixed_kind_unsupported,
  degenerate_density,
  base_mismatch,
  quotient_by_zero,
  degenerate_gradient,
  degenerate_tangent,
  orthogonal_tangent,
  not_step_tangent,
  too_few_observations,
  tied_observations,
  domain_error,
  config_error,
};

inline const char* errc_name(errc e) {
  switch (e) {
    case errc::non_finite_value: return "NonFiniteFunctionValue";
    case errc::value_outside_support: return "ValueOutsideSupport";
    case errc::invalid_measure: return "InvalidMeasure";
    case errc::mixed_kind_unsupported: return "MixedKindUnsupported";
    case errc::degenerate_density: return "DegenerateDensity";
    case errc::base_mismatch: return "BaseMismatch";
    case errc::quotient_by_zero: return "QuotientByZero";
    case errc::degenerate_gradient: return "DegenerateGradient";
    case errc::degenerate_tangent: return "DegenerateTangent";
    case errc::orthogonal_tangent: return "OrthogonalTangent";
    case errc::not_step_tangent: return "NotStepTangent";
    case errc::too_few_observations: return "TooFewObservations";
    case errc::tied_observations: return "TiedObservations";
    case errc::domain_error: return "DomainError";
    case errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

class stats_error : public std::runtime_error {
 public:
  stats_error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), detail_(what) {}
  errc code() const noexcept { return code_; }
  // message without the error-name prefix
  const std::string& detail() const noexcept { return detail_; }

 private:
  errc code_;
  std::string detail_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw stats_error(code, what); }

}  // namespace twosample
