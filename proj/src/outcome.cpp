#include "rfcov/outcome.hpp"

#include <random>
#include <string>

#include "rfcov/error.hpp"

namespace rfcov {

std::string_view to_string(OutcomeKind kind) noexcept {
  return kind == OutcomeKind::Binary ? "binary" : "continuous";
}

OutcomeKind parse_outcome_kind(std::string_view text) {
  if (text == "continuous") return OutcomeKind::Continuous;
  if (text == "binary") return OutcomeKind::Binary;
  throw ConfigError("unknown outcome kind '" + std::string(text) +
                    "' (expected continuous or binary)");
}

double OutcomeLaw::variance(std::size_t i) const noexcept {
  if (kind == OutcomeKind::Binary) return location[i] * (1.0 - location[i]);
  return scale[i] * scale[i];
}

std::vector<double> draw_outcomes(const OutcomeLaw& law, Rng& rng) {
  std::vector<double> y(law.size());
  if (law.kind == OutcomeKind::Binary) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.bernoulli(law.location[i]) ? 1.0 : 0.0;
    return y;
  }
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = law.location[i] + law.scale[i] * z(rng);
  return y;
}

void require_binary(const std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw DataError("binary outcome expected: row " + std::to_string(i + 1) + " has y = " +
                      std::to_string(y[i]));
    }
  }
}

}  // namespace rfcov
