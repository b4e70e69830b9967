#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "rfcov/rng.hpp"

namespace rfcov {

enum class OutcomeKind { Continuous, Binary };

std::string_view to_string(OutcomeKind kind) noexcept;
/// Parses "continuous" / "binary"; throws ConfigError otherwise.
OutcomeKind parse_outcome_kind(std::string_view text);

/// Conditional law of Y given the fixed training rows. Continuous rows are
/// N(location, scale^2); binary rows are Bernoulli(location) and ignore scale.
/// Both the data-generating truth and the fitted synthetic law use this form.
struct OutcomeLaw {
  OutcomeKind kind = OutcomeKind::Continuous;
  std::vector<double> location;
  std::vector<double> scale;

  std::size_t size() const noexcept { return location.size(); }
  /// Var(Y_i | X_i) under the law.
  double variance(std::size_t i) const noexcept;
};

/// One independent outcome vector from the law.
std::vector<double> draw_outcomes(const OutcomeLaw& law, Rng& rng);

/// Validates that y is a 0/1 vector; throws DataError naming the first bad row.
void require_binary(const std::vector<double>& y);

}  // namespace rfcov
