#pragma once

#include <stdexcept>
#include <string>

namespace adogs {

// Geometry failures.
struct DegeneratePointSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DuplicatePoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSimplex : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutsideHull : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grid / domain failures.
struct OutOfBounds : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear algebra and iteration failures.
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Objective sampling failures.
struct SamplerFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// A trajectory or accumulator went NaN/Inf mid-sample.
struct NonFiniteState : SamplerFailure {
  using SamplerFailure::SamplerFailure;
};

// Driver-level failure (invalid configuration, impossible state).
struct OptimizationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace adogs
