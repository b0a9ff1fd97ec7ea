#pragma once

#include <stdexcept>
#include <string>

namespace ctmp {

// Configuration / construction problems. Raised eagerly, never during the
// query hot path.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Evaluation outside a trajectory's time domain.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Derivative of a degree-0 spline.
struct DegreeError : std::runtime_error {
  explicit DegreeError(const std::string& what) : std::runtime_error(what) {}
};

// Knot/control-point count mismatch.
struct ArityError : std::runtime_error {
  explicit ArityError(const std::string& what) : std::runtime_error(what) {}
};

// Goal-pose sampling on a tunnel the feasibility filter rejected.
struct InfeasibleTunnel : std::runtime_error {
  explicit InfeasibleTunnel(const std::string& what) : std::runtime_error(what) {}
};

// Trajectory optimization asked to start or end in an invalid state.
struct InfeasibleBoundary : std::runtime_error {
  explicit InfeasibleBoundary(const std::string& what) : std::runtime_error(what) {}
};

// Warm-start pieces that do not share a junction state.
struct MismatchedJunction : std::runtime_error {
  explicit MismatchedJunction(const std::string& what) : std::runtime_error(what) {}
};

// Singular normal matrix in the ballistic least-squares fit.
struct DegenerateSystem : std::runtime_error {
  explicit DegenerateSystem(const std::string& what) : std::runtime_error(what) {}
};

// Projectile sampler could not produce a dome-crossing parabola.
struct SamplingExhausted : std::runtime_error {
  explicit SamplingExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Database persistence failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct VersionMismatch : std::runtime_error {
  explicit VersionMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Loaded database was built from a different configuration.
struct FingerprintMismatch : std::runtime_error {
  explicit FingerprintMismatch(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ctmp
