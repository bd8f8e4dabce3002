#pragma once

#include <stdexcept>
#include <string>

namespace ibuvs {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A scene point lies on or behind the camera plane (z <= 0). The caller
// must treat the corresponding feature as lost.
struct NonPositiveDepth : Error {
    explicit NonPositiveDepth(const std::string& what) : Error(what) {}
};

// The correspondence set cannot determine a unique projective map
// (too few pairs, collinear or coincident points).
struct DegenerateConfiguration : Error {
    explicit DegenerateConfiguration(const std::string& what) : Error(what) {}
};

// A matrix expected to be similar to a rotation has eigenvalue moduli
// off the unit circle; usually bad vanishing-point data.
struct NotRotationSimilar : Error {
    explicit NotRotationSimilar(const std::string& what) : Error(what) {}
};

struct SingularMatrix : Error {
    explicit SingularMatrix(const std::string& what) : Error(what) {}
};

// Rotation angle too close to a half turn: the complex eigenvector pair
// is ill-conditioned. Recover by chaining two half-angle plans.
struct NearHalfTurn : Error {
    explicit NearHalfTurn(const std::string& what) : Error(what) {}
};

// A homogeneous w-component vanished; a planned or transferred point
// went to infinity.
struct NumericalBlowup : Error {
    explicit NumericalBlowup(const std::string& what) : Error(what) {}
};

struct InvalidDepthRatio : Error {
    explicit InvalidDepthRatio(const std::string& what) : Error(what) {}
};

// The probe system cannot observe the hand-eye term beyond the expected
// one-dimensional null direction along the probe rotation axis image.
struct RankDeficient : Error {
    explicit RankDeficient(const std::string& what) : Error(what) {}
};

// Fewer than six linearly independent excitation twists.
struct InsufficientExcitation : Error {
    explicit InsufficientExcitation(const std::string& what) : Error(what) {}
};

// Command step below the update deadband; the rank-one update was skipped.
struct Deadband : Error {
    explicit Deadband(const std::string& what) : Error(what) {}
};

}  // namespace ibuvs
