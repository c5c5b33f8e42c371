#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace linemap {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A construction received inputs that do not define the requested object
// (coincident points, zero direction, line through the origin, ...).
struct DegenerateInput : Error {
    using Error::Error;
};

// Back-projection planes are (near-)parallel: the 3D line is not uniquely
// determined by the two views.
struct DegenerateTriangulation : Error {
    using Error::Error;
};

// Two sampled segments are collinear and span no vanishing point hypothesis.
struct DegenerateHypothesis : Error {
    using Error::Error;
};

// Cluster scatter matrix has an ambiguous null direction.
struct IllConditioned : Error {
    using Error::Error;
};

// Re-projected line is at infinity on the image plane (l1 = l2 = 0).
struct DegenerateLine : Error {
    using Error::Error;
};

// Orthonormal state with w2 = 0 maps to a direction-free Plucker vector.
struct LineAtInfinity : Error {
    using Error::Error;
};

// Projected vanishing point has |v3| below threshold; the residual is undefined.
struct VpAtInfinity : Error {
    using Error::Error;
};

struct TrackTooShort : Error {
    using Error::Error;
};

struct InconsistentIds : Error {
    using Error::Error;
};

struct SingularNormalEquations : Error {
    std::vector<std::string> variable_ids;
    SingularNormalEquations(const std::string& msg, std::vector<std::string> ids)
        : Error(msg), variable_ids(std::move(ids)) {}
};

struct IoError : Error {
    using Error::Error;
};

struct VersionError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct PreconditionError : Error {
    using Error::Error;
};

}  // namespace linemap
