#pragma once

#include <stdexcept>
#include <string>

namespace constrank {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateOperator : Error { using Error::Error; };
struct RankMismatch : Error { using Error::Error; };
struct NotConstantRank : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NotAFree : Error { using Error::Error; };
struct RadiusTooSmall : Error { using Error::Error; };
struct Diverged : Error { using Error::Error; };
struct IllConditioned : Error { using Error::Error; };
struct HypothesisViolated : Error { using Error::Error; };
struct NotExtremal : Error { using Error::Error; };
struct NotInImage : Error { using Error::Error; };
struct KernelBasisDeficient : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace constrank
