#ifndef UAPLAB_ERRORS_HPP
#define UAPLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uaplab {

// Base for all library errors so callers can catch uaplab failures in one place.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidConfig : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct ZeroRow : Error {
  using Error::Error;
};
struct DegenerateSeries : Error {
  using Error::Error;
};
struct UnsupportedFormat : Error {
  using Error::Error;
};
struct ClipTooLong : Error {
  using Error::Error;
};
struct ClassTooSmall : Error {
  using Error::Error;
};
struct InvalidArch : Error {
  using Error::Error;
};
struct AlreadyFooled : Error {
  using Error::Error;
};
struct EmptyEvaluationSet : Error {
  using Error::Error;
};
struct EmptyAfterExclusion : Error {
  using Error::Error;
};
struct ThresholdTooLow : Error {
  using Error::Error;
};
struct ZeroVariance : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace uaplab

#endif  // UAPLAB_ERRORS_HPP
