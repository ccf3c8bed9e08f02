#pragma once

#include <stdexcept>
#include <string>

namespace bevfuse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct BehindCamera : Error { using Error::Error; };
struct SingularCalibration : Error { using Error::Error; };
struct OutOfMap : Error { using Error::Error; };

// tensors / model
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidStride : Error { using Error::Error; };
struct NonScalarLoss : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

// fusion
struct MissingCalibration : Error { using Error::Error; };
struct EmptyKeySequence : Error { using Error::Error; };
struct ScaleMismatch : Error { using Error::Error; };
struct EmptyProbe : Error { using Error::Error; };

// data / io
struct CorruptContainer : Error { using Error::Error; };
struct MissingManifest : Error { using Error::Error; };
struct InfeasibleSpec : Error { using Error::Error; };
struct DatasetError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace bevfuse
