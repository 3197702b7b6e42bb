#pragma once

#include <stdexcept>
#include <string>

namespace neid {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Image I/O.
struct MissingFile : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Geometry / argument validation.
struct InvalidSize : Error { using Error::Error; };
struct InvalidCode : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct TooSmall : Error { using Error::Error; };
struct BadChannelCount : Error { using Error::Error; };

// Dataset scanning.
struct MissingPair : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// Losses / optimization.
struct MissingDrOutput : Error { using Error::Error; };
struct KeyMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// Checkpointing.
struct CorruptCheckpoint : Error { using Error::Error; };
struct FingerprintMismatch : Error { using Error::Error; };

}  // namespace neid
