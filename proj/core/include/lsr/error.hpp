// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lsr {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes; the message names the offending axis.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A caller broke a documented precondition (e.g. non-scalar loss).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A branch graph or convolution cannot be folded into a single kernel.
class FusionError : public Error {
public:
    using Error::Error;
};

/// Invalid model or pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Image or dataset problems (unreadable file, image smaller than a patch).
class DataError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

class CheckpointHeaderError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointShapeError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

}  // namespace lsr
