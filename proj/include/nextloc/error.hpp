// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nextloc {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration (bad flags, missing API key, missing exemplars).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data could not be read or contained no usable rows.
class DataError : public Error {
public:
    using Error::Error;
};

/// A point fell outside the bounding box of a grid.
class OutOfBoundsError : public Error {
public:
    using Error::Error;
};

/// The remote endpoint rejected our credentials; never retried.
class AuthError : public Error {
public:
    using Error::Error;
};

}  // namespace nextloc
