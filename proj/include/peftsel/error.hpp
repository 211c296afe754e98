// Copyright 2026 The peftsel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peftsel {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: malformed config, trace file, or CLI usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// The probe design cannot determine both fit coefficients.
class FitError : public Error {
public:
    using Error::Error;
};

/// A solver's size guard was exceeded (subset count, DP table size).
class GuardError : public Error {
public:
    using Error::Error;
};

/// Two models or traces do not describe the same parameter groups.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

using WarningSink = std::function<void(std::string_view)>;

// Defaults to writing "warning: ..." lines on stderr.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace peftsel
