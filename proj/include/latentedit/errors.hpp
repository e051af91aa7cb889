// Copyright (C) 2026 latentedit contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace latentedit {

/// Base of every error thrown by the library. The CLI maps subclasses onto
/// exit codes: numerical failures exit with 3, everything else with 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Argument outside the continuous-time domain of a schedule.
class DomainError : public Error {
public:
    using Error::Error;
};

// Zero-length step where a step ratio is required.
class DegenerateGrid : public Error {
public:
    using Error::Error;
};

// A solver step was requested at the first grid node.
class NoPriorStep : public Error {
public:
    using Error::Error;
};

// Target branch asked for an attention entry the source branch never wrote.
class CacheMiss : public Error {
public:
    using Error::Error;
};

class InvalidAlignment : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Latents went non-finite.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

}  // namespace latentedit
