#pragma once

#include <stdexcept>
#include <string>

namespace mixscribe {

// Bad data fed to an operation (shape mismatch, negative entries,
// signal shorter than one window, ...).
class InvalidInput : public std::runtime_error {
public:
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration (hop larger than window, empty pass schedule, ...).
class InvalidParams : public std::runtime_error {
public:
    explicit InvalidParams(const std::string& msg) : std::runtime_error(msg) {}
};

// The optimizer produced a non-finite value.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// File reading/writing problems, including unsupported WAV encodings.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mixscribe
