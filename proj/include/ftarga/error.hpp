#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ftarga {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatch, out-of-domain state, bad config value.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite gradient, loss or parameter.
class DivergenceError : public Error {
public:
    DivergenceError(std::uint64_t iteration, const std::string& what)
        : Error("diverged at iteration " + std::to_string(iteration) + ": " + what),
          iteration_(iteration) {}

    [[nodiscard]] std::uint64_t iteration() const noexcept { return iteration_; }

private:
    std::uint64_t iteration_;
};

/// A simulated path exceeded its step cap without reaching its stopping set.
class NonReturnError : public Error {
public:
    NonReturnError(std::uint64_t step_cap, const std::string& what)
        : Error(what + " (step cap " + std::to_string(step_cap) + " exceeded)"),
          step_cap_(step_cap) {}

    [[nodiscard]] std::uint64_t step_cap() const noexcept { return step_cap_; }

private:
    std::uint64_t step_cap_;
};

/// A rejection sampler ran out of attempts.
class SamplerError : public Error {
public:
    using Error::Error;
};

}  // namespace ftarga
