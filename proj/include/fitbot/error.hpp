#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fitbot {

// Every failure raised by the library derives from fitbot::Error so callers
// can catch the whole family at a module boundary (the CLI does this).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidState : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Wire codec failures.
class FormatError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class TooLarge : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

/// Raised by training when the loss stops being finite.
class Diverged : public Error {
public:
    Diverged(std::size_t step, double loss)
        : Error("training diverged at step " + std::to_string(step) + " (loss " +
                std::to_string(loss) + ")"),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace fitbot
