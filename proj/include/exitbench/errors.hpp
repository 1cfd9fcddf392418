#pragma once

#include <stdexcept>
#include <string>

namespace exitbench {

// Base class for every error raised by the engine.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable, missing, or malformed input artifacts. Maps to CLI exit code 2.
struct InputError : Error {
    using Error::Error;
};

}  // namespace exitbench
