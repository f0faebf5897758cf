#pragma once

#include <stdexcept>
#include <string>

namespace quench {

// Bad arguments or malformed input. The CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// A guarded computation declined to run (enumeration or cost cap exceeded).
// The CLI maps this to exit code 2. The message names the offending cluster
// or bond so the caller knows what to raise.
struct Refusal : std::runtime_error {
    explicit Refusal(const std::string& what) : std::runtime_error(what) {}
};

} // namespace quench
