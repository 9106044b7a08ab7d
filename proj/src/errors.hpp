#pragma once

#include <stdexcept>
#include <string>

namespace ixrisk {

// Mirrors the exit-code contract of the CLI and the C API status codes.
enum class Status : int {
    ok = 0,
    invalid_input = 2,
    numeric_failure = 3,
    non_convergence = 4,
    io_failure = 5,
};

class Error : public std::runtime_error {
public:
    Error(Status status, std::string message)
        : std::runtime_error(std::move(message)), status_(status) {}

    Status status() const noexcept { return status_; }

private:
    Status status_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) {
    throw Error(Status::invalid_input, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
    throw Error(Status::numeric_failure, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
    throw Error(Status::io_failure, msg);
}

} // namespace ixrisk
