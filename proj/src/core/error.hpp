#pragma once

#include <stdexcept>
#include <string>

namespace mvb {

// Failure categories. The C API and the CLI map these 1:1 onto exit codes,
// so keep the numbering stable.
enum class ErrorKind {
    param = 1,    // bad argument to an operation
    config = 2,   // bad configuration file / key / value
    data = 3,     // missing or inconsistent on-disk artifact
    numeric = 4,  // NaN/Inf detected, training aborted
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_param(const std::string& msg) { throw Error(ErrorKind::param, msg); }
[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

}  // namespace mvb
