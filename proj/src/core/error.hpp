#pragma once

#include <stdexcept>
#include <string>

namespace dmrm {

// Single exception type for all contract violations and IO failures in the
// core. The C API boundary translates these into error codes plus a message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

}  // namespace dmrm
