#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace casebias {

enum class ErrorKind {
    InvalidArgument,  // precondition on an input value violated
    Degenerate,       // sample or design with an undefined statistic
    Infeasible,       // scenario has no solution in the admissible range
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorKind::InvalidArgument, msg);
}

inline void require_open_unit(double x, const char* name) {
    require(std::isfinite(x) && x > 0.0 && x < 1.0,
            std::string(name) + " must lie in (0,1), got " + std::to_string(x));
}

inline void require_closed_unit(double x, const char* name) {
    require(std::isfinite(x) && x >= 0.0 && x <= 1.0,
            std::string(name) + " must lie in [0,1], got " + std::to_string(x));
}

}  // namespace detail
}  // namespace casebias
