#pragma once

#include <Eigen/Dense>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace koopsafe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kPi = 3.141592653589793;
inline constexpr double kSqrt2 = 1.4142135623730951;

// Error hierarchy. Every module throws one of these with a diagnostic
// message; the CLI maps any uncaught error to a nonzero exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct DegenerateLiftingError : Error {
    using Error::Error;
};
struct NumericalBlowupError : Error {
    using Error::Error;
};
struct IllConditionedDataError : Error {
    using Error::Error;
};
struct SolverFailureError : Error {
    using Error::Error;
};
struct InfeasibleError : Error {
    using Error::Error;
};
struct ControllerError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from the KOOPSAFE_LOG environment variable
// (quiet|warn|info|debug); defaults to warn.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("KOOPSAFE_LOG");
        if (!env) return LogLevel::Warn;
        const std::string v(env);
        if (v == "quiet") return LogLevel::Quiet;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_msg(LogLevel at, const std::string& msg) {
    if (log_level() >= at) std::cerr << "[koopsafe] " << msg << "\n";
}

inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }

template <typename... Args>
std::string format_msg(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace koopsafe
