#pragma once

#include <stdexcept>
#include <string>

namespace spme {

/// Base of every error raised by the library. The CLI maps the kind onto
/// its exit-code contract.
class Error : public std::runtime_error {
public:
    enum class Kind { config, resolution, stability, shape, range, budget, integrity, search };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

    /// True for errors caused by invalid user input rather than numerical failure.
    bool is_configuration() const noexcept {
        return kind_ == Kind::config || kind_ == Kind::resolution || kind_ == Kind::shape ||
               kind_ == Kind::range;
    }

private:
    Kind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

/// Mollification window not resolvable on the path grid.
struct ResolutionError : Error {
    explicit ResolutionError(const std::string& what) : Error(Kind::resolution, what) {}
};

/// Requested time step exceeds the monotonicity bound of the explicit scheme.
struct StabilityError : Error {
    explicit StabilityError(const std::string& what) : Error(Kind::stability, what) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(Kind::shape, what) {}
};

struct RangeError : Error {
    explicit RangeError(const std::string& what) : Error(Kind::range, what) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& what) : Error(Kind::integrity, what) {}
};

struct SearchError : Error {
    explicit SearchError(const std::string& what) : Error(Kind::search, what) {}
};

}  // namespace spme
