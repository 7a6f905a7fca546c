#pragma once

#include <stdexcept>
#include <string>

namespace fdrmix {

/// Bad argument values: non-finite inputs, out-of-range parameters.
class invalid_input_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Sample has too few effective support points for the requested fit.
class degenerate_sample_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for solvers that hit their iteration cap. Concrete subclasses
/// carry the best iterate found.
class non_convergence_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// EM responsibilities collapsed entirely onto one component.
class posterior_collapse_error : public std::runtime_error {
public:
    enum class Side { null_side, alternative_side };

    posterior_collapse_error(Side side, const std::string& msg)
        : std::runtime_error(msg), side_(side) {}

    Side side() const { return side_; }

private:
    Side side_;
};

/// A metric whose restricted index set came out empty.
class undefined_metric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too many per-run failures inside a Monte Carlo benchmark.
class benchmark_integrity_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text input that failed to parse; carries the 1-based line number.
class parse_error : public std::runtime_error {
public:
    parse_error(std::size_t line, const std::string& msg)
        : std::runtime_error(msg), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Filesystem-level failure (open/read/write).
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model dimension does not match the data it is applied to.
class dimension_mismatch_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fdrmix
