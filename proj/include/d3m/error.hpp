#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace d3m {

class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::int64_t line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::int64_t line() const { return line_; }

private:
    std::int64_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A domain's interior block has no admissible pivot.
class SingularDomainError : public std::runtime_error {
public:
    SingularDomainError(int domain, int pivot)
        : std::runtime_error("singular interior matrix in domain " + std::to_string(domain) +
                             " at pivot " + std::to_string(pivot)),
          domain_(domain),
          pivot_(pivot) {}
    int domain() const { return domain_; }
    int pivot() const { return pivot_; }

private:
    int domain_;
    int pivot_;
};

/// A diagonal block of the reduced matrix has no admissible pivot.
class SingularBlockError : public std::runtime_error {
public:
    SingularBlockError(int block, int pivot)
        : std::runtime_error("singular diagonal block " + std::to_string(block) + " at pivot " +
                             std::to_string(pivot)),
          block_(block),
          pivot_(pivot) {}
    int block() const { return block_; }
    int pivot() const { return pivot_; }

private:
    int block_;
    int pivot_;
};

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchedulingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotCalibratedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace d3m
