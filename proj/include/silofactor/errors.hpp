#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace silofactor {

// Base class for all library errors.  `kind()` is the stable category name
// used in machine-readable error output; `exit_code()` is the process exit
// code the CLI maps the error to:
//   2 = input / spec problems, 3 = unsupported scenario,
//   4 = shape or metadata violations, 5 = numeric divergence.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message, int exit_code)
        : std::runtime_error(message), kind_(std::move(kind)), exit_code_(exit_code) {}

    const std::string& kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string kind_;
    int exit_code_;
};

// Matrix dimensions do not line up for the requested operation.
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("ShapeError", m, 4) {}
};

// A mapping/indicator/redundancy structure violates its invariants.
struct InvalidMetadata : Error {
    explicit InvalidMetadata(const std::string& m) : Error("InvalidMetadata", m, 4) {}
};

// A row matching references rows or sources it may not.
struct InvalidMatching : Error {
    explicit InvalidMatching(const std::string& m) : Error("InvalidMatching", m, 4) {}
};

// The two-source disjoint-column fast path was asked to run on inputs that
// do not partition the target columns contiguously.
struct NotDisjoint : Error {
    explicit NotDisjoint(const std::string& m) : Error("NotDisjoint", m, 4) {}
};

// Rule text could not be parsed.  Position is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& m, std::size_t line, std::size_t column)
        : Error("ParseError",
                m + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")",
                2),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// A rule mentions a relation that was never declared.
struct UnknownRelation : Error {
    explicit UnknownRelation(const std::string& m) : Error("UnknownRelation", m, 2) {}
};

// The rules map one source column to two target columns or vice versa.
struct InconsistentMapping : Error {
    explicit InconsistentMapping(const std::string& m) : Error("InconsistentMapping", m, 2) {}
};

// Raw table data could not be turned into a numeric matrix.
struct IngestError : Error {
    explicit IngestError(const std::string& m) : Error("IngestError", m, 2) {}
};

// Problems with a spec file itself (missing file, bad JSON, schema violation).
struct SpecError : Error {
    explicit SpecError(const std::string& m) : Error("SpecError", m, 2) {}
};

// The tgd set does not describe one of the supported integration shapes.
struct UnsupportedScenario : Error {
    explicit UnsupportedScenario(const std::string& m) : Error("UnsupportedScenario", m, 3) {}
};

// Training produced a non-finite loss or weight.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& m) : Error("DivergenceError", m, 5) {}
};

}  // namespace silofactor
