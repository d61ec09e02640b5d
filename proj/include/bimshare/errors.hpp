#pragma once

#include <stdexcept>
#include <string>

namespace bimshare {

// Base for all library failures; every throw carries a human-readable reason.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Schema-file or SPF/MVD text could not be read. Carries 1-based position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column = 0)
        : Error(what + " at line " + std::to_string(line) +
                (column > 0 ? ", column " + std::to_string(column) : std::string())),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Structurally well-formed input violating a semantic invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Ownership clash, stale version, or concurrent removal.
class ConflictError : public Error {
public:
    using Error::Error;
};

class AuthError : public Error {
public:
    using Error::Error;
};

// Wire framing / message shape problems.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& code, const std::string& what)
        : Error(code + ": " + what), code_(code) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

} // namespace bimshare
