#pragma once

#include <stdexcept>
#include <string>

namespace forge {

/// Root of every error the pipeline raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed JSON or otherwise unreadable structured text.
class SyntaxError : public Error {
public:
    using Error::Error;
};

/// A document that parses but breaks the metamodel: bad field, dangling
/// reference, duplicate id, port type mismatch.
class SchemaError : public Error {
public:
    SchemaError(std::string path, std::string message)
        : Error(path + ": " + message), path_(std::move(path)), message_(std::move(message)) {}

    const std::string& path() const noexcept { return path_; }
    const std::string& detail() const noexcept { return message_; }

private:
    std::string path_;
    std::string message_;
};

/// Allocation not total over the expanded instances, or naming extras.
class CoverageError : public Error {
public:
    using Error::Error;
};

class UnknownNodeError : public Error {
public:
    using Error::Error;
};

class TotalityError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class EmptyFrontError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class MissingAllocationError : public Error {
public:
    using Error::Error;
};

class UnknownFlowError : public Error {
public:
    using Error::Error;
};

class ConsistencyError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace forge
