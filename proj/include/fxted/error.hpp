#pragma once

#include <stdexcept>
#include <string>

namespace fxted {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Every generator ended up pinned at a limit, so there is no free set to carry lambda.
class AllSaturatedError : public Error {
public:
    using Error::Error;
};

class NotConvergedError : public Error {
public:
    using Error::Error;
};

class MaxIterationsError : public Error {
public:
    using Error::Error;
};

class DisconnectedTopologyError : public Error {
public:
    using Error::Error;
};

class NonSymmetricError : public Error {
public:
    using Error::Error;
};

/// A case or scenario file the caller asked for is not on disk.
class MissingDataError : public Error {
public:
    using Error::Error;
};

} // namespace fxted
