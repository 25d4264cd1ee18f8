#pragma once

#include <stdexcept>
#include <string>

namespace vehid {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// State outside the domain of the model equations (V_x <= 0, non-positive load, ...).
class InvalidState : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// A parameter draw produced a non-physical vehicle; the caller should resample.
class RejectedSample : public Error {
public:
    using Error::Error;
};

class TrainingDivergence : public Error {
public:
    using Error::Error;
};

/// Posterior mass almost entirely outside the prior support.
class LeakageError : public Error {
public:
    using Error::Error;
};

class SimulationFailure : public Error {
public:
    using Error::Error;
};

/// A covariance or information matrix that cannot be inverted or decomposed.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace vehid
