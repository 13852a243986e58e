#pragma once

#include <stdexcept>
#include <string>

namespace tmdp {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An Mdp (or one of its value objects) violates a structural invariant.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Two models do not share states, action lists, or discount factor.
class IncompatibleModels : public Error {
public:
    using Error::Error;
};

/// Planning produced non-finite values or failed to converge.
class PlanningError : public Error {
public:
    using Error::Error;
};

/// An action was requested at a state where it is not available.
class InvalidAction : public Error {
public:
    using Error::Error;
};

/// A parameter lies outside the domain a construction requires. The message
/// names the violated constraint.
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// A modelling assumption (e.g. full column rank of the stacked base kernels)
/// does not hold for the given inputs.
class AssumptionViolation : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace tmdp
