#pragma once

#include <stdexcept>
#include <string>

namespace fmmds
{

//! A fixed-size resource (bit width, memory budget, integer range) would be exceeded.
class CapacityError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

//! An argument violates the operation's precondition.
class DomainError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

//! The requested node/unit count cannot be served by the available boxes.
class InfeasiblePartitionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

//! The data manager received an import request that no node exports.
class RoutingError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

//! Malformed or truncated binary container.
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace fmmds
