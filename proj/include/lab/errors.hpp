#pragma once

#include <stdexcept>
#include <string>

namespace lab {

// Malformed configuration or schema violation (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// A size or time ceiling was hit (CLI exit code 3).
class CeilingError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// A gated implication failed on a realization (CLI exit code 1).
class AssertionFailure : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// Operation called outside its preconditions.
class PreconditionError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

} // namespace lab
