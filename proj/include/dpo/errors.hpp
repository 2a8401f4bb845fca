#pragma once

#include <stdexcept>
#include <string>

namespace dpo {

/// Shapes of two objects do not agree (policy vs. mdp, table vs. structure, ...).
class StructuralError : public std::invalid_argument {
public:
    explicit StructuralError(const std::string& what) : std::invalid_argument(what) {}
};

/// A value violates an operation's precondition.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Configuration problems; the message carries the location in the document.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dpo
