#pragma once

#include <stdexcept>
#include <string>

namespace pvx {

/// Two vortices closer than the collision threshold: the right-hand side is
/// no longer trustworthy and integration must stop.
struct SingularConfigurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Field evaluation requested on (or too close to) the singular set.
struct SingularEvaluationError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Green function evaluated with coincident arguments.
struct DiagonalEvaluationError : std::domain_error {
    DiagonalEvaluationError() : std::domain_error("evaluation on diagonal") {}
};

/// Scenario configuration problem; `field` names the offending key.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_, const std::string& what_)
        : std::runtime_error("config error at '" + field_ + "': " + what_),
          field(std::move(field_)) {}
};

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pvx
