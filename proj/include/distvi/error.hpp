#pragma once

#include <stdexcept>
#include <string>

namespace distvi {

/// Input text could not be parsed. Messages carry the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a model invariant (probability sums,
/// partition cover, schedule connectivity, ...).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace distvi
