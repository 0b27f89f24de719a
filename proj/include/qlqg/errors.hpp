#pragma once

#include <stdexcept>
#include <string>

namespace qlqg {

/// Base class for numerical failures raised by the filter, controller and oracles.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Innovation variance is not positive: no usable output channel.
class SingularInnovation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A Gaussian kernel is narrower than the phase grid can resolve.
class GridUnderresolved : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// The measured value has (numerically) zero likelihood under the prediction.
class ZeroEvidence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Test states leak too much probability past the Fock truncation.
class TruncationDominated : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A model or configuration violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace qlqg
