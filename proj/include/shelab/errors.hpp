#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shelab {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input or configuration detected before (or instead of) running numerics.
class InputError : public Error {
public:
    using Error::Error;
};

/// A computation started but could not be completed to the required accuracy.
class NumericalAbort : public Error {
public:
    using Error::Error;
};

#define SHELAB_DECLARE_ERROR(Name, Base)      \
    class Name : public Base {                \
    public:                                   \
        using Base::Base;                     \
    }

// lattice
SHELAB_DECLARE_ERROR(StabilityViolation, InputError);
SHELAB_DECLARE_ERROR(GeometryError, InputError);
SHELAB_DECLARE_ERROR(EmptyInput, InputError);
SHELAB_DECLARE_ERROR(LatticeMismatch, InputError);

// noise
SHELAB_DECLARE_ERROR(TimeOutOfRange, InputError);
SHELAB_DECLARE_ERROR(OutOfDomain, InputError);

// kernel
SHELAB_DECLARE_ERROR(NonPositiveTime, InputError);
SHELAB_DECLARE_ERROR(InvalidTimes, InputError);
SHELAB_DECLARE_ERROR(EmptySweep, InputError);

// coefficients
SHELAB_DECLARE_ERROR(ParameterOutOfRegime, InputError);
SHELAB_DECLARE_ERROR(QuadratureFailure, NumericalAbort);

// solver
SHELAB_DECLARE_ERROR(InitialOrderViolation, InputError);
SHELAB_DECLARE_ERROR(SupportViolation, InputError);

// girsanov
SHELAB_DECLARE_ERROR(NonMonotoneAccumulator, InputError);
SHELAB_DECLARE_ERROR(InsufficientEnsemble, InputError);

// cli
SHELAB_DECLARE_ERROR(ConfigError, InputError);

#undef SHELAB_DECLARE_ERROR

/// A field entry is NaN or infinite.
class NonFiniteField : public InputError {
public:
    NonFiniteField(const std::string& what, std::size_t index)
        : InputError(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// The solution left the admissible range (sup|u| above the clamp or non-finite).
class BlowUp : public NumericalAbort {
public:
    BlowUp(const std::string& what, std::size_t time_index)
        : NumericalAbort(what), time_index_(time_index) {}
    std::size_t time_index() const noexcept { return time_index_; }

private:
    std::size_t time_index_;
};

/// Drift does not factor through the noise coefficient: sigma vanishes where b does not.
class AssumptionAViolation : public InputError {
public:
    AssumptionAViolation(const std::string& what, double t, double x, double u, double drift)
        : InputError(what), t_(t), x_(x), u_(u), drift_(drift) {}
    double t() const noexcept { return t_; }
    double x() const noexcept { return x_; }
    double u() const noexcept { return u_; }
    double drift() const noexcept { return drift_; }

private:
    double t_, x_, u_, drift_;
};

/// Path increments carry no roughness signal (zero spread, or a smooth slope near 1).
class DegenerateTrajectory : public InputError {
public:
    DegenerateTrajectory(const std::string& what, double slope)
        : InputError(what), slope_(slope) {}
    /// Fitted slope when one could be computed, NaN otherwise.
    double slope() const noexcept { return slope_; }

private:
    double slope_;
};

}  // namespace shelab
