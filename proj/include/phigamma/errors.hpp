#pragma once

#include <stdexcept>
#include <string>

namespace phig {

// Base class for every failure this library raises on purpose.
// Callers that want to distinguish causes catch the derived types below.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define PHIG_DEFINE_ERROR(Name)        \
  struct Name : Error {                \
    using Error::Error;                \
  };

// Scalar / series arithmetic.
PHIG_DEFINE_ERROR(PrecisionExhausted)        // no certified digits remain
PHIG_DEFINE_ERROR(DivisionByPrecisionZero)   // divisor indistinguishable from 0
PHIG_DEFINE_ERROR(NonInvertiblePole)         // pole part cannot be cleared exactly
PHIG_DEFINE_ERROR(NoSquareRoot)              // operand is not a square
PHIG_DEFINE_ERROR(UnsupportedCase)           // input outside the implemented regime

// Filtered modules.
PHIG_DEFINE_ERROR(WeightMismatch)            // filtration jumps inconsistent with data
PHIG_DEFINE_ERROR(NonSemisimplePhi)          // Frobenius matrix is not diagonalizable
PHIG_DEFINE_ERROR(NotAdmissible)             // classification needs an admissible module

// Lattice-level structures.
PHIG_DEFINE_ERROR(NotFiniteHeightShape)      // det specializes wrongly for psi descent
PHIG_DEFINE_ERROR(NoStabilization)           // iterated image fails to stabilize
PHIG_DEFINE_ERROR(SingularRecursion)         // degree-by-degree solve hit a non-unit
PHIG_DEFINE_ERROR(NoConvergence)             // successive approximation stopped improving

// Distributions and moment data.
PHIG_DEFINE_ERROR(ConditionViolated)         // additivity / compatibility check failed

// Mod-p tables.
PHIG_DEFINE_ERROR(InvalidLabel)              // malformed representation label
PHIG_DEFINE_ERROR(OutOfTableRange)           // weight outside the tabulated strip

// Locally polynomial function calculus.
PHIG_DEFINE_ERROR(GenericityRequired)        // parameters collide (alpha = beta etc.)
PHIG_DEFINE_ERROR(NeedsBothSides)            // pairing requires data on both eigenlines
PHIG_DEFINE_ERROR(UnsupportedElement)        // element outside the closed term family
PHIG_DEFINE_ERROR(UnsupportedInput)          // function outside the exact-formula regime

// Serialization.
PHIG_DEFINE_ERROR(FormatError)               // unparsable textual form

#undef PHIG_DEFINE_ERROR

}  // namespace phig
