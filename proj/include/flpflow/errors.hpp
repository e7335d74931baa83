#pragma once

#include <stdexcept>
#include <string>

namespace flpflow {

/// Base of every error raised by the library.
class FlpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define FLPFLOW_DEFINE_ERROR(Name)                 \
    class Name : public FlpError {                 \
    public:                                        \
        using FlpError::FlpError;                  \
    }

// instance validation
FLPFLOW_DEFINE_ERROR(WeightSumError);
FLPFLOW_DEFINE_ERROR(BoundOrderError);
FLPFLOW_DEFINE_ERROR(CapacityInfeasible);
FLPFLOW_DEFINE_ERROR(ShapeError);

// evaluation
FLPFLOW_DEFINE_ERROR(IndexOutOfRange);
FLPFLOW_DEFINE_ERROR(DomainError);
FLPFLOW_DEFINE_ERROR(ZeroMassColumn);

// flow / annealing
FLPFLOW_DEFINE_ERROR(InfeasibleStart);
FLPFLOW_DEFINE_ERROR(QpFailure);
FLPFLOW_DEFINE_ERROR(RepairFailed);
FLPFLOW_DEFINE_ERROR(NoFeasibleFacility);

// oracle
FLPFLOW_DEFINE_ERROR(TooLarge);
FLPFLOW_DEFINE_ERROR(StepTooLarge);

// generator / cli
FLPFLOW_DEFINE_ERROR(SpecError);
FLPFLOW_DEFINE_ERROR(ConfigError);

#undef FLPFLOW_DEFINE_ERROR

}  // namespace flpflow
