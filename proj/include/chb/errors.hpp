#pragma once

#include <stdexcept>
#include <string>

namespace chb {

/// Base of every error thrown by the library. `kind()` is the stable,
/// machine-readable name used in run status files.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    [[nodiscard]] virtual const char* kind() const noexcept { return "Error"; }
};

#define CHB_DEFINE_ERROR(Name)                                                   \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(what) {}                  \
        [[nodiscard]] const char* kind() const noexcept override { return #Name; } \
    };

CHB_DEFINE_ERROR(DomainError)     // argument outside the potential's open domain
CHB_DEFINE_ERROR(ConfigError)     // invalid configuration or parameters
CHB_DEFINE_ERROR(GridMismatch)    // fields living on different grids
CHB_DEFINE_ERROR(AssumptionError) // a structural assumption on J, m, F is violated
CHB_DEFINE_ERROR(GuardBandError)  // iterate came within the guard band of a pure phase
CHB_DEFINE_ERROR(SolverError)     // an iterative solver did not converge
CHB_DEFINE_ERROR(AbortRun)        // time step fell to its floor
CHB_DEFINE_ERROR(WindowError)     // trajectory does not cover a requested window
CHB_DEFINE_ERROR(CoverageError)   // snapshot cadence/coverage insufficient
CHB_DEFINE_ERROR(IoError)         // file emission or parsing failure

#undef CHB_DEFINE_ERROR

} // namespace chb
