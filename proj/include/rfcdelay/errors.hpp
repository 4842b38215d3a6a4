#pragma once

#include <stdexcept>
#include <string>

namespace rfcdelay {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RFCDELAY_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

// lyapunov
RFCDELAY_DEFINE_ERROR(NotHurwitz);
RFCDELAY_DEFINE_ERROR(SingularSystem);
RFCDELAY_DEFINE_ERROR(NoFeasibleLambda);

// signals
RFCDELAY_DEFINE_ERROR(OutOfDomain);
RFCDELAY_DEFINE_ERROR(DwellTooSmall);
RFCDELAY_DEFINE_ERROR(InvalidSignal);

// integrator
RFCDELAY_DEFINE_ERROR(BadHistoryDomain);
RFCDELAY_DEFINE_ERROR(SpanTooShort);
RFCDELAY_DEFINE_ERROR(InvalidSystem);
RFCDELAY_DEFINE_ERROR(StepUnderflow);
RFCDELAY_DEFINE_ERROR(TooManySteps);

// embeddings
RFCDELAY_DEFINE_ERROR(WindowOverlap);

// probes
RFCDELAY_DEFINE_ERROR(HorizonTooShort);
RFCDELAY_DEFINE_ERROR(UnexpectedEscape);
RFCDELAY_DEFINE_ERROR(WindowInvalid);

// cli
RFCDELAY_DEFINE_ERROR(ConfigInvalid);

#undef RFCDELAY_DEFINE_ERROR

}  // namespace rfcdelay
