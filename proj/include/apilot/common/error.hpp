#pragma once

#include <stdexcept>
#include <string>

namespace apilot {

/// Root of every exception thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define APILOT_DEFINE_ERROR(Name)            \
    class Name : public Error {              \
    public:                                  \
        using Error::Error;                  \
    }

// catalog
APILOT_DEFINE_ERROR(MalformedVersion);
APILOT_DEFINE_ERROR(MalformedDate);
APILOT_DEFINE_ERROR(InvalidIdentifier);
APILOT_DEFINE_ERROR(InvariantViolation);
APILOT_DEFINE_ERROR(SchemaMismatch);
APILOT_DEFINE_ERROR(CorruptRecord);
APILOT_DEFINE_ERROR(WrongKind);
// miner
APILOT_DEFINE_ERROR(EmptyHistory);
APILOT_DEFINE_ERROR(RepositoryError);
// advisories
APILOT_DEFINE_ERROR(UnsupportedEcosystem);
APILOT_DEFINE_ERROR(MalformedAdvisory);
// sanitizer
APILOT_DEFINE_ERROR(ExtractionFailed);
// guardrail
APILOT_DEFINE_ERROR(ClientFailure);
// evalharness
APILOT_DEFINE_ERROR(UndefinedReduction);
APILOT_DEFINE_ERROR(ConfigError);

#undef APILOT_DEFINE_ERROR

}  // namespace apilot
