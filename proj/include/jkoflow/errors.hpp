#pragma once

#include <stdexcept>
#include <string>

namespace jkoflow {

enum class Err {
    NegativeDensity,
    ZeroMass,
    MassMismatch,
    InvalidStep,
    GridMismatch,
    OracleTooLarge,
    NonpositiveSource,
    BadParameter,
    NoConvergence,
    InversionFailure,
    InitialConditionViolated,
    Infeasible,
    NotConverged,
    WrongPenalization,
    TooShort,
    OutOfRange,
    NoFit,
    PreconditionViolated,
    AssumptionViolated,
    MissingArtifact,
    ConfigError,
};

inline const char* err_name(Err e) {
    switch (e) {
        case Err::NegativeDensity: return "NegativeDensity";
        case Err::ZeroMass: return "ZeroMass";
        case Err::MassMismatch: return "MassMismatch";
        case Err::InvalidStep: return "InvalidStep";
        case Err::GridMismatch: return "GridMismatch";
        case Err::OracleTooLarge: return "OracleTooLarge";
        case Err::NonpositiveSource: return "NonpositiveSource";
        case Err::BadParameter: return "BadParameter";
        case Err::NoConvergence: return "NoConvergence";
        case Err::InversionFailure: return "InversionFailure";
        case Err::InitialConditionViolated: return "InitialConditionViolated";
        case Err::Infeasible: return "Infeasible";
        case Err::NotConverged: return "NotConverged";
        case Err::WrongPenalization: return "WrongPenalization";
        case Err::TooShort: return "TooShort";
        case Err::OutOfRange: return "OutOfRange";
        case Err::NoFit: return "NoFit";
        case Err::PreconditionViolated: return "PreconditionViolated";
        case Err::AssumptionViolated: return "AssumptionViolated";
        case Err::MissingArtifact: return "MissingArtifact";
        case Err::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
  public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
    Err code() const { return code_; }

  private:
    Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Err code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace jkoflow
