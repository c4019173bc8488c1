#pragma once

#include <stdexcept>
#include <string>

namespace usrd {

// Error codes mirror the failure modes of the public operations. The CLI
// maps them onto process exit codes; library users catch usrd::Error.
enum class Errc {
  ZeroMassSymbol,
  NegativeDistortion,
  EmptyRecoverySet,
  InconsistentAlphabet,
  PmfNotNormalized,
  DimensionMismatch,
  InfeasibleDelta,
  Infeasible,
  DeltaOutOfRange,
  NoFeasibleSet,
  TooLarge,
  TooManySamplers,
  UnknownTau,
  SignalingImpossible,
  BadConfig,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ZeroMassSymbol: return "ZeroMassSymbol";
    case Errc::NegativeDistortion: return "NegativeDistortion";
    case Errc::EmptyRecoverySet: return "EmptyRecoverySet";
    case Errc::InconsistentAlphabet: return "InconsistentAlphabet";
    case Errc::PmfNotNormalized: return "PmfNotNormalized";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InfeasibleDelta: return "InfeasibleDelta";
    case Errc::Infeasible: return "Infeasible";
    case Errc::DeltaOutOfRange: return "DeltaOutOfRange";
    case Errc::NoFeasibleSet: return "NoFeasibleSet";
    case Errc::TooLarge: return "TooLarge";
    case Errc::TooManySamplers: return "TooManySamplers";
    case Errc::UnknownTau: return "UnknownTau";
    case Errc::SignalingImpossible: return "SignalingImpossible";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }
  const char* name() const { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace usrd
