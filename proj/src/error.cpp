#include "syntaxnav/error.hpp"

namespace syntaxnav {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::MultipleRoots: return "MultipleRoots";
    case Errc::NoRoot: return "NoRoot";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::Disconnected: return "Disconnected";
    case Errc::UnbalancedParens: return "UnbalancedParens";
    case Errc::EmptyConstituent: return "EmptyConstituent";
    case Errc::MisalignedTree: return "MisalignedTree";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NotScalar: return "NotScalar";
    case Errc::DetachedLoss: return "DetachedLoss";
    case Errc::NonDeterministicFunction: return "NonDeterministicFunction";
    case Errc::UnknownParameter: return "UnknownParameter";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::UnknownId: return "UnknownId";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::EmptyEncoding: return "EmptyEncoding";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::PathTooShort: return "PathTooShort";
    case Errc::NoTemplateForPath: return "NoTemplateForPath";
    case Errc::UnknownViewpoint: return "UnknownViewpoint";
    case Errc::AlreadyDone: return "AlreadyDone";
    case Errc::ActionOutOfRange: return "ActionOutOfRange";
    case Errc::Unreachable: return "Unreachable";
    case Errc::CorruptWorld: return "CorruptWorld";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownEpisode: return "UnknownEpisode";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {
std::string located(const std::string& message, int sentence, int line) {
  std::string out = message;
  if (sentence > 0) out += " (sentence " + std::to_string(sentence);
  if (line > 0) out += (sentence > 0 ? ", line " : " (line ") + std::to_string(line);
  if (sentence > 0 || line > 0) out += ")";
  return out;
}
}  // namespace

ParseError::ParseError(Errc code, const std::string& message, int sentence, int line)
    : Error(code, located(message, sentence, line)), sentence_(sentence), line_(line) {}

}  // namespace syntaxnav
