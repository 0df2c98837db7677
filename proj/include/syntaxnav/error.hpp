#pragma once

#include <stdexcept>
#include <string>

namespace syntaxnav {

enum class Errc {
  // tree ingestion
  MalformedLine,
  MultipleRoots,
  NoRoot,
  CycleDetected,
  Disconnected,
  UnbalancedParens,
  EmptyConstituent,
  MisalignedTree,
  // numerics
  EmptyInput,
  ShapeMismatch,
  NonFinite,
  NotScalar,
  DetachedLoss,
  NonDeterministicFunction,
  UnknownParameter,
  CorruptCheckpoint,
  // encoder
  UnknownId,
  EmptySequence,
  EmptyEncoding,
  // world
  ConfigInvalid,
  PathTooShort,
  NoTemplateForPath,
  UnknownViewpoint,
  AlreadyDone,
  ActionOutOfRange,
  Unreachable,
  CorruptWorld,
  // agent / training / evaluation
  NoCandidates,
  LengthMismatch,
  UnknownEpisode,
  Io,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Tree ingestion errors carry the 1-based sentence and document line they
// were raised on (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(Errc code, const std::string& message, int sentence, int line);

  int sentence() const noexcept { return sentence_; }
  int line() const noexcept { return line_; }

 private:
  int sentence_;
  int line_;
};

}  // namespace syntaxnav
