#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be opened or read at all.
struct IoError : Error {
  explicit IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path(path) {}
  std::string path;
};

// Malformed text input; line is 1-based, 0 when not line-specific.
struct ParseError : Error {
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what),
        path(path),
        line(line) {}
  std::string path;
  std::size_t line;
};

struct EmptyCloud : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct TruncatedFile : Error {
  using Error::Error;
};

struct BadMagic : Error {
  using Error::Error;
};

struct BadHeader : Error {
  using Error::Error;
};

struct TruncatedPixels : Error {
  using Error::Error;
};

struct NotARotation : Error {
  using Error::Error;
};

struct ClassAbsent : Error {
  using Error::Error;
};

struct EmptyProjection : Error {
  using Error::Error;
};

struct EvaluationFailed : Error {
  EvaluationFailed(int frame_id, const std::string& what)
      : Error("frame " + std::to_string(frame_id) + ": " + what),
        frame_id(frame_id) {}
  int frame_id;
};

struct AllFramesDegenerate : Error {
  using Error::Error;
};

struct MissingVelocity : Error {
  using Error::Error;
};

struct InsufficientCorrespondences : Error {
  using Error::Error;
};

struct DegenerateConfiguration : Error {
  using Error::Error;
};

struct CheiralityAmbiguous : Error {
  using Error::Error;
};

struct EmptyScene : Error {
  using Error::Error;
};

struct TooFewVisible : Error {
  using Error::Error;
};

}  // namespace semcal
