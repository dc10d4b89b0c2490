#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace knockout {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Domain / construction failures.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnknownAnswer : public Error {
 public:
  using Error::Error;
};

class TooFewAnswers : public Error {
 public:
  using Error::Error;
};

// Prompt rendering.
class TemplateMismatch : public Error {
 public:
  using Error::Error;
};

// Judge backends.
class TransportError : public Error {
 public:
  using Error::Error;
};

class EndpointRejected : public Error {
 public:
  EndpointRejected(int status, std::string body)
      : Error("endpoint rejected request with status " +
              std::to_string(status)),
        status(status),
        body(std::move(body)) {}
  int status;
  std::string body;
};

class MissingLatentQuality : public Error {
 public:
  using Error::Error;
};

// Score parsing.
class ParseError : public Error {
 public:
  using Error::Error;
};

class NoScoreFound : public ParseError {
 public:
  using ParseError::ParseError;
};

class ScoreOutOfRange : public ParseError {
 public:
  ScoreOutOfRange(double found, double max_points)
      : ParseError("score " + std::to_string(found) +
                   " outside [0, " + std::to_string(max_points) + "]"),
        found(found) {}
  double found;
};

// Raised after parse retries are exhausted; carries every raw completion so
// failures can be inspected offline.
class UnscorableResponse : public Error {
 public:
  explicit UnscorableResponse(std::vector<std::string> raw_texts,
                              std::string context = {})
      : Error(context.empty()
                  ? "no parsable score after " +
                        std::to_string(raw_texts.size()) + " attempt(s)"
                  : std::move(context)),
        raw_texts(std::move(raw_texts)) {}
  std::vector<std::string> raw_texts;
};

// Metrics.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class MissingLabel : public Error {
 public:
  using Error::Error;
};

// Dataset loading.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class DuplicateAnswerId : public Error {
 public:
  using Error::Error;
};

class EmptyAfterFiltering : public Error {
 public:
  using Error::Error;
};

// Response cache.
class CacheIoError : public Error {
 public:
  using Error::Error;
};

// Reporting.
class IdMismatch : public Error {
 public:
  IdMismatch(std::string message, std::vector<std::string> orphans)
      : Error(std::move(message)), orphans(std::move(orphans)) {}
  std::vector<std::string> orphans;
};

}  // namespace knockout
