#pragma once

#include <stdexcept>
#include <string>

namespace phantom {

// Base for every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedFile : public Error {
 public:
  using Error::Error;
};

class MalformedPoint : public Error {
 public:
  MalformedPoint(std::size_t index, const std::string& what)
      : Error("malformed point " + std::to_string(index) + ": " + what),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class MalformedCalibration : public Error {
 public:
  MalformedCalibration(std::string key, const std::string& what)
      : Error("malformed calibration (" + key + "): " + what),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class MalformedLabel : public Error {
 public:
  MalformedLabel(std::size_t line, const std::string& what)
      : Error("malformed label at line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SceneNotFound : public Error {
 public:
  SceneNotFound(std::string component, const std::string& path)
      : Error("scene not found (" + component + "): " + path),
        component_(std::move(component)) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

class ImageError : public Error {
 public:
  using Error::Error;
};

class EmptyLibrary : public Error {
 public:
  using Error::Error;
};

class MissingTemplate : public Error {
 public:
  using Error::Error;
};

// Attempt-level failures. The campaign runner records these as aborted
// attempts instead of stopping.
class AttemptAborted : public Error {
 public:
  using Error::Error;
};

class TooSparse : public AttemptAborted {
 public:
  TooSparse(std::size_t kept, std::size_t minimum)
      : AttemptAborted("too sparse: " + std::to_string(kept) +
                       " points kept, need " + std::to_string(minimum)) {}
};

class CannotProject : public AttemptAborted {
 public:
  using AttemptAborted::AttemptAborted;
};

class NoValidPlacement : public AttemptAborted {
 public:
  using AttemptAborted::AttemptAborted;
};

class UndefinedConsistency : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace phantom
