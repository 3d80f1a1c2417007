#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace patchcert {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched grid sizes between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid patch, block or mask geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A mask set failed its strength or coverage check.
class VerificationError : public Error {
 public:
  using Error::Error;
};

class InsufficientMasksError : public Error {
 public:
  InsufficientMasksError(const std::string& what, int required_masks)
      : Error(what), required_masks_(required_masks) {}
  int required_masks() const noexcept { return required_masks_; }

 private:
  int required_masks_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Failure inside a demasking or segmentation backend. Carries the wire
/// request id and/or mask index when known.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what,
                        std::optional<std::uint64_t> request_id = std::nullopt,
                        std::optional<int> mask_index = std::nullopt)
      : Error(what), request_id_(request_id), mask_index_(mask_index) {}

  std::optional<std::uint64_t> request_id() const noexcept { return request_id_; }
  std::optional<int> mask_index() const noexcept { return mask_index_; }

 private:
  std::optional<std::uint64_t> request_id_;
  std::optional<int> mask_index_;
};

class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

class BackendTimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

class BackendDimensionError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The backend answered with status "error".
class BackendRequestError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace patchcert
