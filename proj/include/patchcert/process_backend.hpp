#pragma once

// Backend that talks to a child process over newline-delimited JSON on its
// stdin/stdout.
//
//   server -> {"protocol": 1, "num_classes": u32, "max_inflight": u32,
//              "deterministic": bool}                              (first line)
//   client -> {"id": u64, "op": "demask"|"segment", "image": "<png>",
//              "mask": "<pgm>"|null, "out": "<path>"}
//   server -> {"id": u64, "status": "ok"|"error", "message": "..."}
//
// Files live in a job-scoped scratch directory removed with the client.
// Responses may arrive in any order; they are matched by id.

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "patchcert/backend.hpp"

namespace patchcert {

inline constexpr int kProtocolVersion = 1;

struct ProcessConfig {
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{30000};
  /// Parent of the scratch directory; empty selects the system temp dir.
  std::filesystem::path scratch_root;
};

struct Handshake {
  int protocol = 0;
  int num_classes = 0;
  int max_inflight = 1;
  bool deterministic = false;
};

struct WireRequest {
  std::uint64_t id = 0;
  std::string op;
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::filesystem::path out;
};

struct WireResponse {
  std::uint64_t id = 0;
  bool ok = false;
  std::string message;
};

std::string encode_request(const WireRequest& req);
WireResponse decode_response(const std::string& line);
Handshake decode_handshake(const std::string& line);

class ProcessClient {
 public:
  explicit ProcessClient(ProcessConfig config);
  ~ProcessClient();

  ProcessClient(const ProcessClient&) = delete;
  ProcessClient& operator=(const ProcessClient&) = delete;

  const Handshake& handshake() const noexcept { return handshake_; }
  const std::filesystem::path& scratch() const noexcept { return scratch_; }
  std::string fingerprint() const;

  std::uint64_t next_id();

  /// Sends every request with at most max_inflight outstanding and returns
  /// the responses in request order. Throws BackendRequestError for the
  /// first failed request (by request order), ProtocolError on malformed or
  /// unexpected traffic, BackendTimeoutError when the server stalls.
  std::vector<WireResponse> exchange(const std::vector<WireRequest>& requests);

  /// Largest number of requests that were outstanding at once.
  std::size_t peak_inflight() const noexcept { return peak_inflight_; }

 private:
  void send_line(const std::string& line, std::uint64_t id);
  std::string read_line(std::optional<std::uint64_t> waiting_for);
  void shutdown() noexcept;

  ProcessConfig config_;
  Handshake handshake_;
  std::filesystem::path scratch_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  std::size_t peak_inflight_ = 0;
  bool broken_ = false;
  std::mutex mutex_;
};

class ProcessDemasker final : public DemaskingBackend {
 public:
  explicit ProcessDemasker(std::shared_ptr<ProcessClient> client) : client_(std::move(client)) {}

  ImageGrid demask(const MaskedImage& masked) const override;
  std::vector<ImageGrid> demask_batch(std::span<const MaskedImage> inputs) const override;
  bool deterministic() const override;
  std::string fingerprint() const override;

 private:
  std::shared_ptr<ProcessClient> client_;
};

class ProcessSegmenter final : public SegmentationBackend {
 public:
  explicit ProcessSegmenter(std::shared_ptr<ProcessClient> client) : client_(std::move(client)) {}

  SegMap segment(const ImageGrid& image) const override;
  std::vector<SegMap> segment_batch(std::span<const ImageGrid> inputs) const override;
  int num_classes() const override;
  bool deterministic() const override;
  std::string fingerprint() const override;

 private:
  std::shared_ptr<ProcessClient> client_;
};

struct ProcessBackends {
  std::shared_ptr<ProcessClient> client;
  std::unique_ptr<DemaskingBackend> demasker;
  std::unique_ptr<SegmentationBackend> segmenter;
};

ProcessBackends external_process_backend(ProcessConfig config);

/// Sends the same demask and segment requests twice and compares the
/// outputs byte for byte.
bool probe_determinism(ProcessBackends& backends, const ImageGrid& sample,
                       const MaskGrid& mask);

}  // namespace patchcert
