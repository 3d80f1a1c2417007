#include "patchcert/process_backend.hpp"

#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <map>
#include <nlohmann/json.hpp>
#include <thread>

#include "patchcert/errors.hpp"
#include "patchcert/io.hpp"

extern char** environ;

namespace patchcert {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::size_t kMaxLineBytes = 1 << 20;

fs::path make_scratch_dir(const fs::path& root) {
  static std::atomic<unsigned> counter{0};
  const fs::path base = root.empty() ? fs::temp_directory_path() : root;
  for (int attempt = 0; attempt < 100; ++attempt) {
    fs::path dir = base / ("patchcert-" + std::to_string(::getpid()) + "-" +
                           std::to_string(counter++));
    if (fs::create_directories(dir)) return dir;
  }
  throw IoError("cannot create a scratch directory under " + base.string());
}

std::string id_text(std::optional<std::uint64_t> id) {
  return id ? " (request " + std::to_string(*id) + ")" : "";
}

}  // namespace

std::string encode_request(const WireRequest& req) {
  json j;
  j["id"] = req.id;
  j["op"] = req.op;
  j["image"] = req.image.string();
  j["mask"] = req.mask ? json(req.mask->string()) : json(nullptr);
  j["out"] = req.out.string();
  return j.dump();
}

WireResponse decode_response(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw ProtocolError("backend sent a malformed response: " + line.substr(0, 200));
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() ||
      !j.contains("status") || !j["status"].is_string()) {
    throw ProtocolError("backend response lacks id/status: " + line.substr(0, 200));
  }
  WireResponse r;
  r.id = j["id"].get<std::uint64_t>();
  const auto status = j["status"].get<std::string>();
  if (status != "ok" && status != "error") {
    throw ProtocolError("backend response has unknown status '" + status + "'", r.id);
  }
  r.ok = status == "ok";
  if (j.contains("message") && j["message"].is_string()) r.message = j["message"].get<std::string>();
  return r;
}

Handshake decode_handshake(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw ProtocolError("backend handshake is not JSON: " + line.substr(0, 200));
  }
  try {
    Handshake h;
    h.protocol = j.at("protocol").get<int>();
    h.num_classes = j.at("num_classes").get<int>();
    h.max_inflight = j.at("max_inflight").get<int>();
    h.deterministic = j.at("deterministic").get<bool>();
    if (h.protocol != kProtocolVersion) {
      throw ProtocolError("backend speaks protocol " + std::to_string(h.protocol) +
                          ", expected " + std::to_string(kProtocolVersion));
    }
    if (h.num_classes < 1 || h.num_classes > 65535) {
      throw ProtocolError("backend advertises an invalid class count");
    }
    if (h.max_inflight < 1) throw ProtocolError("backend advertises max_inflight < 1");
    return h;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("backend handshake is incomplete: ") + e.what());
  }
}

ProcessClient::ProcessClient(ProcessConfig config) : config_(std::move(config)) {
  if (config_.command.empty()) throw BackendError("empty backend command");
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw BackendError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BackendError("pipe() failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::vector<char*> argv;
  for (auto& arg : config_.command) argv.push_back(arg.data());
  argv.push_back(nullptr);
  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw BackendError("cannot start backend '" + config_.command[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    handshake_ = decode_handshake(read_line(std::nullopt));
    scratch_ = make_scratch_dir(config_.scratch_root);
  } catch (...) {
    shutdown();
    throw;
  }
}

ProcessClient::~ProcessClient() {
  shutdown();
  if (!scratch_.empty()) {
    std::error_code ec;
    fs::remove_all(scratch_, ec);
  }
}

void ProcessClient::shutdown() noexcept {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 100 && !exited; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        exited = true;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    }
    if (!exited) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
}

std::string ProcessClient::fingerprint() const {
  std::string cmd;
  for (const auto& part : config_.command) cmd += (cmd.empty() ? "" : " ") + part;
  return "process:" + cmd + ":protocol" + std::to_string(handshake_.protocol);
}

std::uint64_t ProcessClient::next_id() {
  std::lock_guard lock(mutex_);
  return next_id_++;
}

void ProcessClient::send_line(const std::string& line, std::uint64_t id) {
  const std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::write(to_child_, data.data() + sent, data.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("backend closed its input" + id_text(id), id);
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string ProcessClient::read_line(std::optional<std::uint64_t> waiting_for) {
  const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (buffer_.size() > kMaxLineBytes) throw ProtocolError("backend line too long");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw BackendTimeoutError("backend timed out" + id_text(waiting_for), waiting_for);
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendError("poll() failed");
    }
    if (ready == 0) {
      throw BackendTimeoutError("backend timed out" + id_text(waiting_for), waiting_for);
    }
    char chunk[4096];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("reading from backend failed" + id_text(waiting_for), waiting_for);
    }
    if (n == 0) {
      throw ProtocolError("backend exited" + id_text(waiting_for), waiting_for);
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<WireResponse> ProcessClient::exchange(const std::vector<WireRequest>& requests) {
  std::lock_guard lock(mutex_);
  if (broken_) throw ProtocolError("backend connection is no longer usable");

  std::vector<std::optional<WireResponse>> results(requests.size());
  std::map<std::uint64_t, std::size_t> pending;
  std::size_t next = 0;
  const auto limit = static_cast<std::size_t>(handshake_.max_inflight);
  try {
    while (next < requests.size() || !pending.empty()) {
      while (next < requests.size() && pending.size() < limit) {
        const auto& req = requests[next];
        if (!pending.emplace(req.id, next).second) {
          throw ProtocolError("duplicate request id " + std::to_string(req.id), req.id);
        }
        send_line(encode_request(req), req.id);
        peak_inflight_ = std::max(peak_inflight_, pending.size());
        ++next;
      }
      const WireResponse resp = decode_response(read_line(pending.begin()->first));
      const auto it = pending.find(resp.id);
      if (it == pending.end()) {
        throw ProtocolError("backend answered unknown request id " + std::to_string(resp.id),
                            resp.id);
      }
      results[it->second] = resp;
      pending.erase(it);
    }
  } catch (const BackendError&) {
    broken_ = true;
    throw;
  }

  std::vector<WireResponse> out;
  out.reserve(results.size());
  for (auto& r : results) {
    if (!r->ok) {
      throw BackendRequestError("backend failed request " + std::to_string(r->id) + ": " +
                                    r->message,
                                r->id);
    }
    out.push_back(std::move(*r));
  }
  return out;
}

namespace {

// Runs one batch, tagging failures with the batch position as mask index.
template <typename Prepare, typename Collect>
auto run_batch(ProcessClient& client, std::size_t count, Prepare&& prepare, Collect&& collect) {
  std::vector<WireRequest> requests;
  requests.reserve(count);
  std::map<std::uint64_t, int> index_of;
  for (std::size_t i = 0; i < count; ++i) {
    requests.push_back(prepare(i, client.next_id()));
    index_of[requests.back().id] = static_cast<int>(i);
  }
  const auto mask_index = [&](std::optional<std::uint64_t> id) -> std::optional<int> {
    if (!id) return std::nullopt;
    const auto it = index_of.find(*id);
    return it == index_of.end() ? std::nullopt : std::optional<int>(it->second);
  };

  using Result = decltype(collect(requests.front(), std::size_t{0}));
  std::vector<Result> out;
  try {
    client.exchange(requests);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(collect(requests[i], i));
  } catch (const BackendTimeoutError& e) {
    throw BackendTimeoutError(e.what(), e.request_id(), mask_index(e.request_id()));
  } catch (const BackendDimensionError& e) {
    throw;
  } catch (const BackendRequestError& e) {
    throw BackendRequestError(e.what(), e.request_id(), mask_index(e.request_id()));
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what(), e.request_id(), mask_index(e.request_id()));
  }
  for (const auto& req : requests) {
    std::error_code ec;
    fs::remove(req.image, ec);
    if (req.mask) fs::remove(*req.mask, ec);
    fs::remove(req.out, ec);
  }
  return out;
}

}  // namespace

ImageGrid ProcessDemasker::demask(const MaskedImage& masked) const {
  return demask_batch(std::span(&masked, 1)).front();
}

std::vector<ImageGrid> ProcessDemasker::demask_batch(std::span<const MaskedImage> inputs) const {
  if (inputs.empty()) return {};
  const fs::path dir = client_->scratch();
  return run_batch(
      *client_, inputs.size(),
      [&](std::size_t i, std::uint64_t id) {
        const std::string stem = "demask_" + std::to_string(id);
        WireRequest req{id, "demask", dir / (stem + "_in.png"), dir / (stem + "_mask.pgm"),
                        dir / (stem + "_out.png")};
        io::write_png(req.image, inputs[i].pixels);
        io::write_mask(*req.mask, inputs[i].mask);
        return req;
      },
      [&](const WireRequest& req, std::size_t i) {
        ImageGrid out;
        try {
          out = io::read_png(req.out);
        } catch (const IoError& e) {
          throw ProtocolError(std::string("unreadable demask output: ") + e.what(), req.id,
                              static_cast<int>(i));
        }
        if (!out.same_shape(inputs[i].pixels)) {
          throw BackendDimensionError(
              "demask output is " + std::to_string(out.height()) + "x" +
                  std::to_string(out.width()) + "x" + std::to_string(out.channels()) +
                  ", expected " + std::to_string(inputs[i].pixels.height()) + "x" +
                  std::to_string(inputs[i].pixels.width()) + "x" +
                  std::to_string(inputs[i].pixels.channels()) + id_text(req.id),
              req.id, static_cast<int>(i));
        }
        return out;
      });
}

bool ProcessDemasker::deterministic() const { return client_->handshake().deterministic; }
std::string ProcessDemasker::fingerprint() const { return client_->fingerprint() + ":demask"; }

SegMap ProcessSegmenter::segment(const ImageGrid& image) const {
  return segment_batch(std::span(&image, 1)).front();
}

std::vector<SegMap> ProcessSegmenter::segment_batch(std::span<const ImageGrid> inputs) const {
  if (inputs.empty()) return {};
  const fs::path dir = client_->scratch();
  const int classes = num_classes();
  const std::string ext = classes <= 256 ? ".pgm" : ".seg";
  return run_batch(
      *client_, inputs.size(),
      [&](std::size_t i, std::uint64_t id) {
        const std::string stem = "segment_" + std::to_string(id);
        WireRequest req{id, "segment", dir / (stem + "_in.png"), std::nullopt,
                        dir / (stem + "_out" + ext)};
        io::write_png(req.image, inputs[i]);
        return req;
      },
      [&](const WireRequest& req, std::size_t i) {
        std::vector<std::uint8_t> bytes;
        try {
          bytes = io::read_bytes(req.out);
        } catch (const IoError& e) {
          throw ProtocolError(std::string("missing segment output: ") + e.what(), req.id,
                              static_cast<int>(i));
        }
        SegMap seg;
        try {
          seg = io::decode_segmap(bytes, classes);
        } catch (const Error& e) {
          throw ProtocolError(std::string("invalid segment output: ") + e.what(), req.id,
                              static_cast<int>(i));
        }
        if (seg.height() != inputs[i].height() || seg.width() != inputs[i].width()) {
          throw BackendDimensionError(
              "segment output is " + std::to_string(seg.height()) + "x" +
                  std::to_string(seg.width()) + ", expected " +
                  std::to_string(inputs[i].height()) + "x" + std::to_string(inputs[i].width()) +
                  id_text(req.id),
              req.id, static_cast<int>(i));
        }
        return seg;
      });
}

int ProcessSegmenter::num_classes() const { return client_->handshake().num_classes; }
bool ProcessSegmenter::deterministic() const { return client_->handshake().deterministic; }
std::string ProcessSegmenter::fingerprint() const { return client_->fingerprint() + ":segment"; }

ProcessBackends external_process_backend(ProcessConfig config) {
  ProcessBackends b;
  b.client = std::make_shared<ProcessClient>(std::move(config));
  b.demasker = std::make_unique<ProcessDemasker>(b.client);
  b.segmenter = std::make_unique<ProcessSegmenter>(b.client);
  return b;
}

bool probe_determinism(ProcessBackends& backends, const ImageGrid& sample, const MaskGrid& mask) {
  const MaskedImage masked = apply_mask(sample, mask);
  const std::vector<MaskedImage> twice = {masked, masked};
  const auto restored = backends.demasker->demask_batch(twice);
  if (restored[0] != restored[1]) return false;
  const std::vector<ImageGrid> inputs = {restored[0], restored[0]};
  const auto segs = backends.segmenter->segment_batch(inputs);
  return segs[0] == segs[1];
}

}  // namespace patchcert
