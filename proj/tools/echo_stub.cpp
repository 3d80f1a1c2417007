// Reference backend server for the patchcert wire protocol.
//
// Modes:
//   echo  demask returns the (zero-filled) masked image unchanged, segment
//         returns a constant map
//   toy   nearest-fill demasking and dominant-channel segmentation, i.e. the
//         in-process toy backends behind the protocol
//
// Fault switches exist so the engine's protocol handling can be tested.

#include <poll.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "patchcert/backend.hpp"
#include "patchcert/io.hpp"

namespace {

using json = nlohmann::json;
using namespace patchcert;

struct Options {
  std::string mode = "echo";
  int num_classes = 3;
  int label = 0;
  int max_inflight = 1;
  bool nondeterministic = false;
  bool reorder = false;
  bool wrong_dims = false;
  std::string fail_op;
  bool bad_handshake = false;
  bool garbage = false;
  bool hang = false;
  bool unknown_id = false;
  int exit_after = -1;
  std::string stats;
};

class LineReader {
 public:
  // Returns false on EOF. With timeout_ms >= 0, also returns false (and sets
  // timed_out) when no complete line arrives in time.
  bool next(std::string& line, int timeout_ms, bool& timed_out) {
    timed_out = false;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      if (eof_) return false;
      if (timeout_ms >= 0) {
        pollfd pfd{STDIN_FILENO, POLLIN, 0};
        if (::poll(&pfd, 1, timeout_ms) == 0) {
          timed_out = true;
          return false;
        }
      }
      char chunk[4096];
      const auto n = ::read(STDIN_FILENO, chunk, sizeof chunk);
      if (n <= 0) {
        eof_ = true;
        continue;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buffer_;
  bool eof_ = false;
};

void emit(const std::string& line) {
  std::cout << line << "\n" << std::flush;
}

json respond(const Options& opt, const json& req) {
  const auto id = req.at("id").get<std::uint64_t>();
  const auto op = req.at("op").get<std::string>();
  json resp{{"id", opt.unknown_id ? id + 1000000 : id}};
  try {
    if (op == opt.fail_op) throw std::runtime_error("configured failure for op " + op);
    const ImageGrid image = io::read_png(req.at("image").get<std::string>());
    const std::string out = req.at("out").get<std::string>();
    if (op == "demask") {
      const MaskGrid mask = io::read_mask(req.at("mask").get<std::string>());
      ImageGrid result = opt.mode == "toy" ? NearestFillDemasker().demask({image, mask}) : image;
      if (opt.wrong_dims) result = ImageGrid(result.height(), result.width() + 1, result.channels());
      io::write_png(out, result);
    } else if (op == "segment") {
      SegMap seg = opt.mode == "toy"
                       ? DominantChannelSegmenter().segment(image)
                       : SegMap(image.height(), image.width(), opt.num_classes,
                                static_cast<Label>(opt.label));
      if (opt.wrong_dims) seg = SegMap(seg.height() + 1, seg.width(), seg.num_classes());
      if (opt.nondeterministic) {
        static int calls = 0;
        seg.set(0, 0, static_cast<Label>(calls++ % seg.num_classes()));
      }
      io::write_segmap(out, seg);
    } else {
      throw std::runtime_error("unknown op " + op);
    }
    resp["status"] = "ok";
  } catch (const std::exception& e) {
    resp["status"] = "error";
    resp["message"] = e.what();
  }
  return resp;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"patchcert protocol stub server"};
  app.add_option("--mode", opt.mode, "echo or toy")->check(CLI::IsMember({"echo", "toy"}));
  app.add_option("--num-classes", opt.num_classes);
  app.add_option("--label", opt.label, "constant label in echo mode");
  app.add_option("--max-inflight", opt.max_inflight);
  app.add_flag("--nondeterministic", opt.nondeterministic,
               "announce and behave nondeterministically");
  app.add_flag("--reorder", opt.reorder, "answer queued requests in reverse order");
  app.add_flag("--wrong-dims", opt.wrong_dims);
  app.add_option("--fail-op", opt.fail_op, "answer this op with status error");
  app.add_flag("--bad-handshake", opt.bad_handshake);
  app.add_flag("--garbage", opt.garbage, "answer with non-JSON lines");
  app.add_flag("--hang", opt.hang, "never answer");
  app.add_flag("--unknown-id", opt.unknown_id);
  app.add_option("--exit-after", opt.exit_after, "exit after this many requests");
  app.add_option("--stats", opt.stats, "write peak queued requests here at exit");
  CLI11_PARSE(app, argc, argv);

  if (opt.mode == "toy") opt.num_classes = 3;
  if (opt.bad_handshake) {
    emit(R"({"protocol": 99, "num_classes": 3, "max_inflight": 1, "deterministic": true})");
  } else {
    emit(json{{"protocol", 1},
              {"num_classes", opt.num_classes},
              {"max_inflight", opt.max_inflight},
              {"deterministic", !opt.nondeterministic}}
             .dump());
  }

  LineReader reader;
  std::vector<json> queue;
  std::size_t peak = 0;
  bool overflow = false;
  int handled = 0;

  const auto flush = [&] {
    if (opt.reorder) std::reverse(queue.begin(), queue.end());
    for (const auto& req : queue) {
      if (opt.garbage) {
        emit("this is not json");
      } else {
        emit(respond(opt, req).dump());
      }
      ++handled;
      if (opt.exit_after >= 0 && handled >= opt.exit_after) std::exit(0);
    }
    queue.clear();
  };

  std::string line;
  bool timed_out = false;
  for (;;) {
    const int wait = queue.empty() ? -1 : 50;
    if (!reader.next(line, wait, timed_out)) {
      if (timed_out) {
        flush();
        continue;
      }
      break;
    }
    if (line.empty()) continue;
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      continue;
    }
    if (opt.hang) continue;
    queue.push_back(req);
    peak = std::max(peak, queue.size());
    if (static_cast<int>(queue.size()) > opt.max_inflight) overflow = true;
    if (!opt.reorder) flush();
  }
  flush();

  if (!opt.stats.empty()) {
    std::ofstream(opt.stats) << json{{"peak_queued", peak}, {"overflow", overflow}}.dump()
                             << "\n";
  }
  return 0;
}
