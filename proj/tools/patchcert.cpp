// patchcert command-line interface.
//
//   patchcert gen-masks  build and verify a mask set, write it to a directory
//   patchcert certify    certify one image or a directory of images
//   patchcert eval       aggregate metrics over prediction/cert/gt directories
//   patchcert audit      brute-force soundness audits at toy scale
//
// Exit codes: 0 success, 1 usage or input error, 2 verification or audit
// failure, 3 backend failure.
//
// Any long flag can also come from a JSON config file (--config or
// $PATCHCERT_CONFIG); flags on the command line win.

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "patchcert/backend.hpp"
#include "patchcert/certifier.hpp"
#include "patchcert/errors.hpp"
#include "patchcert/io.hpp"
#include "patchcert/maskgen.hpp"
#include "patchcert/metrics.hpp"
#include "patchcert/oracle.hpp"
#include "patchcert/process_backend.hpp"
#include "patchcert/reports.hpp"
#include "patchcert/scenes.hpp"

namespace {

using namespace patchcert;
namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;
constexpr int kExitBackend = 3;

class AuditFailure : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------- config

std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::string config_path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_path.empty()) {
    if (const char* env = std::getenv("PATCHCERT_CONFIG"); env != nullptr) config_path = env;
  }
  if (config_path.empty()) return kept;

  json config;
  try {
    const auto bytes = io::read_bytes(config_path);
    config = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw IoError("config " + config_path + ": " + e.what());
  }
  if (!config.is_object()) throw IoError("config " + config_path + " must be a JSON object");

  std::string subcommand;
  for (std::size_t i = 1; i < kept.size(); ++i) {
    if (kept[i].rfind("-", 0) != 0) {
      subcommand = kept[i];
      break;
    }
  }
  const json& section =
      config.contains(subcommand) && config[subcommand].is_object() ? config[subcommand] : config;

  const auto given = [&](const std::string& flag) {
    return std::any_of(kept.begin(), kept.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  for (const auto& [key, value] : section.items()) {
    if (value.is_object()) continue;
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) kept.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        kept.push_back(flag);
        kept.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else if (!value.is_null()) {
      kept.push_back(flag);
      kept.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return kept;
}

// ---------------------------------------------------------------- geometry

struct GeometryArgs {
  int height = 0;
  int width = 0;
  double patch_frac = 0.0;
  int patch_h = 0;
  int patch_w = 0;
  int n_patches = 1;

  void add(CLI::App* cmd, bool required) {
    auto* h = cmd->add_option("--height", height, "image height");
    auto* w = cmd->add_option("--width", width, "image width");
    if (required) {
      h->required();
      w->required();
    }
    auto* frac = cmd->add_option("--patch-frac", patch_frac,
                                 "square patch covering this fraction of the image");
    auto* ph = cmd->add_option("--patch-h", patch_h, "patch height");
    auto* pw = cmd->add_option("--patch-w", patch_w, "patch width");
    frac->excludes(ph)->excludes(pw);
    cmd->add_option("--n-patches", n_patches, "number of simultaneous patches")
        ->check(CLI::PositiveNumber);
  }

  ThreatModel threat() const {
    int ph = patch_h;
    int pw = patch_w;
    if (patch_frac > 0.0) {
      ph = pw = square_patch_side(patch_frac, height, width);
    } else if (ph <= 0 || pw <= 0) {
      throw GeometryError("give --patch-frac or both --patch-h and --patch-w");
    }
    return ThreatModel(height, width, ph, pw, n_patches);
  }
};

// ---------------------------------------------------------------- backends

struct Backends {
  std::shared_ptr<ProcessClient> client;
  std::shared_ptr<DemaskingBackend> demasker;
  std::shared_ptr<SegmentationBackend> segmenter;
};

struct BackendArgs {
  std::string spec = "toy";
  int timeout_ms = 30000;

  void add(CLI::App* cmd) {
    cmd->add_option("--backend", spec, "toy or process:<command line>");
    cmd->add_option("--timeout-ms", timeout_ms, "per-response timeout for process backends");
  }

  Backends make() const {
    if (spec == "toy") {
      return {nullptr, std::make_shared<NearestFillDemasker>(),
              std::make_shared<DominantChannelSegmenter>()};
    }
    if (spec.rfind("process:", 0) == 0) {
      ProcessConfig config;
      std::istringstream words(spec.substr(8));
      for (std::string w; words >> w;) config.command.push_back(w);
      config.timeout = std::chrono::milliseconds(timeout_ms);
      auto b = external_process_backend(std::move(config));
      return {b.client, std::move(b.demasker), std::move(b.segmenter)};
    }
    throw Error("unknown backend '" + spec + "' (use toy or process:<cmd>)");
  }
};

// ---------------------------------------------------------------- gen-masks

struct GenMasksArgs {
  GeometryArgs geometry;
  std::string scheme = "col";
  int k = 0;
  int mask_width = 0;
  std::string out;
};

int run_gen_masks(const GenMasksArgs& a) {
  const ThreatModel tm = a.geometry.threat();
  MaskSet ms = build_scheme(a.scheme, tm, a.k, a.mask_width);
  for (const auto& w : ms.warnings) std::cerr << "warning: " << w << "\n";

  std::cout << "scheme=" << ms.scheme << " kind=" << to_string(ms.kind) << " K=" << ms.size()
            << " patch=" << tm.patch_height() << "x" << tm.patch_width() << "\n";
  if (ms.kind == MaskSetKind::recovery) {
    const int strength = compute_strength(ms, tm);
    std::cout << "T=" << strength << " (declared " << ms.declared_strength.value_or(0) << ")\n";
    if (!verify_block_uniqueness(ms)) throw VerificationError("block uniqueness check failed");
    if (strength > ms.declared_strength.value_or(strength)) {
      throw VerificationError("computed strength exceeds the declared strength");
    }
    const int required = min_recovery_masks(std::max(strength, 1), tm.num_patches());
    std::cout << "recovery condition K>=" << required << ": "
              << (ms.size() >= required ? "ok" : "NOT MET") << "\n";
  } else {
    const bool covered = verify_detection_coverage(ms, tm);
    std::cout << "coverage=" << (covered ? "verified" : "FAILED") << "\n";
    if (!covered) throw VerificationError("detection coverage check failed");
  }
  save_maskset(ms, a.out);
  return kExitOk;
}

// ---------------------------------------------------------------- certify

struct CertifyArgs {
  std::string image;
  std::string masks;
  std::string mode = "recovery";
  BackendArgs backend;
  int n_patches = 1;
  std::string out;
  int jobs = 1;
  bool colorize = false;
  bool allow_nondeterministic = false;
  bool probe = false;
};

CertifiedOutput certify_one(const CertifyArgs& a, const MaskSet& ms, const Backends& b,
                            const ImageGrid& image) {
  if (image.height() != ms.threat.image_height() || image.width() != ms.threat.image_width()) {
    throw DimensionError("image is " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + " but the mask set is for " +
                         std::to_string(ms.threat.image_height()) + "x" +
                         std::to_string(ms.threat.image_width()));
  }
  if (a.mode == "recovery") {
    return certify_recovery(image, ms, *b.demasker, *b.segmenter, a.n_patches);
  }
  return certify_detection(image, ms, *b.demasker, *b.segmenter,
                           DetectionOptions{a.allow_nondeterministic});
}

Backends make_checked_backends(const CertifyArgs& a, const MaskSet& ms) {
  Backends b = a.backend.make();
  if (a.probe && b.client) {
    ProcessBackends pb{b.client, nullptr, nullptr};
    pb.demasker = std::make_unique<ProcessDemasker>(b.client);
    pb.segmenter = std::make_unique<ProcessSegmenter>(b.client);
    const ImageGrid sample = synthetic_scene(ms.threat.image_height(), ms.threat.image_width(), 0);
    if (!probe_determinism(pb, sample, ms.masks.front())) {
      throw BackendError("determinism probe failed: identical requests gave different outputs");
    }
  }
  return b;
}

int run_certify(const CertifyArgs& a) {
  const MaskSet ms = load_maskset(a.masks);
  const fs::path out = a.out;

  if (!fs::is_directory(a.image)) {
    const Backends b = make_checked_backends(a, ms);
    const CertifiedOutput result = certify_one(a, ms, b, io::read_png(a.image));
    reports::write_certified_output(
        out, result,
        {b.demasker->fingerprint(), b.segmenter->fingerprint(), fs::path(a.image).filename()},
        a.colorize);
    std::cout << "certified " << result.cert_map.count() << " of "
              << result.cert_map.height() * result.cert_map.width() << " pixels\n";
    return kExitOk;
  }

  std::vector<fs::path> images;
  for (const auto& entry : fs::recursive_directory_iterator(a.image)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      images.push_back(fs::relative(entry.path(), a.image));
    }
  }
  std::sort(images.begin(), images.end());

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    try {
      const Backends b = make_checked_backends(a, ms);
      for (std::size_t i = next++; i < images.size(); i = next++) {
        {
          std::lock_guard lock(failure_mutex);
          if (failure) return;
        }
        const fs::path rel = images[i];
        const CertifiedOutput result = certify_one(a, ms, b, io::read_png(fs::path(a.image) / rel));
        fs::path dest = out / rel;
        dest.replace_extension();
        reports::write_certified_output(
            dest, result, {b.demasker->fingerprint(), b.segmenter->fingerprint(), rel.string()},
            a.colorize);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(images.size())));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::cout << "certified " << images.size() << " images\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string cert;
  std::string gt;
  int num_classes = 0;
  double big_threshold = 0.20;
  int ignore_label = -1;
  std::string out;
};

std::optional<fs::path> find_map(const fs::path& dir, const fs::path& stem,
                                 const std::string& nested_name) {
  for (const char* ext : {".pgm", ".seg"}) {
    fs::path flat = dir / stem;
    flat += ext;
    if (fs::is_regular_file(flat)) return flat;
    fs::path nested = dir / stem / (nested_name + ext);
    if (fs::is_regular_file(nested)) return nested;
  }
  return std::nullopt;
}

int run_eval(const EvalArgs& a) {
  std::optional<Label> ignore;
  if (a.ignore_label >= 0) ignore = static_cast<Label>(a.ignore_label);

  std::vector<fs::path> stems;
  for (const auto& entry : fs::recursive_directory_iterator(a.gt)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".seg")) {
      fs::path rel = fs::relative(entry.path(), a.gt);
      stems.push_back(rel.replace_extension());
    }
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw IoError("no ground-truth maps in " + a.gt);

  std::set<fs::path> used_preds;
  metrics::DatasetAggregate agg(a.num_classes);
  for (const auto& stem : stems) {
    const auto pred_path = find_map(a.pred, stem, "segmentation");
    if (!pred_path) throw IoError("no prediction for " + stem.string());
    used_preds.insert(fs::weakly_canonical(*pred_path));
    const SegMap gt = io::read_segmap(fs::path(a.gt) / (stem.string() + (fs::is_regular_file(
                                          fs::path(a.gt) / (stem.string() + ".pgm"))
                                          ? ".pgm" : ".seg")),
                                      a.num_classes, ignore);
    const SegMap pred = io::read_segmap(*pred_path, a.num_classes);
    std::optional<BinaryMap> cert;
    if (!a.cert.empty()) {
      fs::path cert_path = fs::path(a.cert) / stem;
      cert_path += ".pgm";
      if (!fs::is_regular_file(cert_path)) cert_path = fs::path(a.cert) / stem / "cert.pgm";
      if (!fs::is_regular_file(cert_path)) throw IoError("no cert map for " + stem.string());
      cert = io::read_binary_map(cert_path);
    }
    agg.add(metrics::evaluate_image(pred, cert ? &*cert : nullptr, gt, a.num_classes));
  }
  for (const auto& entry : fs::recursive_directory_iterator(a.pred)) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || (ext != ".pgm" && ext != ".seg")) continue;
    const auto name = entry.path().stem().string();
    const bool nested = name == "segmentation" || name == "cert";
    if (nested && entry.path().filename().string().rfind("segmentation", 0) != 0) continue;
    if (!used_preds.count(fs::weakly_canonical(entry.path()))) {
      throw IoError("prediction without ground truth: " + entry.path().string());
    }
  }

  const std::string text = reports::eval_json(agg, a.big_threshold, !a.cert.empty()).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    io::write_text_atomic(a.out, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- audit

struct AuditArgs {
  GeometryArgs geometry;
  std::string scheme;
  std::string masks;
  int k = 0;
  int mask_width = 0;
  std::string image;
  std::uint64_t seed = 0;
  int battery = 100;
  std::vector<std::string> checks;
  std::size_t two_patch_samples = 200;
  int attack_budget = 200;
  BackendArgs backend;
  std::string out;
};

int run_audit(const AuditArgs& a) {
  const auto started = std::chrono::steady_clock::now();
  MaskSet ms;
  if (!a.masks.empty()) {
    ms = load_maskset(a.masks);
    ms.threat = ms.threat.with_patches(a.geometry.n_patches);
  } else if (!a.scheme.empty()) {
    ms = build_scheme(a.scheme, a.geometry.threat(), a.k, a.mask_width);
  } else {
    throw Error("give --scheme or --masks");
  }
  const ThreatModel& tm = ms.threat;
  const ImageGrid image = a.image.empty()
                              ? synthetic_scene(tm.image_height(), tm.image_width(), a.seed)
                              : io::read_png(a.image);
  if (image.height() != tm.image_height() || image.width() != tm.image_width()) {
    throw DimensionError("audit image does not match the mask set geometry");
  }

  std::set<std::string> checks(a.checks.begin(), a.checks.end());
  if (checks.empty()) checks = {"erasure", "soundness", "attack"};
  const Backends b = a.backend.make();
  const oracle::PatchBattery battery(a.battery, a.seed);
  const oracle::AuditSetup setup{ms, *b.demasker, *b.segmenter, tm.num_patches(),
                                 a.two_patch_samples, a.seed};

  json report{{"scheme", ms.scheme},
              {"kind", to_string(ms.kind)},
              {"K", ms.size()},
              {"image_height", tm.image_height()},
              {"image_width", tm.image_width()},
              {"patch_height", tm.patch_height()},
              {"patch_width", tm.patch_width()},
              {"N", tm.num_patches()},
              {"locations", tm.location_count()},
              {"battery", battery.size()},
              {"seed", a.seed},
              {"backends", {{"demasker", b.demasker->fingerprint()},
                            {"segmenter", b.segmenter->fingerprint()}}}};
  json results = json::array();
  std::size_t violations = 0;

  if (checks.count("erasure")) {
    const auto r = oracle::audit_masking_erasure(image, ms, tm, battery);
    violations += r.violations.size();
    results.push_back(reports::erasure_json(r));
  }
  if (checks.count("soundness")) {
    const auto r = ms.kind == MaskSetKind::recovery
                       ? oracle::audit_recovery_soundness(image, setup, battery)
                       : oracle::audit_detection_soundness(image, setup, battery);
    violations += r.violations.size();
    results.push_back(reports::soundness_json(r));
  }
  if (checks.count("attack")) {
    if (ms.kind == MaskSetKind::recovery) {
      const CertifiedOutput clean =
          certify_recovery(image, ms, *b.demasker, *b.segmenter, tm.num_patches());
      const auto model = [&](const ImageGrid& x) {
        return recovery_vote(build_segmentation_set(x, ms, *b.demasker, *b.segmenter))
            .segmentation;
      };
      const auto found = oracle::attack_search(image, clean.segmentation, model,
                                               tm.with_patches(1), a.attack_budget, a.seed);
      const SegMap attacked = model(paste_patch(image, found.patch, found.location));
      bool untouched = true;
      for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c)
          if (clean.cert_map.at(r, c) && attacked.at(r, c) != clean.segmentation.at(r, c))
            untouched = false;
      if (!untouched) ++violations;
      results.push_back(reports::attack_json(found, untouched));
    } else {
      const CertifiedOutput clean = certify_detection(image, ms, *b.demasker, *b.segmenter);
      const auto model = [&](const ImageGrid& x) { return b.segmenter->segment(x); };
      const auto found = oracle::attack_search(image, clean.segmentation, model, tm,
                                               a.attack_budget, a.seed);
      const ImageGrid x = paste_patch(image, found.patch, found.location);
      const CertifiedOutput v = detection_verify(
          b.segmenter->segment(x), build_segmentation_set(x, ms, *b.demasker, *b.segmenter));
      bool untouched = true;
      for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c)
          if (clean.cert_map.at(r, c) && v.cert_map.at(r, c) &&
              v.segmentation.at(r, c) != clean.segmentation.at(r, c))
            untouched = false;
      if (!untouched) ++violations;
      results.push_back(reports::attack_json(found, untouched));
    }
  }
  report["results"] = results;
  report["violations"] = violations;

  const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    io::write_text_atomic(fs::path(a.out) / "audit.json", text);
    io::write_text_atomic(fs::path(a.out) / "timing.json",
                          json{{"wall_time_ms", wall_ms}}.dump(2) + "\n");
  }
  std::cerr << "audit: " << violations << " violations, " << wall_ms << " ms\n";
  if (violations > 0) throw AuditFailure("audit found " + std::to_string(violations) + " violations");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified recovery and detection for segmentation under patch attacks"};
  app.require_subcommand(1);

  GenMasksArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-masks", "build, verify and save a mask set");
  gen.geometry.add(gen_cmd, true);
  gen_cmd->add_option("--scheme", gen.scheme)
      ->check(CLI::IsMember({"col", "row", "3mask", "4mask", "det-col", "det-row"}));
  gen_cmd->add_option("--k", gen.k, "number of masks (recovery schemes)");
  gen_cmd->add_option("--mask-width", gen.mask_width, "detection stripe width W''");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  CertifyArgs cert;
  auto* cert_cmd = app.add_subcommand("certify", "certify an image or a directory of images");
  cert_cmd->add_option("--image", cert.image, "PNG image or directory of PNGs")->required();
  cert_cmd->add_option("--masks", cert.masks, "mask set directory")->required();
  cert_cmd->add_option("--mode", cert.mode)->check(CLI::IsMember({"recovery", "detection"}));
  cert.backend.add(cert_cmd);
  cert_cmd->add_option("--n-patches", cert.n_patches)->check(CLI::PositiveNumber);
  cert_cmd->add_option("--out", cert.out, "output directory")->required();
  cert_cmd->add_option("--jobs", cert.jobs, "parallel workers in directory mode")
      ->check(CLI::PositiveNumber);
  cert_cmd->add_flag("--colorize", cert.colorize, "also write palette PNGs");
  cert_cmd->add_flag("--allow-nondeterministic", cert.allow_nondeterministic);
  cert_cmd->add_flag("--probe-determinism", cert.probe);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "aggregate metrics into eval.json");
  eval_cmd->add_option("--pred", ev.pred)->required();
  eval_cmd->add_option("--cert", ev.cert);
  eval_cmd->add_option("--gt", ev.gt)->required();
  eval_cmd->add_option("--num-classes", ev.num_classes)->required()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--big-threshold", ev.big_threshold);
  eval_cmd->add_option("--ignore-label", ev.ignore_label);
  eval_cmd->add_option("--out", ev.out, "eval.json path (stdout if omitted)");

  AuditArgs au;
  auto* audit_cmd = app.add_subcommand("audit", "brute-force soundness audits");
  au.geometry.add(audit_cmd, false);
  audit_cmd->add_option("--scheme", au.scheme)
      ->check(CLI::IsMember({"col", "row", "3mask", "4mask", "det-col", "det-row"}));
  audit_cmd->add_option("--masks", au.masks, "mask set directory instead of --scheme");
  audit_cmd->add_option("--k", au.k);
  audit_cmd->add_option("--mask-width", au.mask_width);
  audit_cmd->add_option("--image", au.image, "PNG to audit (default: synthetic scene)");
  audit_cmd->add_option("--seed", au.seed);
  audit_cmd->add_option("--battery", au.battery, "random patch contents besides 0 and 1");
  audit_cmd->add_option("--checks", au.checks, "erasure, soundness, attack")
      ->check(CLI::IsMember({"erasure", "soundness", "attack"}));
  audit_cmd->add_option("--two-patch-samples", au.two_patch_samples);
  audit_cmd->add_option("--attack-budget", au.attack_budget);
  au.backend.add(audit_cmd);
  audit_cmd->add_option("--out", au.out, "directory for audit.json");

  std::vector<std::string> raw(argv, argv + argc);
  std::vector<std::string> args;
  try {
    args = apply_config(raw);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<char*> cargs;
  for (auto& s : args) cargs.push_back(s.data());

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_masks(gen);
    if (*cert_cmd) return run_certify(cert);
    if (*eval_cmd) return run_eval(ev);
    if (*audit_cmd) return run_audit(au);
  } catch (const AuditFailure& e) {
    std::cerr << "audit failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const InsufficientMasksError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const BackendError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
