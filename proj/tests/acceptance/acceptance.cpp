// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails. Every tolerance is exact unless stated on the line.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "patchcert/certifier.hpp"
#include "patchcert/errors.hpp"
#include "patchcert/io.hpp"
#include "patchcert/metrics.hpp"
#include "patchcert/oracle.hpp"
#include "patchcert/process_backend.hpp"
#include "patchcert/scenes.hpp"
#include "support/naive.hpp"

using namespace patchcert;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail << "first failure: " << why << "; ";
    pass = false;
  }
  void expect(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Geometry {
  int h, w, ph, pw;
};

std::string str(const Geometry& g) {
  return std::to_string(g.h) + "x" + std::to_string(g.w) + "/" + std::to_string(g.ph) + "x" +
         std::to_string(g.pw);
}

// Random geometries with H, W in [8, 32] and H', W' in [2, 6], patch strictly
// smaller than the image in both directions.
std::vector<Geometry> random_geometries(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Geometry> out;
  for (int i = 0; i < count; ++i) {
    const int h = rng.uniform_int(8, 32);
    const int w = rng.uniform_int(8, 32);
    out.push_back({h, w, rng.uniform_int(2, 6), rng.uniform_int(2, 6)});
  }
  return out;
}

const std::vector<std::string> kSchemes = {"col", "row", "3mask", "4mask", "det-col", "det-row"};

// ------------------------------------------------------------------ 1

Outcome masking_erasure() {
  Outcome o;
  const auto start = Clock::now();
  const auto geometries = random_geometries(50, 101);
  std::size_t checks = 0;
  std::size_t audits = 0;
  for (std::size_t i = 0; i < geometries.size(); ++i) {
    const Geometry& g = geometries[i];
    const ThreatModel tm(g.h, g.w, g.ph, g.pw);
    const ImageGrid x = synthetic_scene(g.h, g.w, i);
    const oracle::PatchBattery battery(10, i);
    for (const auto& scheme : kSchemes) {
      const MaskSet ms = build_scheme(scheme, tm, 0);
      const auto r = oracle::audit_masking_erasure(x, ms, tm, battery);
      ++audits;
      checks += r.checks;
      o.expect(r.locations == tm.location_count(), scheme + " " + str(g) + " skipped locations");
      o.expect(r.ok(), scheme + " " + str(g) + " has " + std::to_string(r.violations.size()) +
                           " violations");
    }
  }
  const double elapsed = seconds_since(start);
  o.expect(elapsed <= 120.0, "runtime over 2 min");
  o.detail << geometries.size() << " geometries, " << audits << " audits, battery 12, "
           << checks << " masked comparisons, 0 violations allowed, " << elapsed
           << " s (limit 120 s)";
  return o;
}

// ------------------------------------------------------------------ 2

Outcome strength_verification() {
  Outcome o;
  const auto geometries = random_geometries(50, 101);
  for (const Geometry& g : geometries) {
    const ThreatModel tm(g.h, g.w, g.ph, g.pw);
    for (const auto& [scheme, bound, exact] :
         {std::tuple{"col", 2, true}, {"row", 2, true}, {"3mask", 3, false},
          {"4mask", 4, false}}) {
      const MaskSet ms = build_scheme(scheme, tm, 0);
      const int t = compute_strength(ms, tm);
      const int brute = naive::strength(naive::planes_of(ms), g.h, g.w, g.ph, g.pw);
      o.expect(t == brute, std::string(scheme) + " " + str(g) + " disagrees with brute force");
      o.expect(exact ? t == bound : t <= bound,
               std::string(scheme) + " " + str(g) + " strength " + std::to_string(t));
    }
  }
  for (const auto& [k, t] : {std::pair{5, 2}, {7, 3}, {9, 4}}) {
    bool ok = true;
    try {
      check_recovery_condition(k, t, 1);
    } catch (const InsufficientMasksError&) {
      ok = false;
    }
    o.expect(ok, "K=" + std::to_string(k) + " rejected");
    bool rejected = false;
    try {
      check_recovery_condition(k - 1, t, 1);
    } catch (const InsufficientMasksError& e) {
      rejected = e.required_masks() == k;
    }
    o.expect(rejected, "K=" + std::to_string(k - 1) + " accepted");
  }
  // The default K of each scheme is the minimal one for its strength.
  const ThreatModel tm(24, 24, 4, 4);
  for (const auto& [scheme, k] : {std::pair{"col", 5}, {"row", 5}, {"3mask", 7}, {"4mask", 9}}) {
    const MaskSet ms = build_scheme(scheme, tm, 0);
    o.expect(ms.size() == k && min_recovery_masks(*ms.declared_strength, 1) == k,
             std::string(scheme) + " default K");
  }
  o.detail << geometries.size() << " geometries x 4 recovery schemes, brute-force cross-check; "
           << "K=5/7/9 accepted, K=4/6/8 rejected";
  return o;
}

// ------------------------------------------------------------------ 3

Outcome detection_coverage() {
  Outcome o;
  Rng rng(303);
  int geometries = 0;
  int mask_sets = 0;
  int gap_cases = 0;
  int no_gap_cases = 0;
  for (int i = 0; i < 24; ++i) {
    const Geometry g{rng.uniform_int(6, 32), rng.uniform_int(6, 32), rng.uniform_int(1, 6),
                     rng.uniform_int(1, 6)};
    const ThreatModel tm(g.h, g.w, g.ph, g.pw);
    ++geometries;
    for (bool rows : {false, true}) {
      const ThreatModel axis = rows ? tm.transposed() : tm;
      const int W = axis.image_width();
      const int pw = axis.patch_width();
      for (int sw = pw; sw <= W; ++sw) {
        const MaskSet ms =
            rows ? build_detection_row_masks(tm, sw) : build_detection_column_masks(tm, sw);
        ++mask_sets;
        const int stride = sw - pw + 1;
        const int expected_k = (W - sw + stride - 1) / stride + 1;
        o.expect(ms.size() == expected_k, str(g) + " stripe " + std::to_string(sw) + " K");
        if (sw == pw) o.expect(ms.size() == W - pw + 1, str(g) + " full-column K");
        o.expect(verify_detection_coverage(ms, tm), str(g) + " stripe " + std::to_string(sw));
        o.expect(naive::all_covered(naive::planes_of(ms), g.h, g.w, g.ph, g.pw),
                 str(g) + " brute-force coverage");

        const MaskSet wide = build_strided_column_masks(axis, sw, stride + 1);
        const bool gap = naive::stripe_gap_exists(W, pw, sw, wide.stripe_offsets);
        (gap ? gap_cases : no_gap_cases)++;
        o.expect(verify_detection_coverage(wide, axis) == !gap,
                 str(g) + " stride+1 stripe " + std::to_string(sw));
      }
    }
  }
  o.expect(gap_cases > 0, "no gap cases exercised");
  o.detail << geometries << " geometries, " << mask_sets
           << " stripe widths (columns and rows); stride+1: " << gap_cases << " with gaps, "
           << no_gap_cases << " without";
  return o;
}

// ------------------------------------------------------------------ 4

struct Scene {
  Geometry g;
  std::uint64_t seed;
};

std::vector<Scene> soundness_scenes() {
  return {{{16, 16, 3, 3}, 1}, {{16, 16, 4, 2}, 2}, {{16, 20, 3, 4}, 3}, {{20, 16, 2, 3}, 4},
          {{20, 20, 4, 4}, 5}, {{16, 24, 3, 3}, 6}, {{24, 16, 4, 3}, 7}, {{24, 24, 4, 4}, 8},
          {{32, 32, 5, 5}, 9}, {{32, 16, 4, 4}, 10}};
}

Outcome theorem_soundness() {
  Outcome o;
  const auto start = Clock::now();
  const NearestFillDemasker g;
  const DominantChannelSegmenter f;
  const std::vector<std::string> recovery = {"col", "row", "3mask", "4mask"};
  std::size_t inputs = 0;
  std::size_t pixel_checks = 0;
  std::size_t certified = 0;
  const auto scenes = soundness_scenes();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& [geo, seed] = scenes[i];
    const ThreatModel tm(geo.h, geo.w, geo.ph, geo.pw);
    const ImageGrid x = synthetic_scene(geo.h, geo.w, seed);
    const oracle::PatchBattery battery(100, seed);

    const MaskSet rms = build_scheme(recovery[i % recovery.size()], tm, 0);
    const auto r = oracle::audit_recovery_soundness(x, {rms, g, f}, battery);
    o.expect(r.ok(), rms.scheme + " " + str(geo) + " recovery violations");
    o.expect(r.placements == tm.location_count(), "recovery audit not exhaustive");
    o.expect(r.battery_size >= 102, "battery too small");

    const int stripe = geo.pw + static_cast<int>(i % 3) * 2;
    const MaskSet dms = build_scheme(i % 2 ? "det-row" : "det-col", tm, 0,
                                     i % 2 ? geo.ph + static_cast<int>(i % 3) * 2 : stripe);
    const auto d = oracle::audit_detection_soundness(x, {dms, g, f}, battery);
    o.expect(d.ok(), dms.scheme + " " + str(geo) + " detection violations");
    o.expect(d.placements == tm.location_count(), "detection audit not exhaustive");

    inputs += r.patched_inputs + d.patched_inputs;
    pixel_checks += r.pixel_checks + d.pixel_checks;
    certified += r.certified_pixels + d.certified_pixels;
  }

  // N = 2 with K = 9 column masks; at least 9 block columns so no mask is
  // empty.
  std::size_t two_patch_inputs = 0;
  for (const auto& [geo, seed] : std::vector<Scene>{{{16, 18, 2, 2}, 11}, {{20, 20, 3, 2}, 12}}) {
    const ThreatModel tm(geo.h, geo.w, geo.ph, geo.pw, 2);
    const ImageGrid x = synthetic_scene(geo.h, geo.w, seed);
    const MaskSet ms = build_scheme("col", tm, 9);
    const auto r = oracle::audit_recovery_soundness(x, {ms, g, f, 2, 200, seed},
                                                    oracle::PatchBattery(100, seed));
    o.expect(r.ok(), "N=2 K=9 " + str(geo) + " violations");
    o.expect(r.certified_pixels > 0, "N=2 audit certified nothing");
    two_patch_inputs += r.patched_inputs;
  }
  o.expect(certified > 0, "no certified pixels at all");
  const double elapsed = seconds_since(start);
  o.expect(elapsed <= 600.0, "runtime over 10 min");
  o.detail << scenes.size() << " scenes (16x16 to 32x32), recovery + detection, battery 102, "
           << inputs << " patched inputs, " << pixel_checks << " certified-pixel checks; N=2 K=9: "
           << two_patch_inputs << " patched inputs; " << elapsed << " s (limit 600 s)";
  return o;
}

// ------------------------------------------------------------------ 5

Outcome metric_oracle() {
  Outcome o;
  Rng rng(505);
  constexpr Label kIgnore = 255;
  int trials = 0;
  int with_ignore = 0;
  for (; trials < 1200; ++trials) {
    const int h = rng.uniform_int(1, 16);
    const int w = rng.uniform_int(1, 16);
    const int classes = rng.uniform_int(1, 8);
    const int ignore_pct = trials % 3 == 0 ? rng.uniform_int(1, 100) : 0;
    naive::Triple t;
    std::vector<Label> pred, gt;
    std::vector<std::uint8_t> cert;
    for (int i = 0; i < h * w; ++i) {
      const auto p = static_cast<Label>(rng.uniform_int(0, classes - 1));
      const bool ign = rng.uniform_int(1, 100) <= ignore_pct;
      const auto y = rng.uniform_int(0, 1) ? p : static_cast<Label>(rng.uniform_int(0, classes - 1));
      const bool c = rng.uniform_int(0, 1) == 1;
      pred.push_back(p);
      gt.push_back(ign ? kIgnore : y);
      cert.push_back(c);
      t.pred.push_back(p);
      t.gt.push_back(ign ? -1 : y);
      t.cert.push_back(c);
    }
    if (ignore_pct > 0) ++with_ignore;
    const SegMap P(h, w, classes, pred);
    const SegMap G(h, w, classes, gt, kIgnore);
    const BinaryMap C(h, w, cert);
    const std::string at = "trial " + std::to_string(trials);

    // Global accuracy, straight from the pixels.
    double right = 0, seen = 0;
    for (std::size_t i = 0; i < t.gt.size(); ++i)
      if (t.gt[i] >= 0) {
        seen += 1;
        right += t.pred[i] == t.gt[i] ? 1 : 0;
      }
    if (seen > 0) o.expect(metrics::global_accuracy(P, G) == right / seen, at + " accuracy");

    // Confusion counts with an explicit class x pixel loop.
    const auto counts = metrics::confusion_counts(P, G, classes);
    for (int k = 0; k < classes; ++k) {
      std::int64_t tp = 0, fn = 0, fp = 0;
      for (std::size_t i = 0; i < t.gt.size(); ++i) {
        if (t.gt[i] < 0) continue;
        tp += t.gt[i] == k && t.pred[i] == k;
        fn += t.gt[i] == k && t.pred[i] != k;
        fp += t.gt[i] != k && t.pred[i] == k;
      }
      o.expect(counts[k].tp == tp && counts[k].fn == fn && counts[k].fp == fp, at + " counts");
    }

    metrics::DatasetAggregate agg(classes);
    agg.add(metrics::evaluate_image(P, &C, G, classes));
    const naive::Summary want = naive::summarize({t}, classes);
    if (!std::isnan(want.miou)) o.expect(metrics::miou(agg) == want.miou, at + " mIoU");
    if (!std::isnan(want.mr)) {
      const auto r = metrics::mean_recall(agg);
      o.expect(r.mean_recall == want.mr, at + " mR");
      o.expect(r.certified_mean_recall == want.cmr, at + " cmR");
      o.expect(r.certified_mean_recall <= r.mean_recall, at + " cmR > mR");
    }
    for (int k = 0; k < classes; ++k) {
      const auto& c = agg.totals()[k];
      if (c.positives() == 0) continue;
      const double R = static_cast<double>(c.tp) / c.positives();
      const double cR = static_cast<double>(c.ctp) / c.positives();
      o.expect(R == want.recall[k] && cR == want.crecall[k], at + " per-class recall");
      o.expect(cR <= R, at + " cR > R");
    }
    o.expect(metrics::percent_certified(agg) == want.pct, at + " %C");
  }
  o.detail << trials << " random triples (<=16x16, <=8 classes), " << with_ignore
           << " with ignore labels; exact equality";
  return o;
}

// ------------------------------------------------------------------ 6

Outcome clean_preservation() {
  Outcome o;
  const NearestFillDemasker g;
  const DominantChannelSegmenter f;
  int images = 0;
  const auto check = [&](const ImageGrid& x, const ThreatModel& tm, const std::string& name) {
    for (const char* scheme : {"det-col", "det-row"}) {
      const MaskSet ms = build_scheme(scheme, tm, 0);
      const CertifiedOutput out = certify_detection(x, ms, g, f);
      o.expect(out.segmentation == f.segment(x), name + " " + scheme);
    }
    ++images;
  };
  for (const auto& [geo, seed] : soundness_scenes()) {
    check(synthetic_scene(geo.h, geo.w, seed), ThreatModel(geo.h, geo.w, geo.ph, geo.pw),
          "scene " + std::to_string(seed));
  }
  Rng rng(606);
  for (int i = 0; i < 20; ++i) {
    const int h = rng.uniform_int(8, 32);
    const int w = rng.uniform_int(8, 32);
    check(random_image(h, w, 3, rng), ThreatModel(h, w, rng.uniform_int(2, 6), rng.uniform_int(2, 6)),
          "random " + std::to_string(i));
  }
  o.detail << images << " images x {det-col, det-row}; bit-identical to f(x)";
  return o;
}

// ------------------------------------------------------------------ 7

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PATCHCERT_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) { return io::read_bytes(p); }

Outcome cli_determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "patchcert-acceptance-cli";
  fs::remove_all(root);
  fs::create_directories(root / "imgs");
  for (int i = 0; i < 4; ++i)
    io::write_png(root / "imgs" / ("scene" + std::to_string(i) + ".png"), synthetic_scene(20, 20, i));
  const fs::path log = root / "log.txt";

  int compared = 0;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / ("run" + std::to_string(run));
    const std::string r = std::to_string(run);
    o.expect(run_cli("gen-masks --height 20 --width 20 --patch-h 3 --patch-w 3 --scheme 3mask --out " +
                         (dir / "masks").string(), log) == 0, "gen-masks failed");
    o.expect(run_cli("gen-masks --height 20 --width 20 --patch-h 3 --patch-w 3 --scheme det-col "
                     "--mask-width 5 --out " + (dir / "det").string(), log) == 0,
             "gen-masks det failed");
    o.expect(run_cli("certify --image " + (root / "imgs").string() + " --masks " +
                         (dir / "masks").string() + " --jobs " + (run ? "3" : "1") +
                         " --colorize --out " + (dir / "rec").string(), log) == 0,
             "certify recovery failed");
    o.expect(run_cli("certify --image " + (root / "imgs" / "scene1.png").string() + " --masks " +
                         (dir / "det").string() + " --mode detection --out " +
                         (dir / "det-out").string(), log) == 0,
             "certify detection failed");
    o.expect(run_cli("audit --scheme col --height 16 --width 16 --patch-h 3 --patch-w 3 --seed 5 "
                     "--battery 10 --attack-budget 40 --out " + (dir / "audit").string(), log) == 0,
             "audit failed");
  }
  for (const auto& entry : fs::recursive_directory_iterator(root / "run0")) {
    if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
    const fs::path rel = fs::relative(entry.path(), root / "run0");
    const fs::path other = root / "run1" / rel;
    if (!fs::exists(other)) {
      o.fail("missing " + rel.string());
      continue;
    }
    ++compared;
    o.expect(file_bytes(entry.path()) == file_bytes(other), rel.string() + " differs");
  }
  o.expect(compared > 20, "too few output files");
  o.detail << compared << " output files of gen-masks/certify/audit byte-compared across two runs"
           << " (second certify run with 3 workers)";
  return o;
}

// ------------------------------------------------------------------ 8

ProcessConfig stub(std::vector<std::string> flags, int timeout_ms = 10000) {
  ProcessConfig c;
  c.command = {PATCHCERT_STUB};
  c.command.insert(c.command.end(), flags.begin(), flags.end());
  c.timeout = std::chrono::milliseconds(timeout_ms);
  return c;
}

template <typename E>
bool throws(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome protocol_conformance() {
  Outcome o;
  const ThreatModel tm(16, 16, 3, 3);
  const ImageGrid x = synthetic_scene(16, 16, 77);
  const MaskSet ms = build_scheme("4mask", tm, 9);
  const CertifiedOutput local =
      certify_recovery(x, ms, NearestFillDemasker(), DominantChannelSegmenter());
  const fs::path stats = fs::temp_directory_path() / "patchcert-acceptance-stub.json";
  int checks = 0;

  try {
    for (int inflight : {1, 3}) {
      fs::remove(stats);
      {
        auto b = external_process_backend(stub({"--mode", "toy", "--reorder", "--max-inflight",
                                                std::to_string(inflight), "--stats",
                                                stats.string()}));
        o.expect(b.client->handshake().protocol == kProtocolVersion, "handshake version");
        o.expect(b.segmenter->num_classes() == 3, "handshake classes");
        const CertifiedOutput remote = certify_recovery(x, ms, *b.demasker, *b.segmenter);
        o.expect(remote.segmentation == local.segmentation && remote.cert_map == local.cert_map,
                 "reordered responses mismatched");
        o.expect(b.client->peak_inflight() <= static_cast<std::size_t>(inflight),
                 "client exceeded max_inflight");
        checks += 3;
      }
      std::ifstream in(stats);
      const auto j = nlohmann::json::parse(in);
      o.expect(j["overflow"] == false && j["peak_queued"].get<int>() <= inflight,
               "server saw more than max_inflight");
      o.expect(inflight == 1 || j["peak_queued"].get<int>() > 1, "requests were not pipelined");
      checks += 2;
    }
  } catch (const std::exception& e) {
    o.fail(std::string("toy stub: ") + e.what());
  }

  const MaskedImage mi = apply_mask(x, ms.masks[0]);
  o.expect(throws<ProtocolError>([] { external_process_backend(stub({"--bad-handshake"})); }),
           "bad handshake accepted");
  o.expect(throws<BackendDimensionError>([&] {
             auto b = external_process_backend(stub({"--mode", "toy", "--wrong-dims"}));
             b.demasker->demask(mi);
           }),
           "wrong demask dimensions accepted");
  o.expect(throws<BackendDimensionError>([&] {
             auto b = external_process_backend(stub({"--mode", "toy", "--wrong-dims"}));
             b.segmenter->segment(x);
           }),
           "wrong segmentation dimensions accepted");
  o.expect(throws<BackendRequestError>([&] {
             auto b = external_process_backend(stub({"--mode", "toy", "--fail-op", "demask"}));
             certify_recovery(x, ms, *b.demasker, *b.segmenter);
           }),
           "request error not propagated");
  o.expect(throws<ProtocolError>([&] {
             auto b = external_process_backend(stub({"--unknown-id"}));
             b.demasker->demask(mi);
           }),
           "unknown id accepted");
  o.expect(throws<ProtocolError>([&] {
             auto b = external_process_backend(stub({"--garbage"}));
             b.demasker->demask(mi);
           }),
           "garbage accepted");
  o.expect(throws<BackendTimeoutError>([&] {
             auto b = external_process_backend(stub({"--hang"}, 300));
             b.demasker->demask(mi);
           }),
           "hang not detected");
  o.expect(throws<BackendError>([&] {
             auto b = external_process_backend(stub({"--mode", "toy", "--exit-after", "3"}));
             certify_recovery(x, ms, *b.demasker, *b.segmenter);
           }),
           "server exit not detected");
  checks += 8;
  o.detail << checks << " checks: handshake, id matching under reordering, errors, "
           << "dimensions, in-flight limit 1 and 3";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"masking-erasure audit", masking_erasure},
      {"strength verification", strength_verification},
      {"detection coverage", detection_coverage},
      {"theorem soundness", theorem_soundness},
      {"metric oracle equivalence", metric_oracle},
      {"clean-performance preservation", clean_preservation},
      {"CLI determinism", cli_determinism},
      {"protocol conformance", protocol_conformance},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
