#include "patchcert/reports.hpp"

#include "patchcert/io.hpp"

namespace patchcert::reports {

namespace {

json placement_json(const oracle::Placement& placement) {
  json arr = json::array();
  for (const auto& loc : placement) {
    arr.push_back({{"top", loc.top}, {"left", loc.left}, {"height", loc.height},
                   {"width", loc.width}});
  }
  return arr;
}

}  // namespace

json cert_json(const CertifiedOutput& out, const CertProvenance& provenance) {
  json j;
  j["mode"] = to_string(out.mode);
  j["K"] = out.meta.num_masks;
  j["T"] = out.mode == CertMode::recovery ? json(out.meta.strength) : json(nullptr);
  j["N"] = out.meta.num_patches;
  j["scheme"] = out.meta.scheme;
  j["height"] = out.segmentation.height();
  j["width"] = out.segmentation.width();
  j["num_classes"] = out.segmentation.num_classes();
  j["certified_pixels"] = out.cert_map.count();
  j["backends"] = {{"demasker", provenance.demasker}, {"segmenter", provenance.segmenter}};
  if (!provenance.image.empty()) j["image"] = provenance.image;
  return j;
}

void write_certified_output(const std::filesystem::path& dir, const CertifiedOutput& out,
                            const CertProvenance& provenance, bool colorize) {
  std::filesystem::create_directories(dir);
  io::write_segmap(dir / ("segmentation" + io::segmap_extension(out.segmentation)),
                   out.segmentation);
  io::write_binary_map(dir / "cert.pgm", out.cert_map);
  if (colorize) {
    io::write_png(dir / "segmentation.png", io::colorize(out.segmentation));
    io::write_png(dir / "certified.png", io::colorize(out.segmentation, &out.cert_map));
  }
  io::write_text_atomic(dir / "cert.json", cert_json(out, provenance).dump(2) + "\n");
}

json eval_json(const metrics::DatasetAggregate& agg, double big_threshold, bool has_cert) {
  json per_class = json::array();
  for (int k = 0; k < agg.num_classes(); ++k) {
    const auto& c = agg.totals()[static_cast<std::size_t>(k)];
    json row{{"class", k}, {"TP", c.tp}, {"FN", c.fn}, {"FP", c.fp}, {"P", c.positives()}};
    if (has_cert) row["cTP"] = c.ctp;
    const auto p = c.positives();
    row["R"] = p > 0 ? json(static_cast<double>(c.tp) / static_cast<double>(p)) : json(nullptr);
    if (has_cert) {
      row["cR"] = p > 0 ? json(static_cast<double>(c.ctp) / static_cast<double>(p)) : json(nullptr);
    }
    const auto u = c.tp + c.fn + c.fp;
    row["IoU"] = u > 0 ? json(static_cast<double>(c.tp) / static_cast<double>(u)) : json(nullptr);
    per_class.push_back(row);
  }

  json dataset;
  dataset["images"] = agg.image_count();
  dataset["mIoU"] = metrics::miou(agg);
  const auto all = metrics::mean_recall(agg);
  dataset["mR"] = all.mean_recall;
  if (has_cert) {
    dataset["cmR"] = all.certified_mean_recall;
    dataset["%C"] = metrics::percent_certified(agg);
  }

  const auto big = metrics::select_big_classes(agg.presence(), big_threshold);
  json big_j{{"threshold", big_threshold}, {"classes", big}};
  if (!big.empty()) {
    const auto r = metrics::mean_recall(agg, big);
    big_j["mR"] = r.mean_recall;
    if (has_cert) big_j["cmR"] = r.certified_mean_recall;
  }
  return json{{"per_class", per_class}, {"dataset", dataset}, {"big_classes", big_j}};
}

json erasure_json(const oracle::ErasureReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"location", placement_json({v.location})[0]},
                          {"mask", v.mask_index},
                          {"content", v.content_index}});
  }
  return {{"audit", "masking_erasure"}, {"scheme", report.scheme},
          {"locations", report.locations}, {"masks", report.masks},
          {"battery", report.battery_size}, {"checks", report.checks},
          {"violations", violations}};
}

json soundness_json(const oracle::SoundnessReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"placement", placement_json(v.placement)},
                          {"content", v.content_index},
                          {"row", v.row},
                          {"col", v.col},
                          {"expected", v.expected},
                          {"observed", v.observed}});
  }
  return {{"audit", report.mode == CertMode::recovery ? "recovery_soundness"
                                                       : "detection_soundness"},
          {"scheme", report.scheme},
          {"N", report.num_patches},
          {"locations", report.placements},
          {"battery", report.battery_size},
          {"patched_inputs", report.patched_inputs},
          {"certified_pixels", report.certified_pixels},
          {"pixel_checks", report.pixel_checks},
          {"violations", violations}};
}

json attack_json(const oracle::AttackResult& result, bool certified_pixels_untouched) {
  return {{"audit", "attack_search"},
          {"trials", result.trials},
          {"clean_accuracy", result.clean_quality},
          {"attacked_accuracy", result.quality},
          {"location", placement_json({result.location})[0]},
          {"patch_bytes_checksum", [&] {
             std::uint64_t h = 1469598103934665603ull;
             for (auto b : result.patch.to_bytes()) h = (h ^ b) * 1099511628211ull;
             return h;
           }()},
          {"certified_pixels_untouched", certified_pixels_untouched}};
}

}  // namespace patchcert::reports
