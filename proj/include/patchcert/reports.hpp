#pragma once

// JSON and file outputs: cert.json, eval.json, audit.json.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "patchcert/certifier.hpp"
#include "patchcert/metrics.hpp"
#include "patchcert/oracle.hpp"

namespace patchcert::reports {

using json = nlohmann::json;

struct CertProvenance {
  std::string demasker;
  std::string segmenter;
  std::string image;
};

json cert_json(const CertifiedOutput& out, const CertProvenance& provenance);

/// Writes segmentation.{pgm,seg}, cert.pgm and cert.json into dir, plus
/// colorized PNGs when requested.
void write_certified_output(const std::filesystem::path& dir, const CertifiedOutput& out,
                            const CertProvenance& provenance, bool colorize = false);

json eval_json(const metrics::DatasetAggregate& agg, double big_threshold, bool has_cert);

json erasure_json(const oracle::ErasureReport& report);
json soundness_json(const oracle::SoundnessReport& report);
json attack_json(const oracle::AttackResult& result, bool certified_pixels_untouched);

}  // namespace patchcert::reports
