#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "patchcert/backend.hpp"
#include "patchcert/certifier.hpp"
#include "patchcert/errors.hpp"
#include "patchcert/maskgen.hpp"
#include "patchcert/metrics.hpp"
#include "patchcert/reports.hpp"
#include "patchcert/threat.hpp"

namespace py = pybind11;
using namespace patchcert;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<Label, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

ImageGrid image_from_array(const FloatArray& a) {
  if (a.ndim() == 2) {
    return ImageGrid(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), 1,
                     std::vector<float>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 3) throw DimensionError("image must be HxW or HxWxC");
  return ImageGrid(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                   static_cast<int>(a.shape(2)),
                   std::vector<float>(a.data(), a.data() + a.size()));
}

SegMap segmap_from_array(const LabelArray& a, int num_classes, std::optional<Label> ignore) {
  if (a.ndim() != 2) throw DimensionError("label map must be HxW");
  return SegMap(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), num_classes,
                std::vector<Label>(a.data(), a.data() + a.size()), ignore);
}

BinaryMap binary_from_array(const BoolArray& a) {
  if (a.ndim() != 2) throw DimensionError("binary map must be HxW");
  std::vector<std::uint8_t> bits(a.data(), a.data() + a.size());
  return BinaryMap(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), std::move(bits));
}

py::array_t<Label> segmap_to_array(const SegMap& s) {
  py::array_t<Label> out({s.height(), s.width()});
  std::copy(s.labels().begin(), s.labels().end(), out.mutable_data());
  return out;
}

py::array_t<bool> binary_to_array(const BinaryMap& m) {
  py::array_t<bool> out({m.height(), m.width()});
  auto* p = out.mutable_data();
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) *p++ = m.at(r, c);
  return out;
}

py::array_t<bool> masks_to_array(const MaskSet& ms) {
  const int h = ms.threat.image_height();
  const int w = ms.threat.image_width();
  py::array_t<bool> out({ms.size(), h, w});
  auto* p = out.mutable_data();
  for (const auto& m : ms.masks)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) *p++ = m.visible(r, c);
  return out;
}

py::tuple result_tuple(const CertifiedOutput& out) {
  return py::make_tuple(segmap_to_array(out.segmentation), binary_to_array(out.cert_map));
}

SegSet segset_from_array(const LabelArray& segs, int num_classes) {
  if (segs.ndim() != 3) throw DimensionError("segmentation stack must be KxHxW");
  SegSet set;
  const auto h = segs.shape(1);
  const auto w = segs.shape(2);
  for (py::ssize_t k = 0; k < segs.shape(0); ++k) {
    const Label* begin = segs.data() + k * h * w;
    set.entries.emplace_back(static_cast<int>(h), static_cast<int>(w), num_classes,
                             std::vector<Label>(begin, begin + h * w));
  }
  return set;
}

}  // namespace

PYBIND11_MODULE(_patchcert, m) {
  m.doc() = "Certified recovery and detection for segmentation under patch attacks";

  auto base = py::register_exception<Error>(m, "PatchcertError", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
  py::register_exception<VerificationError>(m, "VerificationError", base.ptr());
  py::register_exception<InsufficientMasksError>(m, "InsufficientMasksError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());

  py::class_<ThreatModel>(m, "ThreatModel")
      .def(py::init<int, int, int, int, int>(), py::arg("image_height"), py::arg("image_width"),
           py::arg("patch_height"), py::arg("patch_width"), py::arg("num_patches") = 1)
      .def_property_readonly("image_height", &ThreatModel::image_height)
      .def_property_readonly("image_width", &ThreatModel::image_width)
      .def_property_readonly("patch_height", &ThreatModel::patch_height)
      .def_property_readonly("patch_width", &ThreatModel::patch_width)
      .def_property_readonly("num_patches", &ThreatModel::num_patches)
      .def_property_readonly("location_count", &ThreatModel::location_count);

  py::class_<MaskSet>(m, "MaskSet")
      .def_property_readonly("kind", [](const MaskSet& ms) { return to_string(ms.kind); })
      .def_readonly("scheme", &MaskSet::scheme)
      .def_readonly("threat", &MaskSet::threat)
      .def_readonly("declared_strength", &MaskSet::declared_strength)
      .def_readonly("block_assignment", &MaskSet::block_assignment)
      .def_readonly("stripe_width", &MaskSet::stripe_width)
      .def_readonly("stripe_offsets", &MaskSet::stripe_offsets)
      .def_readonly("warnings", &MaskSet::warnings)
      .def_property_readonly("masks", &masks_to_array, "K x H x W, True where visible")
      .def("__len__", &MaskSet::size);

  m.def("square_patch_side", &square_patch_side, py::arg("fraction"), py::arg("image_height"),
        py::arg("image_width"));

  m.def(
      "build_masks",
      [](const std::string& scheme, const ThreatModel& tm, int k, int mask_width) {
        return build_scheme(scheme, tm, k, mask_width);
      },
      py::arg("scheme"), py::arg("threat"), py::arg("k") = 0, py::arg("mask_width") = 0);

  m.def("compute_strength", &compute_strength, py::arg("masks"), py::arg("threat"));
  m.def(
      "verify_detection_coverage",
      [](const MaskSet& ms) { return verify_detection_coverage(ms, ms.threat); },
      py::arg("masks"));
  m.def("min_recovery_masks", &min_recovery_masks, py::arg("strength"),
        py::arg("num_patches") = 1);

  m.def(
      "certify",
      [](const FloatArray& image, const MaskSet& ms, const std::string& mode, int num_patches) {
        const ImageGrid x = image_from_array(image);
        const NearestFillDemasker g;
        const DominantChannelSegmenter f;
        if (mode == "recovery") return result_tuple(certify_recovery(x, ms, g, f, num_patches));
        if (mode == "detection") return result_tuple(certify_detection(x, ms, g, f));
        throw py::value_error("mode must be 'recovery' or 'detection'");
      },
      py::arg("image"), py::arg("masks"), py::arg("mode") = "recovery",
      py::arg("num_patches") = 1,
      "Certifies an RGB image with the bundled toy demasker and segmenter. "
      "Returns (labels, certified).");

  m.def(
      "recovery_vote",
      [](const LabelArray& segs, int num_classes) {
        return result_tuple(recovery_vote(segset_from_array(segs, num_classes)));
      },
      py::arg("segmentations"), py::arg("num_classes"));

  m.def(
      "detection_verify",
      [](const LabelArray& base, const LabelArray& segs, int num_classes) {
        return result_tuple(detection_verify(segmap_from_array(base, num_classes, std::nullopt),
                                             segset_from_array(segs, num_classes)));
      },
      py::arg("base"), py::arg("segmentations"), py::arg("num_classes"));

  m.def(
      "evaluate",
      [](const std::vector<LabelArray>& preds, const std::vector<std::optional<BoolArray>>& certs,
         const std::vector<LabelArray>& gts, int num_classes, std::optional<int> ignore_label,
         double big_threshold) {
        if (preds.size() != gts.size() || (!certs.empty() && certs.size() != gts.size())) {
          throw DimensionError("preds, certs and gts must have the same length");
        }
        std::optional<Label> ignore;
        if (ignore_label) ignore = static_cast<Label>(*ignore_label);
        metrics::DatasetAggregate agg(num_classes);
        bool has_cert = !certs.empty();
        for (std::size_t i = 0; i < gts.size(); ++i) {
          const SegMap pred = segmap_from_array(preds[i], num_classes, std::nullopt);
          const SegMap gt = segmap_from_array(gts[i], num_classes, ignore);
          std::optional<BinaryMap> cert;
          if (has_cert && certs[i]) cert = binary_from_array(*certs[i]);
          agg.add(metrics::evaluate_image(pred, cert ? &*cert : nullptr, gt, num_classes));
        }
        const auto text = reports::eval_json(agg, big_threshold, has_cert).dump();
        return py::module_::import("json").attr("loads")(text);
      },
      py::arg("preds"), py::arg("certs"), py::arg("gts"), py::arg("num_classes"),
      py::arg("ignore_label") = py::none(), py::arg("big_threshold") = 0.20,
      "Dataset metrics in the same layout as eval.json.");
}
