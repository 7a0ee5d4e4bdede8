#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "rinr/archive.hpp"
#include "rinr/compressor.hpp"
#include "rinr/decoder.hpp"
#include "rinr/encoder.hpp"
#include "rinr/error.hpp"
#include "rinr/image_io.hpp"
#include "rinr/metrics.hpp"
#include "rinr/nas.hpp"

namespace py = pybind11;
using namespace rinr;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (H, W, 3) array to an image. uint8 input is scaled by 1/255, floats are taken as is.
ImageBuffer to_image(const py::array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidInput("expected an (H, W, 3) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  if (py::isinstance<py::array_t<std::uint8_t>>(a)) {
    const auto u = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(a);
    return ImageBuffer::from_u8(h, w, {u.data(), static_cast<std::size_t>(u.size())});
  }
  const auto f = F32Array::ensure(a);
  if (!f) throw InvalidInput("image array must be numeric");
  ImageBuffer img(h, w);
  std::memcpy(img.pixels.data(), f.data(), img.pixels.size() * sizeof(float));
  return img;
}

F32Array to_array(const ImageBuffer& img) {
  F32Array out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size() * sizeof(float));
  return out;
}

const LayerWeights<float>& layer(const InrModel& m, std::size_t l) {
  if (l >= m.layers.size()) throw py::index_error("layer index out of range");
  return m.layers[l];
}

QuantMode mode_from_bits(int bits) {
  if (bits == 8) return QuantMode::affine8;
  if (bits == 16) return QuantMode::affine16;
  throw InvalidInput("bits must be 8 or 16");
}

}  // namespace

PYBIND11_MODULE(_rinr, m) {
  m.doc() = "Sinusoidal implicit neural representations for compressed image datasets";

  // Translators run newest first, so bases are registered before subclasses.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  auto numeric = py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", numeric.ptr());
  py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
  auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", format.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::enum_<QuantMode>(m, "QuantMode")
      .value("none", QuantMode::none)
      .value("affine8", QuantMode::affine8)
      .value("affine16", QuantMode::affine16);

  py::class_<Architecture>(m, "Architecture")
      .def(py::init([](std::vector<int> dims, double omega) {
             Architecture a{std::move(dims), omega};
             a.validate();
             return a;
           }),
           py::arg("dims"), py::arg("omega") = 30.0)
      .def_static("from_layers", &Architecture::from_layers, py::arg("layers"), py::arg("hidden"),
                  py::arg("omega") = 30.0)
      .def_readonly("dims", &Architecture::dims)
      .def_readonly("omega", &Architecture::omega)
      .def_property_readonly("label", &Architecture::label)
      .def_property_readonly("param_count", [](const Architecture& a) { return param_count(a); })
      .def_property_readonly("weight_count", [](const Architecture& a) { return weight_count(a); })
      .def("__eq__", [](const Architecture& a, const Architecture& b) { return a == b; })
      .def("__repr__", [](const Architecture& a) { return "Architecture(" + a.label() + ")"; });

  py::class_<InrModel>(m, "InrModel")
      .def_readonly("arch", &InrModel::arch)
      .def_readonly("source_h", &InrModel::source_h)
      .def_readonly("source_w", &InrModel::source_w)
      .def_property_readonly("num_layers", [](const InrModel& s) { return s.layers.size(); })
      .def_property_readonly("pruned_count", &InrModel::pruned_count)
      .def_property_readonly("prune_ratio", &InrModel::prune_ratio)
      .def_property_readonly("quant_mode", [](const InrModel& s) { return s.quant.mode; })
      .def(
          "weights",
          [](const InrModel& s, std::size_t l) {
            const auto& L = layer(s, l);
            F32Array a({L.out, L.in});
            std::memcpy(a.mutable_data(), L.w.data(), L.w.size() * sizeof(float));
            return a;
          },
          py::arg("layer"))
      .def(
          "biases", [](const InrModel& s, std::size_t l) { return F32Array(layer(s, l).b.size(), layer(s, l).b.data()); },
          py::arg("layer"))
      .def(
          "mask",
          [](const InrModel& s, std::size_t l) {
            const auto& L = layer(s, l);
            py::array_t<bool> a({L.out, L.in});
            auto* p = a.mutable_data();
            for (std::size_t i = 0; i < s.mask[l].size(); ++i) p[i] = s.mask[l][i] != 0;
            return a;
          },
          py::arg("layer"))
      .def("__eq__", [](const InrModel& a, const InrModel& b) { return a == b; })
      .def("__repr__", [](const InrModel& s) {
        return "InrModel(" + s.arch.label() + ", pruned=" + std::to_string(s.prune_ratio()) +
               ", quant=" + to_string(s.quant.mode) + ")";
      });

  m.def("init", &init, py::arg("arch"), py::arg("seed") = 0, "Initialise a model with all-ones mask.");

  py::class_<EncodeConfig>(m, "EncodeConfig")
      .def(py::init<>())
      .def_readwrite("arch", &EncodeConfig::arch)
      .def_readwrite("round1_lr", &EncodeConfig::round1_lr)
      .def_readwrite("round1_steps", &EncodeConfig::round1_steps)
      .def_readwrite("retrain_lr", &EncodeConfig::retrain_lr)
      .def_readwrite("retrain_steps", &EncodeConfig::retrain_steps)
      .def_readwrite("iterative_prune_ratio", &EncodeConfig::iterative_prune_ratio)
      .def_readwrite("skip_round2", &EncodeConfig::skip_round2)
      .def_readwrite("schedule", &EncodeConfig::schedule)
      .def_property(
          "per_layer", [](const EncodeConfig& c) { return c.prune_scope == PruneScope::per_layer; },
          [](EncodeConfig& c, bool v) { c.prune_scope = v ? PruneScope::per_layer : PruneScope::global; })
      .def_readwrite("seed", &EncodeConfig::seed)
      .def_readwrite("loss_samples", &EncodeConfig::loss_samples)
      .def("validate", &EncodeConfig::validate);

  py::class_<EncodeReport>(m, "EncodeReport")
      .def_readonly("psnr_after_round", &EncodeReport::psnr_after_round)
      .def_readonly("psnr_after_masking", &EncodeReport::psnr_after_masking)
      .def_readonly("final_prune_ratio", &EncodeReport::final_prune_ratio)
      .def_readonly("dynamic_target_ratio", &EncodeReport::dynamic_target_ratio)
      .def_readonly("prune_events", &EncodeReport::prune_events)
      .def_readonly("wall_time", &EncodeReport::wall_time)
      .def_property_readonly("final_psnr", &EncodeReport::final_psnr)
      .def_property_readonly("loss_curve", [](const EncodeReport& r) {
        py::list out;
        for (const auto& s : r.loss_curve) out.append(py::make_tuple(s.round, s.step, s.loss));
        return out;
      });

  m.def(
      "fit_round1",
      [](const py::array& image, const EncodeConfig& cfg) {
        const auto img = to_image(image);
        py::gil_scoped_release nogil;
        auto r = fit_round1(img, cfg);
        return std::make_pair(std::move(r.model), std::move(r.report));
      },
      py::arg("image"), py::arg("config") = EncodeConfig{}, "Dense fit only. Returns (model, report).");
  m.def(
      "fit_full",
      [](const py::array& image, const EncodeConfig& cfg) {
        const auto img = to_image(image);
        py::gil_scoped_release nogil;
        auto r = fit_full(img, cfg);
        return std::make_pair(std::move(r.model), std::move(r.report));
      },
      py::arg("image"), py::arg("config") = EncodeConfig{}, "All training rounds. Returns (model, report).");

  py::class_<ArchiveRecord>(m, "ArchiveRecord")
      .def(py::init<std::string, InrModel>(), py::arg("id"), py::arg("model"))
      .def_readwrite("id", &ArchiveRecord::id)
      .def_readwrite("model", &ArchiveRecord::model);

  py::class_<DatasetArchive>(m, "DatasetArchive")
      .def(py::init<>())
      .def(py::init([](std::vector<ArchiveRecord> records) {
             DatasetArchive a;
             a.records = std::move(records);
             return a;
           }),
           py::arg("records"))
      .def_readwrite("records", &DatasetArchive::records)
      .def("__len__", [](const DatasetArchive& a) { return a.records.size(); })
      .def(
          "__getitem__",
          [](const DatasetArchive& a, const std::string& id) {
            const auto k = a.find(id);
            if (k < 0) throw py::key_error(id);
            return a.records[static_cast<std::size_t>(k)].model;
          },
          py::arg("id"))
      .def_property_readonly("ids",
                             [](const DatasetArchive& a) {
                               std::vector<std::string> ids;
                               for (const auto& r : a.records) ids.push_back(r.id);
                               return ids;
                             })
      .def("__eq__", [](const DatasetArchive& a, const DatasetArchive& b) { return a == b; });

  m.def(
      "encode_dataset",
      [](const std::vector<std::pair<std::string, py::array>>& images, const EncodeConfig& cfg, int jobs,
         bool fail_fast) {
        std::vector<NamedImage> named;
        for (const auto& [id, a] : images) named.push_back({id, to_image(a)});
        DatasetEncoding enc;
        {
          py::gil_scoped_release nogil;
          enc = encode_dataset(named, cfg, jobs, fail_fast ? FailurePolicy::fail_fast : FailurePolicy::skip);
        }
        py::list failures;
        for (const auto& f : enc.failures) failures.append(py::make_tuple(f.index, f.id, f.message));
        return py::make_tuple(std::move(enc.archive), std::move(enc.reports), failures);
      },
      py::arg("images"), py::arg("config") = EncodeConfig{}, py::arg("jobs") = 1, py::arg("fail_fast") = false,
      "Encode (id, image) pairs. Returns (archive, reports, failures).");

  m.def(
      "decode",
      [](const InrModel& model, int height, int width, int jobs) {
        ImageBuffer img;
        {
          py::gil_scoped_release nogil;
          img = decode(model, DecodeOptions{height, width, jobs});
        }
        return to_array(img);
      },
      py::arg("model"), py::arg("height") = 0, py::arg("width") = 0, py::arg("jobs") = 1,
      "Render to an (H, W, 3) float32 array in [0, 1]. Size defaults to the source size.");

  m.def(
      "psnr",
      [](const py::array& a, const py::array& b, const std::string& domain) {
        if (domain != "normalized" && domain != "8bit") throw InvalidInput("domain must be normalized or 8bit");
        return psnr(to_image(a), to_image(b), domain == "8bit" ? PsnrDomain::eight_bit : PsnrDomain::normalized)
            .psnr_db;
      },
      py::arg("a"), py::arg("b"), py::arg("domain") = "normalized");

  m.def(
      "dynamic_ratio",
      [](const std::string& schedule, double psnr_db) { return dynamic_ratio(PruneSchedule::by_name(schedule), psnr_db); },
      py::arg("schedule"), py::arg("psnr_db"));
  m.def(
      "prune",
      [](const InrModel& model, double ratio, bool per_layer) {
        return prune_l1(model, ratio, per_layer ? PruneScope::per_layer : PruneScope::global);
      },
      py::arg("model"), py::arg("ratio"), py::arg("per_layer") = false);
  m.def(
      "dynamic_prune",
      [](const InrModel& model, const std::string& schedule, double psnr_db) {
        return dynamic_prune(model, PruneSchedule::by_name(schedule), psnr_db);
      },
      py::arg("model"), py::arg("schedule"), py::arg("psnr_db"));
  m.def(
      "quantize", [](const InrModel& model, int bits) { return quantize(model, mode_from_bits(bits)); },
      py::arg("model"), py::arg("bits") = 8);
  m.def("dequantize", &dequantize, py::arg("model"));

  m.def(
      "serialize",
      [](const DatasetArchive& a, bool f16) {
        const auto b = serialize(a, WriteOptions{f16 ? FloatStorage::f16 : FloatStorage::f32});
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      },
      py::arg("archive"), py::arg("f16") = false);
  m.def(
      "deserialize",
      [](const py::bytes& data) {
        const std::string_view s = data;
        return deserialize({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
      },
      py::arg("data"));
  m.def(
      "write_file",
      [](const DatasetArchive& a, const std::filesystem::path& p, bool f16) {
        return write_file(a, p, WriteOptions{f16 ? FloatStorage::f16 : FloatStorage::f32});
      },
      py::arg("archive"), py::arg("path"), py::arg("f16") = false);
  m.def("read_file", &read_file, py::arg("path"));
  m.def(
      "stats",
      [](const DatasetArchive& a) {
        const auto s = stats(a);
        py::dict d;
        d["total_bytes"] = s.total_bytes;
        d["header_bytes"] = s.header_bytes;
        d["dense_f32_bytes"] = s.dense_f32_bytes;
        d["raw_bytes"] = s.raw_bytes;
        d["mean_prune_ratio"] = s.mean_prune_ratio;
        d["ratio_vs_dense"] = s.ratio_vs_dense();
        d["ratio_vs_raw"] = s.ratio_vs_raw();
        py::list recs;
        for (const auto& r : s.records) {
          py::dict e;
          e["id"] = r.id;
          e["bytes"] = r.bytes;
          e["dense_bytes"] = r.dense_bytes;
          e["prune_ratio"] = r.prune_ratio;
          e["quant"] = to_string(r.quant);
          recs.append(e);
        }
        d["records"] = recs;
        return d;
      },
      py::arg("archive"));

  m.def(
      "enumerate_archs",
      [](std::size_t budget, const std::string& shape, int min_depth, int max_depth, int max_width) {
        EnumerateOptions o;
        o.min_depth = min_depth;
        o.max_depth = max_depth;
        o.max_width = max_width;
        return enumerate(budget, parse_shape(shape), o).archs;
      },
      py::arg("budget_bytes"), py::arg("shape") = "uniform", py::arg("min_depth") = 2, py::arg("max_depth") = 12,
      py::arg("max_width") = 256, "Largest architectures per depth whose dense f32 size fits the budget.");
  m.def(
      "sweep",
      [](const std::vector<py::array>& images, const std::vector<Architecture>& archs, std::vector<double> omegas,
         std::vector<double> lrs, std::vector<long> steps, std::uint64_t seed, int jobs) {
        std::vector<ImageBuffer> imgs;
        for (const auto& a : images) imgs.push_back(to_image(a));
        SweepTable t;
        {
          py::gil_scoped_release nogil;
          t = sweep(imgs, SweepAxes{archs, std::move(omegas), std::move(lrs), std::move(steps)},
                    SweepOptions{seed, jobs});
        }
        py::list rows;
        for (const auto& r : t.rows) {
          py::dict d;
          d["cell"] = r.cell;
          d["arch"] = r.arch;
          d["bytes"] = r.bytes;
          d["omega"] = r.omega;
          d["lr"] = r.lr;
          d["steps"] = r.steps;
          d["mean_psnr"] = r.mean_psnr;
          d["min_psnr"] = r.min_psnr;
          d["diverged"] = r.diverged;
          d["failed"] = r.failed;
          d["best_omega"] = r.best_omega;
          rows.append(d);
        }
        return rows;
      },
      py::arg("images"), py::arg("archs"), py::arg("omegas") = std::vector<double>{30.0},
      py::arg("lrs") = std::vector<double>{5e-4}, py::arg("steps") = std::vector<long>{5000}, py::arg("seed") = 0,
      py::arg("jobs") = 1, "Round-1 grid sweep. Returns one dict per (arch, omega, lr, steps) cell.");

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(io::load_image(p)); }, py::arg("path"));
  m.def(
      "save_png", [](const py::array& a, const std::filesystem::path& p) { io::save_png(to_image(a), p); },
      py::arg("image"), py::arg("path"));
}
