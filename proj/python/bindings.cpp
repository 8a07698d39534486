#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lenstrace/config.hpp"
#include "lenstrace/dataset.hpp"
#include "lenstrace/image.hpp"
#include "lenstrace/isp.hpp"
#include "lenstrace/lens_model.hpp"
#include "lenstrace/metrics.hpp"
#include "lenstrace/psf.hpp"
#include "lenstrace/psf_io.hpp"
#include "lenstrace/raytrace.hpp"

namespace py = pybind11;
using namespace lenstrace;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Image to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("expected an HxW or HxWxC array");
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), c);
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

Array to_array(const Image& img) {
    std::vector<py::ssize_t> shape{img.height, img.width};
    if (img.channels != 1) shape.push_back(img.channels);
    Array out(shape);
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

PsfGridSpec grid_spec(const std::string& json_text) {
    return json_text.empty() ? PsfGridSpec{} : grid_spec_from_json(nlohmann::json::parse(json_text));
}

SimulationConfig sim_config(const std::string& json_text) {
    return json_text.empty() ? SimulationConfig{} : simulation_from_json(nlohmann::json::parse(json_text));
}

py::dict params_dict(const SimulationParams& p) {
    py::dict d;
    d["color_temperature"] = p.color_temperature;
    d["shot"] = p.noise.shot;
    d["read"] = p.noise.read;
    d["noise_seed"] = p.noise_seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_lenstrace, m) {
    m.doc() = "Lens-to-sensor imaging simulation core";

    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<CacheError>(m, "CacheError", PyExc_RuntimeError);
    py::register_exception<ImageError>(m, "ImageError", PyExc_RuntimeError);

    py::class_<OpticalSystem>(m, "OpticalSystem")
        .def_property_readonly("sensor_shape", [](const OpticalSystem& s) { return py::make_tuple(s.sensor.height, s.sensor.width); })
        .def_property_readonly("pitch_um", [](const OpticalSystem& s) { return s.sensor.pitch_um; })
        .def_property_readonly("surface_count", [](const OpticalSystem& s) { return s.lens.surfaces.size(); })
        .def_property(
            "object_distance_mm", [](const OpticalSystem& s) { return s.lens.object_distance; },
            [](OpticalSystem& s, double d) { s.lens.object_distance = d; })
        .def_property_readonly("color_temperatures",
                               [](const OpticalSystem& s) {
                                   std::vector<int> t;
                                   for (const auto& [k, v] : s.sensor.white_balance) t.push_back(k);
                                   return t;
                               })
        .def("to_json", [](const OpticalSystem& s) { return to_json(s).dump(); });
    m.def("load_prescription", &load_prescription, py::arg("path"));
    m.def("parse_prescription", [](const std::string& text) { return parse_prescription(nlohmann::json::parse(text)); },
          py::arg("json_text"));

    py::class_<PsfGrid>(m, "PsfGrid")
        .def_readonly("rows", &PsfGrid::rows)
        .def_readonly("cols", &PsfGrid::cols)
        .def_readonly("patch_size", &PsfGrid::patch_size)
        .def_readonly("max_kernel", &PsfGrid::max_kernel)
        .def("kernel",
             [](const PsfGrid& g, int r, int c, int channel) {
                 if (r < 0 || c < 0 || r >= static_cast<int>(g.rows) || c >= static_cast<int>(g.cols) || channel < 0 || channel > 2)
                     throw py::index_error("cell or channel out of range");
                 const PsfCell& cell = g.cell(r, c);
                 Array out({cell.height, cell.width});
                 std::copy(cell.kernels[channel].begin(), cell.kernels[channel].end(), out.mutable_data());
                 return out;
             },
             py::arg("row"), py::arg("col"), py::arg("channel"))
        .def("illumination", [](const PsfGrid& g, int r, int c) { return g.cell(r, c).illumination; })
        .def("__eq__", [](const PsfGrid& a, const PsfGrid& b) { return a == b; });

    m.def("compute_psf_grid",
          [](const OpticalSystem& s, const std::string& spec) {
              py::gil_scoped_release release;
              return compute_psf_grid(s, grid_spec(spec));
          },
          py::arg("system"), py::arg("spec_json") = "");
    m.def("save_psf_grid", &save_psf_grid, py::arg("grid"), py::arg("path"));
    m.def("load_psf_grid", &load_psf_grid, py::arg("path"));
    m.def("serialize_psf_grid", [](const PsfGrid& g) {
        auto bytes = serialize_psf_grid(g);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    m.def("verify_psf_grid",
          [](const PsfGrid& g, const OpticalSystem& s, const std::string& spec, double tol) {
              VerifyReport r;
              {
                  py::gil_scoped_release release;
                  r = verify_psf_grid(g, s, grid_spec(spec), tol);
              }
              py::dict d;
              d["passed"] = r.passed;
              d["max_difference"] = r.max_difference;
              d["cells"] = r.cells;
              return d;
          },
          py::arg("grid"), py::arg("system"), py::arg("spec_json") = "", py::arg("tolerance") = 1e-6);

    m.def("trace_chief_ray",
          [](const OpticalSystem& s, double x, double y, double wavelength_nm) {
              TraceContext ctx(s.lens, wavelength_nm);
              Vec3 p = chief_ray(ctx, {x, y, s.lens.object_z()}).image_point;
              return py::make_tuple(p.x, p.y, p.z);
          },
          py::arg("system"), py::arg("object_x"), py::arg("object_y"), py::arg("wavelength_nm") = 550.0);

    m.def("partitioned_convolve",
          [](const Array& energy, const PsfGrid& g, int threads) { return to_array(partitioned_convolve(to_image(energy), g, threads)); },
          py::arg("energy"), py::arg("grid"), py::arg("threads") = 0);
    m.def("simulate_image",
          [](const Array& srgb, const PsfGrid& g, const OpticalSystem& s, const std::string& config, std::uint64_t seed) {
              Image img = to_image(srgb);
              SimulationResult r;
              {
                  py::gil_scoped_release release;
                  r = simulate_image(img, g, s.sensor, sim_config(config), seed);
              }
              return py::make_tuple(to_array(r.output), params_dict(r.params));
          },
          py::arg("srgb"), py::arg("grid"), py::arg("system"), py::arg("config_json") = "", py::arg("seed") = 0);
    m.def("energy_transform",
          [](const Array& srgb, const OpticalSystem& s, int t) { return to_array(energy_transform(to_image(srgb), s.sensor, t)); },
          py::arg("srgb"), py::arg("system"), py::arg("color_temperature"));
    m.def("inverse_energy_transform",
          [](const Array& e, const OpticalSystem& s, int t) { return to_array(inverse_energy_transform(to_image(e), s.sensor, t)); },
          py::arg("energy"), py::arg("system"), py::arg("color_temperature"));

    m.def("psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_image(a), to_image(b), peak); },
          py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
    m.def("ssim", [](const Array& a, const Array& b, double range) { return ssim(to_image(a), to_image(b), range); },
          py::arg("a"), py::arg("b"), py::arg("data_range") = 1.0);
    m.def("mtf_area_along",
          [](const Array& k, double ux, double uy) {
              if (k.ndim() != 2) throw std::invalid_argument("kernel must be 2-D");
              std::vector<double> v(k.data(), k.data() + k.size());
              return mtf_area(mtf_along(v, static_cast<int>(k.shape(0)), static_cast<int>(k.shape(1)), ux, uy));
          },
          py::arg("kernel"), py::arg("ux") = 1.0, py::arg("uy") = 0.0);
    m.def("grid_mtf_areas",
          [](const PsfGrid& g, int channel) {
              py::list out;
              for (const CellMtf& c : grid_mtf(g, channel))
                  out.append(py::make_tuple(c.row, c.col, c.fov, mtf_area(c.sagittal), mtf_area(c.tangential)));
              return out;
          },
          py::arg("grid"), py::arg("channel") = 1);
    m.def("ca_curve",
          [](const PsfGrid& g) {
              py::list out;
              for (const CaPoint& p : ca_curve(g)) out.append(py::make_tuple(p.row, p.col, p.fov, p.red, p.blue));
              return out;
          },
          py::arg("grid"));
    m.def("strehl_curve",
          [](const OpticalSystem& s, const std::vector<double>& fovs, double wl, int samples) {
              std::vector<FieldValue> c;
              {
                  py::gil_scoped_release release;
                  c = strehl_curve(s, fovs, wl, samples);
              }
              std::vector<double> out;
              for (const auto& v : c) out.push_back(v.value);
              return out;
          },
          py::arg("system"), py::arg("fovs"), py::arg("wavelength_nm") = 550.0, py::arg("pupil_samples") = 128);

    m.def("read_png", [](const std::filesystem::path& p) { return to_array(read_png(p)); }, py::arg("path"));
    m.def("write_png", [](const Array& a, const std::filesystem::path& p, int bits) { write_png(to_image(a), p, bits); },
          py::arg("image"), py::arg("path"), py::arg("bit_depth") = 8);
    m.def("fov_map", [](int h, int w) { return to_array(fov_map(h, w)); }, py::arg("height"), py::arg("width"));
    m.def("read_fov_png", [](const std::filesystem::path& p) { return to_array(read_fov_png(p)); }, py::arg("path"));
    m.def("generate_dataset",
          [](const std::filesystem::path& manifest) {
              DatasetReport r;
              {
                  py::gil_scoped_release release;
                  r = generate_dataset(load_manifest(manifest));
              }
              return r.manifest_out;
          },
          py::arg("manifest"));
    m.def("preset_names", &preset_names);
}
