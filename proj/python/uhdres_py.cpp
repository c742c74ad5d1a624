// Python bindings for the main operations: model building and inference,
// losses and metrics, the spectral ops, and the perturbation experiment.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uhdres/bench.hpp"
#include "uhdres/checkpoint.hpp"
#include "uhdres/losses.hpp"
#include "uhdres/metrics.hpp"
#include "uhdres/trainer.hpp"

namespace py = pybind11;
using namespace uhdres;

namespace {

using Arr = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor<float> tensor_from_array(const Arr& arr) {
    py::buffer_info info = arr.request();
    Shape shape(info.shape.begin(), info.shape.end());
    const float* p = static_cast<const float*>(info.ptr);
    return Tensor<float>::from_data(shape, std::vector<float>(p, p + info.size));
}

py::array_t<float> array_from_tensor(const Tensor<float>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<float> out(shape);
    std::memcpy(out.request().ptr, t.ptr(), static_cast<size_t>(t.numel()) * sizeof(float));
    return out;
}

class PyModel {
public:
    PyModel(const UHDResConfig& cfg, uint64_t seed) : model_(cfg, seed) {}
    explicit PyModel(UHDResModel<float>&& m) : model_(std::move(m)) {}

    py::array_t<float> forward(const Arr& input) {
        Tensor<float> x = tensor_from_array(input);
        Tensor<float> y;
        {
            py::gil_scoped_release release;
            NoGrad<float> ng;
            y = model_.forward(x);
        }
        return array_from_tensor(y);
    }

    int64_t param_count() const { return model_.count_params(); }

    py::dict param_breakdown() const {
        py::dict d;
        for (const auto& [name, count] : model_.param_breakdown()) d[py::str(name)] = count;
        return d;
    }

    void save(const std::string& path) { save_checkpoint(model_, path); }

    UHDResModel<float>& model() { return model_; }

private:
    UHDResModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_uhdres, m) {
    m.doc() = "dual-domain spectral modulation image restoration";

    py::class_<UHDResConfig>(m, "Config")
        .def(py::init<>())
        .def_readwrite("initial_channels", &UHDResConfig::initial_channels)
        .def_readwrite("level_depths", &UHDResConfig::level_depths)
        .def_readwrite("expansion", &UHDResConfig::expansion)
        .def_readwrite("msca_kernels", &UHDResConfig::msca_kernels)
        .def_readwrite("strip_kernel", &UHDResConfig::strip_kernel)
        .def_readwrite("cam_reduction", &UHDResConfig::cam_reduction)
        .def_readwrite("use_msca", &UHDResConfig::use_msca)
        .def_readwrite("use_samu", &UHDResConfig::use_samu)
        .def_readwrite("use_sru", &UHDResConfig::use_sru)
        .def_readwrite("use_sgfn", &UHDResConfig::use_sgfn);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const UHDResConfig&, uint64_t>(), py::arg("config") = UHDResConfig{},
             py::arg("seed") = 0)
        .def("forward", &PyModel::forward, py::arg("input"),
             "Restore a (n,3,h,w) float array in [0,1]; returns the unclamped prediction.")
        .def("param_count", &PyModel::param_count)
        .def("param_breakdown", &PyModel::param_breakdown)
        .def("save", &PyModel::save, py::arg("path"));

    m.def(
        "load_model",
        [](const std::string& path) { return PyModel(load_checkpoint<float>(path)); },
        py::arg("path"));

    m.def(
        "psnr",
        [](const Arr& a, const Arr& b) { return psnr(tensor_from_array(a), tensor_from_array(b)); },
        py::arg("pred"), py::arg("target"));
    m.def(
        "ssim",
        [](const Arr& a, const Arr& b) { return ssim(tensor_from_array(a), tensor_from_array(b)); },
        py::arg("pred"), py::arg("target"));
    m.def(
        "l1_loss",
        [](const Arr& a, const Arr& b) {
            return static_cast<double>(l1_loss(tensor_from_array(a), tensor_from_array(b)).item());
        },
        py::arg("pred"), py::arg("target"));
    m.def(
        "freq_loss",
        [](const Arr& a, const Arr& b) {
            return static_cast<double>(freq_loss(tensor_from_array(a), tensor_from_array(b)).item());
        },
        py::arg("pred"), py::arg("target"));

    m.def(
        "fft_roundtrip",
        [](const Arr& a) {
            auto x = tensor_from_array(a);
            return array_from_tensor(ifft2_real(fft2_real(x)));
        },
        py::arg("image"), "Forward and inverse the half-plane FFT (identity up to rounding).");

    m.def(
        "perturb_image",
        [](const Arr& img, const std::string& component, double eps, uint64_t seed) {
            SeededRng rng(seed);
            auto comp = component == "phase" ? SpectrumComponent::Phase : SpectrumComponent::Amplitude;
            if (component != "phase" && component != "amplitude")
                throw ConfigError("component must be 'amplitude' or 'phase', got '" + component + "'");
            return array_from_tensor(perturb_spectrum(tensor_from_array(img), comp, eps, rng));
        },
        py::arg("image"), py::arg("component"), py::arg("eps"), py::arg("seed") = 1,
        "Perturb one spectral component of a (n,3,h,w) image in [0,1].");
}
