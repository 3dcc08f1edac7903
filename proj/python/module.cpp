// Python face of the laboratory: one Lab object per (mesh, prescription),
// plus the half-plane analytics as free functions.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "curvlab/liouville.hpp"

namespace py = pybind11;
using namespace curvlab;

namespace {

py::dict point_dict(const CriticalPoint& cp) {
  py::dict d;
  d["u"] = cp.u;
  d["energy"] = cp.energy;
  d["grad_norm"] = cp.grad_norm;
  d["kind"] = cp.kind == PointKind::minimizer
                  ? "minimizer"
                  : (cp.kind == PointKind::saddle ? "saddle" : "unknown");
  d["min_eigenvalue"] = cp.min_eigenvalue;
  d["gb_residual"] = cp.gb_residual;
  d["iterations"] = cp.iterations;
  d["converged"] = cp.converged;
  d["note"] = cp.note;
  return d;
}

py::dict fit_dict(const BubbleFit& f) {
  py::dict d;
  d["Lambda"] = f.Lambda;
  d["s0"] = f.s0;
  d["t0"] = f.t0;
  d["c_inf"] = f.c_inf;
  d["d_inf"] = f.d_inf;
  d["rms_residual"] = f.rms_residual;
  d["converged"] = f.converged;
  return d;
}

py::dict report_dict(const LiouvilleReport& r) {
  py::dict d;
  d["V0"] = r.V0;
  d["H0"] = r.H0;
  d["K0"] = r.K0;
  d["d"] = r.d;
  d["beta"] = r.beta;
  d["pohozaev_lhs"] = r.pohozaev_lhs;
  d["residual"] = r.residual;
  d["tail_converged"] = r.tail_converged;
  return d;
}

// owns the mesh so the EnergyModel's back pointer stays valid
struct Lab {
  std::unique_ptr<Mesh> mesh;
  Operators ops;
  BackgroundCurvature bg;
  EnergyModel em;

  Lab(int n, double rho, double p0_angle, double amp_f, double amp_h,
      double mu, double lambda)
      : mesh(std::make_unique<Mesh>(build_torus_with_hole(n, rho))),
        ops(assemble_operators(*mesh)),
        bg(background_curvature(*mesh, ops)) {
    const CurvatureData data = make_prescription(*mesh, p0_angle, amp_f, amp_h);
    em = with_parameters(make_model(*mesh, ops, bg, data), mu, lambda);
  }

  void set_parameters(double mu, double lambda) {
    em = with_parameters(em, mu, lambda);
  }

  py::object py_energy(const Vec& u) const {
    const auto E = energy(em, u);
    return E ? py::cast(*E) : py::none();
  }

  py::object py_gradient(const Vec& u) const {
    const auto g = gradient(em, u);
    return g ? py::cast(*g) : py::none();
  }

  py::dict solve(double tol, int max_iter, unsigned seed) const {
    return point_dict(solve_minimizer_pair(em, tol, max_iter, seed));
  }

  py::dict spectrum(const Vec& u, int k, unsigned seed) const {
    const SpectralCertificate sc = min_eigen(em, u, k, seed);
    py::dict d;
    d["sigma_min"] = sc.sigma_min;
    d["negative_count"] = sc.negative_count;
    d["eigenvalues"] = sc.eigenvalues;
    d["residual"] = sc.residual;
    d["converged"] = sc.converged;
    return d;
  }

  Vec test_function(double mu) const {
    TestFunctionSpec spec;
    spec.mu = mu;
    const V2 q = mesh->vertices.row(em.data.p0).transpose();
    return build_test_function(*mesh, q, spec);
  }

  py::dict run_mountain_pass(int P, unsigned seed) const {
    const EnergyModel zero = with_parameters(em, 0.0, 0.0);
    const CriticalPoint u0 =
        newton(zero, Vec::Zero(mesh->num_vertices()), 1e-10, 60, false);
    if (!u0.converged) throw std::runtime_error("base (0,0) solve failed");
    TestFunctionSpec spec;
    spec.mu = em.data.mu;
    const V2 q = mesh->vertices.row(em.data.p0).transpose();
    const Vec w = build_test_function(*mesh, q, spec);
    const FarEndpoint fe = find_far_endpoint(em, u0.u, w);
    MountainPassOptions opts;
    opts.seed = seed;
    const MountainPassResult r = mountain_pass(em, u0.u, fe.v, P, opts);
    py::dict d;
    d["c_level"] = r.c_level;
    d["saddle"] = point_dict(r.saddle);
    d["sigma_min"] = r.certificate.sigma_min;
    d["negative_count"] = r.certificate.negative_count;
    d["area_mass"] = r.area_mass;
    d["boundary_mass"] = r.boundary_mass;
    d["sweeps"] = r.sweeps;
    d["converged"] = r.converged;
    return d;
  }
};

}  // namespace

PYBIND11_MODULE(curvlab, m) {
  m.doc() = "prescribed-curvature laboratory on the one-holed flat torus";

  py::class_<Lab>(m, "Lab")
      .def(py::init<int, double, double, double, double, double, double>(),
           py::arg("n"), py::arg("rho") = 0.25, py::arg("p0_angle") = 0.0,
           py::arg("amplitude_f") = 1.0, py::arg("amplitude_h") = 1.0,
           py::arg("mu") = 1e-2, py::arg("lambda") = 1e-1)
      .def_property_readonly(
          "vertices", [](const Lab& l) { return l.mesh->vertices; })
      .def_property_readonly(
          "triangles", [](const Lab& l) { return l.mesh->triangles; })
      .def_property_readonly(
          "boundary_loop", [](const Lab& l) { return l.mesh->boundary_loop; })
      .def_property_readonly(
          "euler_characteristic",
          [](const Lab& l) { return l.mesh->euler_characteristic(); })
      .def_property_readonly(
          "defect_sum", [](const Lab& l) { return l.bg.defect_sum; })
      .def_property_readonly(
          "min_angle_deg", [](const Lab& l) { return l.mesh->min_angle_deg(); })
      .def_property_readonly("mu", [](const Lab& l) { return l.em.data.mu; })
      .def_property_readonly("lam",
                             [](const Lab& l) { return l.em.data.lambda; })
      .def("set_parameters", &Lab::set_parameters, py::arg("mu"),
           py::arg("lambda"))
      .def("energy", &Lab::py_energy, py::arg("u"))
      .def("gradient", &Lab::py_gradient, py::arg("u"))
      .def("solve", &Lab::solve, py::arg("tol") = 1e-10,
           py::arg("max_iter") = 60, py::arg("seed") = 0)
      .def("spectrum", &Lab::spectrum, py::arg("u"), py::arg("k") = 4,
           py::arg("seed") = 0)
      .def("test_function", &Lab::test_function, py::arg("mu"))
      .def("mountain_pass", &Lab::run_mountain_pass, py::arg("P") = 17,
           py::arg("seed") = 0);

  m.def(
      "bubble_model",
      [](double s, double t, double Lambda, double s0, double t0, double c_inf,
         double d_inf) {
        BubbleFit p;
        p.Lambda = Lambda;
        p.s0 = s0;
        p.t0 = t0;
        p.c_inf = c_inf;
        p.d_inf = d_inf;
        return bubble_model(s, t, p);
      },
      py::arg("s"), py::arg("t"), py::arg("Lambda"), py::arg("s0"),
      py::arg("t0"), py::arg("c_inf"), py::arg("d_inf"));

  m.def(
      "fit_bubble",
      [](const Eigen::MatrixX3d& samples, double t0_est) {
        return fit_dict(fit_bubble_samples(samples, t0_est));
      },
      py::arg("samples"), py::arg("t0_est"));

  m.def(
      "bubble_report",
      [](double Lambda, double s0, double t0, double c_inf, double d_inf) {
        return report_dict(
            pohozaev_residual(bubble_closed_form(Lambda, s0, t0, c_inf, d_inf)));
      },
      py::arg("Lambda"), py::arg("s0"), py::arg("t0"), py::arg("c_inf"),
      py::arg("d_inf"));

  m.def(
      "certificate_demo",
      [](double pde_tol) {
        const Eigen::Matrix2d A = -Eigen::Matrix2d::Identity();
        const HalfPlaneProfile cand = fit_system_candidate(A);
        const CertificateResult c = nonexistence_certificate(A, cand, pde_tol);
        py::dict d;
        d["verdict"] = c.verdict == CertVerdict::Inconsistent
                           ? "inconsistent"
                           : (c.verdict == CertVerdict::Inapplicable
                                  ? "inapplicable"
                                  : "consistent");
        d["max_pde_residual"] = c.max_pde_residual;
        d["report"] = report_dict(c.report);
        d["candidate"] = fit_dict(cand.params);
        return d;
      },
      py::arg("pde_tol") = 0.5);
}
