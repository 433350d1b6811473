#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "hnko/error.hpp"
#include "hnko/systems.hpp"

namespace hnko::systems {

namespace {

using cd = std::complex<double>;

// Real-to-complex / complex-to-real plan pair bound to owned buffers.
// FFTW_ESTIMATE keeps plan selection deterministic run to run.
class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)))),
        spec_(static_cast<fftw_complex*>(
            fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)))) {
    forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  void forward(const double* in, cd* out) {
    std::copy(in, in + n_, real_);
    fftw_execute(forward_);
    const auto* s = reinterpret_cast<const cd*>(spec_);
    std::copy(s, s + n_ / 2 + 1, out);
  }

  // Unnormalised inverse; caller divides by n.
  void backward(const cd* in, double* out) {
    std::copy(in, in + n_ / 2 + 1, reinterpret_cast<cd*>(spec_));
    fftw_execute(backward_);
    std::copy(real_, real_ + n_, out);
  }

 private:
  int n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_;
  fftw_plan backward_;
};

class KdvStepper {
 public:
  KdvStepper(const Kdv& spec, double h)
      : n_(spec.grid_points), modes_(n_ / 2 + 1), fft_(n_), h_(h),
        ik_(modes_), mask_(modes_), e_half_(modes_), e_full_(modes_),
        phys_(static_cast<std::size_t>(n_)), work_(modes_) {
    const double k0 = 2.0 * std::numbers::pi / spec.domain_length;
    const int cutoff = n_ / 3;
    for (int j = 0; j < modes_; ++j) {
      const double k = k0 * j;
      ik_[j] = cd(0.0, k);
      mask_[j] = (j <= cutoff && j < n_ / 2) ? 1.0 : 0.0;
      // Linear part: u_t = -u_xxx  =>  d/dt u_hat = i k^3 u_hat.
      const double lin = k * k * k;
      e_half_[j] = std::polar(1.0, 0.5 * h * lin);
      e_full_[j] = std::polar(1.0, h * lin);
    }
  }

  void to_spectral(const Vector& u, std::vector<cd>& uh) {
    uh.resize(static_cast<std::size_t>(modes_));
    fft_.forward(u.data(), uh.data());
    for (int j = 0; j < modes_; ++j) uh[j] *= mask_[j];
  }

  void to_physical(const std::vector<cd>& uh, Eigen::Ref<Vector> u) {
    fft_.backward(uh.data(), phys_.data());
    const double inv = 1.0 / n_;
    for (int i = 0; i < n_; ++i) u(i) = phys_[static_cast<std::size_t>(i)] * inv;
  }

  // Dealiased nonlinear term 3 (u^2)_x in Fourier space, scaled by h.
  void nonlinear(const std::vector<cd>& uh, std::vector<cd>& out) {
    fft_.backward(uh.data(), phys_.data());
    const double inv = 1.0 / n_;
    for (double& v : phys_) {
      v *= inv;
      v *= v;
    }
    out.resize(static_cast<std::size_t>(modes_));
    fft_.forward(phys_.data(), out.data());
    for (int j = 0; j < modes_; ++j) out[j] *= 3.0 * h_ * mask_[j] * ik_[j];
  }

  // Integrating-factor RK4 step.
  void step(std::vector<cd>& uh) {
    const std::size_t m = static_cast<std::size_t>(modes_);
    a_.resize(m);
    b_.resize(m);
    c_.resize(m);
    d_.resize(m);
    nonlinear(uh, a_);
    for (std::size_t j = 0; j < m; ++j) work_[j] = e_half_[j] * (uh[j] + 0.5 * a_[j]);
    nonlinear(work_, b_);
    for (std::size_t j = 0; j < m; ++j) work_[j] = e_half_[j] * uh[j] + 0.5 * b_[j];
    nonlinear(work_, c_);
    for (std::size_t j = 0; j < m; ++j) work_[j] = e_full_[j] * uh[j] + e_half_[j] * c_[j];
    nonlinear(work_, d_);
    for (std::size_t j = 0; j < m; ++j) {
      uh[j] = e_full_[j] * uh[j] +
              (e_full_[j] * a_[j] + 2.0 * e_half_[j] * (b_[j] + c_[j]) + d_[j]) / 6.0;
    }
  }

 private:
  int n_;
  int modes_;
  RealFft fft_;
  double h_;
  std::vector<cd> ik_;
  std::vector<double> mask_;
  std::vector<cd> e_half_;
  std::vector<cd> e_full_;
  std::vector<double> phys_;
  std::vector<cd> work_;
  std::vector<cd> a_, b_, c_, d_;
};

}  // namespace

Matrix simulate_kdv(const Kdv& spec, const Vector& u0, double dt, Index steps, double h_req) {
  const auto substeps = std::max<Index>(1, static_cast<Index>(std::ceil(dt / h_req - 1e-9)));
  const double h = dt / static_cast<double>(substeps);
  KdvStepper stepper(spec, h);
  std::vector<cd> uh;
  stepper.to_spectral(u0, uh);

  Matrix out(spec.grid_points, steps + 1);
  stepper.to_physical(uh, out.col(0));
  for (Index k = 1; k <= steps; ++k) {
    for (Index s = 0; s < substeps; ++s) stepper.step(uh);
    stepper.to_physical(uh, out.col(k));
    if (!out.col(k).allFinite()) {
      throw NumericalError("simulate: KdV field became non-finite at step " + std::to_string(k));
    }
  }
  return out;
}

}  // namespace hnko::systems
