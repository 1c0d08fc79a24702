#include "fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace covspec::detail {

namespace {
// The FFTW planner is not reentrant.
std::mutex planner_mutex;
}  // namespace

struct ComplexFft::Impl {
  fftw_plan plan = nullptr;
  std::vector<std::complex<double>> scratch;
};

ComplexFft::ComplexFft(std::size_t n, int sign) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n == 0) throw std::invalid_argument("FFT length must be positive");
  impl_->scratch.resize(n);
  auto* buf = reinterpret_cast<fftw_complex*>(impl_->scratch.data());
  std::lock_guard lock(planner_mutex);
  impl_->plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (impl_->plan == nullptr) throw std::runtime_error("FFTW failed to create a plan");
}

ComplexFft::~ComplexFft() {
  if (impl_ && impl_->plan != nullptr) {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(impl_->plan);
  }
}

void ComplexFft::execute(std::vector<std::complex<double>>& data) const {
  if (data.size() != n_) throw std::invalid_argument("FFT input length mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->plan, buf, buf);
}

}  // namespace covspec::detail
