#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace covspec::detail {

/// Owning wrapper around a 1-D complex FFTW plan of fixed length.
/// sign = -1 computes sum_t x_t e^{-2 pi i j t / n}; sign = +1 the
/// unnormalized inverse.
class ComplexFft {
 public:
  ComplexFft(std::size_t n, int sign);
  ~ComplexFft();
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;

  std::size_t size() const { return n_; }
  /// Transforms in place; data.size() must equal size().
  void execute(std::vector<std::complex<double>>& data) const;

 private:
  std::size_t n_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace covspec::detail
