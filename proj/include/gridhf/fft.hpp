#pragma once
#include <array>
#include <complex>
#include <vector>

namespace gridhf {

using cplx = std::complex<double>;

// In-place DFT of arbitrary length: iterative radix-2 for powers of two,
// Bluestein chirp-z otherwise. inverse applies the conjugate transform with
// 1/n normalization.
void fft(std::vector<cplx>& a, bool inverse);

// 3-D transform over a row-major (n0, n1, n2) array.
void fft3(const std::array<int, 3>& dims, std::vector<cplx>& data, bool inverse);

} // namespace gridhf
