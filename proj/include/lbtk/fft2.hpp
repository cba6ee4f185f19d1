#pragma once

#include "lbtk/image.hpp"

#include <complex>

namespace lbtk {

using ComplexMat =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unnormalized forward 2-D DFT.
ComplexMat fft2(const ComplexMat& in);
ComplexMat fft2(const PlaneD& real_in);

/// Inverse 2-D DFT, normalized by 1/(rows*cols).
ComplexMat ifft2(const ComplexMat& in);
PlaneD ifft2_real(const ComplexMat& in);

/// Largest n' <= n whose prime factors are all in {2, 3, 5}. Used to trim
/// awkward transform sizes before whole-frame correlation.
int fft_friendly_size(int n);

}  // namespace lbtk
