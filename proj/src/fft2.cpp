#include "lbtk/fft2.hpp"

#include <unsupported/Eigen/FFT>

namespace lbtk {

namespace {

// One FFT engine per thread; it caches plans per transform length.
Eigen::FFT<double>& engine() {
    thread_local Eigen::FFT<double> fft;
    return fft;
}

ComplexMat transform2d(const ComplexMat& in, bool forward) {
    auto& fft = engine();
    const int rows = static_cast<int>(in.rows());
    const int cols = static_cast<int>(in.cols());
    require(rows > 0 && cols > 0, "empty transform input");
    ComplexMat tmp(rows, cols), out(rows, cols);
    Eigen::VectorXcd vin(cols), vout(cols);
    for (int r = 0; r < rows; ++r) {
        vin = in.row(r).transpose();
        forward ? fft.fwd(vout, vin) : fft.inv(vout, vin);
        tmp.row(r) = vout.transpose();
    }
    Eigen::VectorXcd cin(rows), cout(rows);
    for (int c = 0; c < cols; ++c) {
        cin = tmp.col(c);
        forward ? fft.fwd(cout, cin) : fft.inv(cout, cin);
        out.col(c) = cout;
    }
    return out;
}

}  // namespace

ComplexMat fft2(const ComplexMat& in) { return transform2d(in, true); }

ComplexMat fft2(const PlaneD& real_in) {
    ComplexMat in(real_in.rows(), real_in.cols());
    for (Eigen::Index r = 0; r < real_in.rows(); ++r)
        for (Eigen::Index c = 0; c < real_in.cols(); ++c)
            in(r, c) = std::complex<double>(real_in(r, c), 0.0);
    return transform2d(in, true);
}

ComplexMat ifft2(const ComplexMat& in) { return transform2d(in, false); }

PlaneD ifft2_real(const ComplexMat& in) {
    const ComplexMat full = ifft2(in);
    PlaneD out(full.rows(), full.cols());
    for (Eigen::Index r = 0; r < full.rows(); ++r)
        for (Eigen::Index c = 0; c < full.cols(); ++c) out(r, c) = full(r, c).real();
    return out;
}

int fft_friendly_size(int n) {
    require(n >= 1, "size must be positive");
    for (int m = n; m >= 1; --m) {
        int k = m;
        while (k % 2 == 0) k /= 2;
        while (k % 3 == 0) k /= 3;
        while (k % 5 == 0) k /= 5;
        if (k == 1) return m;
    }
    return 1;
}

}  // namespace lbtk
