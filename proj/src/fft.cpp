#include "dsltv/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace dsltv::fft {
namespace {

// One in-place plan per (length, direction). FFTW_UNALIGNED lets the plan run
// on whatever buffer the caller owns (std::vector / Eigen storage), at the
// cost of SIMD alignment tricks we do not need.
class PlanCache {
public:
    fftw_plan get(std::size_t n, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        const auto key = std::make_pair(n, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<Complex> scratch(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n),
                                       reinterpret_cast<fftw_complex*>(scratch.data()),
                                       reinterpret_cast<fftw_complex*>(scratch.data()),
                                       sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mu_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void run(Complex* data, std::size_t n, int sign) {
    if (n == 0) return;
    if (n == 1) return;  // scaling by 1/sqrt(1) is the identity
    fftw_plan p = cache().get(n, sign);
    auto* raw = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(p, raw, raw);
}

void scale(Complex* data, std::size_t n) {
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

}  // namespace

void forward(Complex* data, std::size_t n) {
    run(data, n, FFTW_FORWARD);
    scale(data, n);
}

void inverse(Complex* data, std::size_t n) {
    run(data, n, FFTW_BACKWARD);
    scale(data, n);
}

}  // namespace dsltv::fft
