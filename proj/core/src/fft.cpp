#include "facing/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace facing::fft {
namespace {

// fftw planning is not thread-safe; execution with the new-array API is.
class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, bool forward) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, forward);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        auto* real = fftw_alloc_real(n);
        auto* cplx = fftw_alloc_complex(n / 2 + 1);
        const int len = static_cast<int>(n);
        fftw_plan plan = forward ? fftw_plan_dft_r2c_1d(len, real, cplx, FFTW_ESTIMATE)
                                 : fftw_plan_dft_c2r_1d(len, cplx, real, FFTW_ESTIMATE);
        fftw_free(real);
        fftw_free(cplx);
        if (plan == nullptr) throw std::runtime_error("fftw planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, bool>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwFree>;

}  // namespace

std::size_t good_size(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

Spectrum forward(std::span<const double> x, std::size_t n) {
    if (n == 0) throw std::invalid_argument("fft size must be positive");
    RealBuffer in(fftw_alloc_real(n));
    ComplexBuffer out(fftw_alloc_complex(n / 2 + 1));
    const std::size_t copy = std::min(n, x.size());
    std::copy_n(x.begin(), copy, in.get());
    std::fill(in.get() + copy, in.get() + n, 0.0);

    fftw_execute_dft_r2c(cache().get(n, true), in.get(), out.get());

    Spectrum result(n / 2 + 1);
    for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out.get()[k][0], out.get()[k][1]};
    return result;
}

std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n) {
    if (bins.size() != n / 2 + 1) throw std::invalid_argument("bin count does not match fft size");
    ComplexBuffer in(fftw_alloc_complex(n / 2 + 1));
    RealBuffer out(fftw_alloc_real(n));
    // c2r destroys its input, so always work on a private copy.
    std::memcpy(in.get(), bins.data(), sizeof(fftw_complex) * bins.size());

    fftw_execute_dft_c2r(cache().get(n, false), in.get(), out.get());

    std::vector<double> result(out.get(), out.get() + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : result) v *= scale;
    return result;
}

}  // namespace facing::fft
