#include "facing/signal.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "facing/error.hpp"

namespace facing {
namespace {

void check_samples(std::span<const double> x, int sample_rate, const char* what) {
    if (sample_rate <= 0) throw InvalidInput(std::string(what) + ": sample rate must be positive");
    for (double v : x)
        if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite sample");
}

}  // namespace

void validate(const Signal& s, const char* what) { check_samples(s.samples, s.sample_rate, what); }

void validate(const ImpulseResponse& h, const char* what) {
    if (h.taps.empty()) throw InvalidInput(std::string(what) + ": needs at least one tap");
    check_samples(h.taps, h.sample_rate, what);
}

double energy(std::span<const double> x) noexcept {
    return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

double rms(std::span<const double> x) noexcept {
    return x.empty() ? 0.0 : std::sqrt(energy(x) / static_cast<double>(x.size()));
}

}  // namespace facing
