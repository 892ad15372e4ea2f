#include "meldiff/schedule.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "meldiff/errors.hpp"

namespace meldiff {

namespace {
constexpr double kHalfPi = std::numbers::pi / 2.0;
}

double cosine_alpha(double t) {
    if (t < 0.0 || t > 1.0) throw InvalidArgument("fractional time must lie in [0,1]");
    if (t == 0.0) return 1.0;
    if (t == 1.0) return 0.0; // cos(pi/2) does not round to zero; pin the endpoint
    return std::cos(kHalfPi * t);
}

double cosine_sigma(double t) {
    if (t < 0.0 || t > 1.0) throw InvalidArgument("fractional time must lie in [0,1]");
    if (t == 0.0) return 0.0;
    if (t == 1.0) return 1.0;
    return std::sin(kHalfPi * t);
}

double log_snr_at(double t) {
    if (t == 0.0) return std::numeric_limits<double>::infinity();
    if (t == 1.0) return -std::numeric_limits<double>::infinity();
    const double a = cosine_alpha(t);
    const double s = cosine_sigma(t);
    return 2.0 * (std::log(a) - std::log(s));
}

NoiseSchedule make_cosine_schedule(int T) {
    if (T < 1) throw InvalidArgument("schedule needs at least one step, got T=" + std::to_string(T));
    NoiseSchedule s;
    s.T = T;
    s.alpha.resize(static_cast<size_t>(T) + 1);
    s.sigma.resize(static_cast<size_t>(T) + 1);
    for (int i = 0; i <= T; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(T);
        s.alpha[static_cast<size_t>(i)] = cosine_alpha(t);
        s.sigma[static_cast<size_t>(i)] = cosine_sigma(t);
    }
    return s;
}

double log_snr(const NoiseSchedule& s, int i) {
    if (i <= 0 || i >= s.T)
        throw OutOfDomain("log SNR is only defined on interior steps, got i=" + std::to_string(i) +
                          " for T=" + std::to_string(s.T));
    const double a = s.alpha[static_cast<size_t>(i)];
    const double sg = s.sigma[static_cast<size_t>(i)];
    return 2.0 * (std::log(a) - std::log(sg));
}

} // namespace meldiff
