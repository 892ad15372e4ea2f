#pragma once

#include <vector>

namespace meldiff {

// Discretized variance-preserving cosine schedule. Index 0 is clean data
// (alpha = 1), index T is pure noise (alpha = 0, exactly). Immutable after
// construction; safe for concurrent reads.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> alpha; // T+1 entries, strictly decreasing
    std::vector<double> sigma; // T+1 entries, strictly increasing
};

// Signal coefficient cos(0.5*pi*t) with exact endpoints at t = 0 and t = 1.
double cosine_alpha(double t);
// Noise coefficient sin(0.5*pi*t), same endpoint handling.
double cosine_sigma(double t);

// Unguarded log signal-to-noise ratio log(alpha^2/sigma^2) at fractional time;
// returns +inf at t = 0 and -inf at t = 1. Weighting functions accept the
// infinities, so endpoint handling stays in one code path.
double log_snr_at(double t);

// Tabulates alpha_i = cos(0.5*pi*i/T), sigma_i = sin(0.5*pi*i/T).
NoiseSchedule make_cosine_schedule(int T);

// Guarded log SNR at a discrete interior index. Endpoints (i = 0, i = T)
// are out of domain; callers needing endpoint weights go through the
// weighting functions instead.
double log_snr(const NoiseSchedule& s, int i);

} // namespace meldiff
