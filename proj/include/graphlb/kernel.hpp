#pragma once

#include "graphlb/common.hpp"

#include <string>

namespace graphlb {

enum class KernelProfile { Indicator, Bump, TruncGauss };

inline std::string to_string(KernelProfile p) {
    switch (p) {
        case KernelProfile::Indicator: return "indicator";
        case KernelProfile::Bump: return "bump";
        default: return "gauss";
    }
}

/// A radial kernel profile eta supported on [0,1], normalized so that
/// int_{R^m} eta(|x|) dx = 1, together with its derived quantities: the
/// surface tension sigma = int |y_1|^2 eta(|y|) dy (the scale factor linking
/// the discrete and continuum Dirichlet forms), the Lipschitz constant of
/// eta on [0,1], and the induced smoothing profile
/// psi(t) = (1/sigma) int_t^1 eta(s) s ds, normalized in the same sense.
struct KernelSpec {
    KernelProfile profile = KernelProfile::Indicator;
    int m = 2;            // dimension the normalization refers to
    double norm_const = 0.0;
    double sigma = 0.0;   // surface tension
    double lipschitz = 0.0;
    double eta0 = 0.0;
    double eta_half = 0.0;

    double eta(double t) const {
        if (t < 0.0 || t > 1.0) return 0.0;
        switch (profile) {
            case KernelProfile::Indicator: return norm_const;
            case KernelProfile::Bump: return norm_const * (1.0 - t);
            default: return norm_const * std::exp(-0.5 * t * t);
        }
    }

    double psi(double t) const {
        if (t < 0.0) t = 0.0;
        if (t >= 1.0) return 0.0;
        switch (profile) {
            case KernelProfile::Indicator:
                return norm_const * 0.5 * (1.0 - t * t) / sigma;
            case KernelProfile::Bump:
                return norm_const * (1.0 / 6.0 - 0.5 * t * t + t * t * t / 3.0) / sigma;
            default:
                return norm_const * (std::exp(-0.5 * t * t) - std::exp(-0.5)) / sigma;
        }
    }
};

/// Build a normalized kernel for intrinsic dimension m. Surface tension in
/// closed form for the indicator and bump profiles, by adaptive radial
/// quadrature for the truncated Gaussian.
inline KernelSpec make_kernel(KernelProfile profile, int m) {
    if (m < 2) throw std::invalid_argument("make_kernel: dimension must be >= 2");
    KernelSpec k;
    k.profile = profile;
    k.m = m;
    const double wm = unit_ball_volume(m);
    switch (profile) {
        case KernelProfile::Indicator:
            k.norm_const = 1.0 / wm;
            k.sigma = 1.0 / (m + 2);
            k.lipschitz = 0.0;
            break;
        case KernelProfile::Bump:
            // int eta = m*wm*c*int_0^1 (1-r) r^{m-1} dr = wm*c/(m+1)
            k.norm_const = (m + 1) / wm;
            k.sigma = double(m + 1) / (double(m + 2) * double(m + 3));
            k.lipschitz = k.norm_const;
            break;
        case KernelProfile::TruncGauss: {
            const auto shape = [](double r) { return std::exp(-0.5 * r * r); };
            const double mass = m * wm *
                adaptive_simpson([&](double r) { return shape(r) * std::pow(r, m - 1); }, 0.0, 1.0, 1e-14);
            k.norm_const = 1.0 / mass;
            // sigma = wm * int_0^1 eta(r) r^{m+1} dr
            k.sigma = wm * k.norm_const *
                adaptive_simpson([&](double r) { return shape(r) * std::pow(r, m + 1); }, 0.0, 1.0, 1e-14);
            // |eta'| = c * r * exp(-r^2/2) is increasing on [0,1]
            k.lipschitz = k.norm_const * std::exp(-0.5);
            break;
        }
    }
    k.eta0 = k.eta(0.0);
    k.eta_half = k.eta(0.5);
    return k;
}

inline KernelProfile kernel_profile_from_string(const std::string& s) {
    if (s == "indicator") return KernelProfile::Indicator;
    if (s == "bump") return KernelProfile::Bump;
    if (s == "gauss") return KernelProfile::TruncGauss;
    throw std::invalid_argument("unknown kernel profile: " + s);
}

} // namespace graphlb
