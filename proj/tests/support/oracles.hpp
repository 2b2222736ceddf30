// Test-only oracles, independent of the library's computation paths:
// a Monte Carlo sampler over Beta draws and an adaptive Simpson quadrature
// of the defining integrals.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "bop2/posterior.hpp"

namespace oracle {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

inline double sample_beta(std::mt19937_64& rng, double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0);
    std::gamma_distribution<double> gb(beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

/// Monte Carlo estimate of P(X > Y).
inline McEstimate mc_prob_greater(const bop2::BetaParams& x, const bop2::BetaParams& y,
                                  long draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    long hits = 0;
    for (long i = 0; i < draws; ++i) {
        if (sample_beta(rng, x.alpha, x.beta) > sample_beta(rng, y.alpha, y.beta)) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(draws);
    // variance floor 1/draws keeps the 3-sigma band meaningful at p in {0,1}
    return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(draws)) /
                         static_cast<double>(draws))};
}

/// Monte Carlo estimate of P(X_index is the largest).
inline McEstimate mc_prob_max(int index, std::span<const bop2::BetaParams> arms, long draws,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    long hits = 0;
    std::vector<double> draw(arms.size());
    for (long i = 0; i < draws; ++i) {
        for (std::size_t j = 0; j < arms.size(); ++j) {
            draw[j] = sample_beta(rng, arms[j].alpha, arms[j].beta);
        }
        bool is_max = true;
        for (std::size_t j = 0; j < arms.size(); ++j) {
            if (static_cast<int>(j) != index && draw[j] > draw[static_cast<std::size_t>(index)]) {
                is_max = false;
                break;
            }
        }
        if (is_max) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(draws);
    return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(draws)) /
                         static_cast<double>(draws))};
}

/// Adaptive Simpson quadrature with tolerance splitting.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1);
}

inline double integrate01(const std::function<double(double)>& f, double tol = 1e-12) {
    // Beta-product integrands can be sharp spikes; start from a fine uniform
    // partition so the adaptive refinement cannot miss them.
    constexpr int kPanels = 256;
    double total = 0.0;
    double fa = f(0.0);
    for (int k = 0; k < kPanels; ++k) {
        const double a = static_cast<double>(k) / kPanels;
        const double b = static_cast<double>(k + 1) / kPanels;
        const double fb = f(b);
        const double fm = f(0.5 * (a + b));
        total += adaptive_simpson(f, a, b, fa, fm, fb, tol / kPanels, 40);
        fa = fb;
    }
    return total;
}

inline double beta_pdf(double t, const bop2::BetaParams& p) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp((p.alpha - 1.0) * std::log(t) + (p.beta - 1.0) * std::log1p(-t) -
                    (std::lgamma(p.alpha) + std::lgamma(p.beta) - std::lgamma(p.alpha + p.beta)));
}

/// Quadrature of P(X > Y) = integral of f_X(t) F_Y(t) dt.
inline double quad_prob_greater(const bop2::BetaParams& x, const bop2::BetaParams& y) {
    return integrate01([&](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        return beta_pdf(t, x) * boost::math::ibeta(y.alpha, y.beta, t);
    });
}

/// Quadrature of P(X_index is the largest).
inline double quad_prob_max(int index, std::span<const bop2::BetaParams> arms) {
    return integrate01([&, index](double t) {
        if (t <= 0.0 || t >= 1.0) return 0.0;
        double r = beta_pdf(t, arms[static_cast<std::size_t>(index)]);
        for (std::size_t j = 0; j < arms.size(); ++j) {
            if (static_cast<int>(j) == index) continue;
            r *= boost::math::ibeta(arms[j].alpha, arms[j].beta, t);
        }
        return r;
    });
}

}  // namespace oracle
