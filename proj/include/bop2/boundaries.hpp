// BOP2 stopping thresholds and the stop/continue decision rules.
//
// All thresholds are expressed on the P(treatment better) scale: an arm stops
// for futility when its posterior superiority statistic falls below
// lambda*(n/N)^gamma, and (when enabled) stops for efficacy when the same
// statistic exceeds 2*Phi(z_{(1+lambda)/2} * N/n) - 1. Both curves meet at
// lambda when n = N, which makes the final analysis decisive.
#pragma once

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace bop2 {

struct BoundaryParams {
    double lambda = 0.0;
    double gamma = 0.0;
};

inline void check_boundary_params(const BoundaryParams& p) {
    if (!(p.lambda >= 0.0 && p.lambda <= 1.0 && p.gamma >= 0.0 && p.gamma <= 1.0)) {
        throw std::domain_error("BoundaryParams: lambda and gamma must lie in [0,1]");
    }
}

struct InformationFraction {
    int n = 0;  // enrolled with observed outcomes
    int N = 0;  // maximum sample size

    double fraction() const { return static_cast<double>(n) / static_cast<double>(N); }
};

inline void check_information_fraction(const InformationFraction& f) {
    if (!(f.n > 0 && f.n <= f.N)) {
        throw std::domain_error("InformationFraction: requires 0 < n <= N");
    }
}

/// Futility boundary lambda*(n/N)^gamma; stop when P(better) falls below it.
inline double futility_threshold(const BoundaryParams& p, const InformationFraction& f) {
    check_boundary_params(p);
    check_information_fraction(f);
    return p.lambda * std::pow(f.fraction(), p.gamma);
}

/// Efficacy boundary 2*Phi(z_{(1+lambda)/2} * N/n) - 1; stop when P(better)
/// exceeds it. Tends to 1 as n/N -> 0 and equals lambda at n = N.
inline double efficacy_threshold(const BoundaryParams& p, const InformationFraction& f) {
    check_boundary_params(p);
    check_information_fraction(f);
    if (p.lambda >= 1.0) {
        throw std::domain_error("efficacy_threshold: degenerate boundary at lambda = 1");
    }
    static const boost::math::normal_distribution<double> norm;
    const double z = boost::math::quantile(norm, (1.0 + p.lambda) / 2.0);
    return 2.0 * boost::math::cdf(norm, z / f.fraction()) - 1.0;
}

/// Multi-arm-adjusted futility boundary on the P(worse) scale:
/// stop arm i when P(theta_i <= theta_0 | D) exceeds
/// 1 - ((K+1-a-lambda)/(K+1-a)) * (n/N)^gamma.
inline double multiarm_futility_threshold(const BoundaryParams& p, const InformationFraction& f,
                                          int total_arms, int active_arms) {
    check_boundary_params(p);
    check_information_fraction(f);
    if (active_arms < 1 || active_arms > total_arms) {
        throw std::domain_error("multiarm_futility_threshold: requires 1 <= a <= K");
    }
    const double denom = static_cast<double>(total_arms + 1 - active_arms);
    return 1.0 - ((denom - p.lambda) / denom) * std::pow(f.fraction(), p.gamma);
}

enum class Stage { Interim, Final };

enum class Decision { Continue, StopFutility, StopEfficacy, RejectNull, AcceptNull };

/// Apply the stop/continue rules to one arm's superiority statistic.
/// Ties continue at interims; at the final analysis the statistic must reach
/// lambda to reject, and a decision is always made.
inline Decision decide(double statistic, const BoundaryParams& p, const InformationFraction& f,
                       Stage stage, bool efficacy_stopping) {
    if (stage == Stage::Final) {
        return statistic >= p.lambda ? Decision::RejectNull : Decision::AcceptNull;
    }
    if (statistic < futility_threshold(p, f)) return Decision::StopFutility;
    if (efficacy_stopping && p.lambda < 1.0 && statistic > efficacy_threshold(p, f)) {
        return Decision::StopEfficacy;
    }
    return Decision::Continue;
}

}  // namespace bop2
