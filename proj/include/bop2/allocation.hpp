// Randomization schemes and permuted-block assignment.
//
// Adaptive schemes temper posterior probabilities with a tuning exponent
// c = n/(2N) and are recomputed only at interim analyses; between analyses
// the block randomizer keeps realizing the last target. Blocks are built by
// largest-remainder apportionment with the fractional slots resolved by
// systematic (Madow) sampling, so per-block expected counts match the target
// exactly.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "bop2/posterior.hpp"
#include "bop2/rng.hpp"

namespace bop2 {

struct AllocationProbabilities {
    std::vector<double> probs;  // indexed like the arm list handed to the scheme
};

struct TuningExponent {
    double c = 0.0;
};

/// c = n/(2N): adaptation sharpens as total information accrues.
inline TuningExponent tuning_exponent(int n, int N) {
    if (N <= 0 || n < 0 || n > N) {
        throw std::domain_error("tuning_exponent: requires 0 <= n <= N, N > 0");
    }
    return {static_cast<double>(n) / (2.0 * static_cast<double>(N))};
}

inline AllocationProbabilities equal_allocation(int n_arms) {
    if (n_arms < 1) throw std::invalid_argument("equal_allocation: no active arms");
    return {std::vector<double>(static_cast<std::size_t>(n_arms), 1.0 / n_arms)};
}

/// Two-arm BRAR: p1 = p^c / (p^c + (1-p)^c) with p = P(theta_1 >= theta_0 | D).
/// Returns (p0, p1). The 0^0 corner resolves to equal allocation.
inline AllocationProbabilities brar_two_arm(double p_better, TuningExponent t) {
    if (!(p_better >= 0.0 && p_better <= 1.0)) {
        throw std::domain_error("brar_two_arm: p_better must lie in [0,1]");
    }
    const double a = std::pow(p_better, t.c);        // pow(0,0) == 1
    const double b = std::pow(1.0 - p_better, t.c);
    const double p1 = a / (a + b);
    return {{1.0 - p1, p1}};
}

namespace detail {

inline void power_normalize(std::vector<double>& w, double c) {
    double sum = 0.0;
    for (double& x : w) {
        x = std::pow(x, c);
        sum += x;
    }
    for (double& x : w) x /= sum;
}

}  // namespace detail

/// Trippa-style control-protecting scheme. Treatment weights are
/// P(theta_i > Theta | D)^c; the control weight exp(c*(max_i n_i - n_0))
/// depends only on the sample-size imbalance, never on the control posterior,
/// and ties the control allocation to the best-recruiting treatment arm.
/// `exceed_probs` holds P(theta_i > Theta | D) per treatment arm.
inline AllocationProbabilities trippa_allocation(std::span<const double> exceed_probs,
                                                 std::span<const int> treatment_counts,
                                                 int control_count, TuningExponent t) {
    if (exceed_probs.empty() || exceed_probs.size() != treatment_counts.size()) {
        throw std::invalid_argument("trippa_allocation: mismatched treatment inputs");
    }
    const int max_n = *std::max_element(treatment_counts.begin(), treatment_counts.end());
    std::vector<double> w;
    w.reserve(exceed_probs.size() + 1);
    w.push_back(std::exp(t.c * static_cast<double>(max_n - control_count)));
    for (double p : exceed_probs) w.push_back(std::pow(p, t.c));
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return {std::move(w)};
}

/// Convenience overload computing the exceedance probabilities directly.
inline AllocationProbabilities trippa_allocation(std::span<const BetaParams> treatment_posteriors,
                                                 std::span<const int> treatment_counts,
                                                 int control_count, double theta_ref,
                                                 TuningExponent t) {
    std::vector<double> probs(treatment_posteriors.size());
    for (std::size_t i = 0; i < treatment_posteriors.size(); ++i) {
        probs[i] = prob_exceeds_threshold(treatment_posteriors[i], theta_ref);
    }
    return trippa_allocation(probs, treatment_counts, control_count, t);
}

/// Maximum scheme: p_i proportional to P(theta_i is the largest | D)^c.
inline AllocationProbabilities maximum_allocation(std::span<const BetaParams> posteriors,
                                                  TuningExponent t) {
    const auto pm = prob_max_all(posteriors);  // validates arity 2..4
    std::vector<double> w(pm.begin(), pm.begin() + posteriors.size());
    detail::power_normalize(w, t.c);
    return {std::move(w)};
}

/// Same scheme from precomputed prob_max values (e.g. a cache).
inline AllocationProbabilities maximum_allocation_from(std::span<const double> prob_max_values,
                                                       TuningExponent t) {
    std::vector<double> w(prob_max_values.begin(), prob_max_values.end());
    detail::power_normalize(w, t.c);
    return {std::move(w)};
}

/// Optional clipping hook (default-off in every shipped design): clamp each
/// probability into [lo, hi] and renormalize.
inline AllocationProbabilities clip_probabilities(AllocationProbabilities p, double lo, double hi) {
    if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) {
        throw std::domain_error("clip_probabilities: need 0 <= lo < hi <= 1");
    }
    double sum = 0.0;
    for (double& x : p.probs) {
        x = std::clamp(x, lo, hi);
        sum += x;
    }
    for (double& x : p.probs) x /= sum;
    return p;
}

/// One permuted block: per-arm counts are floor(B * p_i) plus fractional
/// slots assigned by systematic sampling on the remainders (inclusion
/// probability exactly the remainder), then a uniform shuffle.
/// `arm_ids[i]` labels the arm behind probs[i]; capacities bound per-arm
/// counts (overflow redistributed to arms with spare capacity).
inline std::vector<std::uint8_t> build_permuted_block(std::span<const double> probs,
                                                      std::span<const std::uint8_t> arm_ids,
                                                      std::span<const int> capacity, int block_size,
                                                      Rng& rng) {
    const int m = static_cast<int>(probs.size());
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    std::vector<double> remainder(static_cast<std::size_t>(m), 0.0);
    int assigned = 0;
    for (int i = 0; i < m; ++i) {
        const double ideal = block_size * probs[i];
        counts[i] = static_cast<int>(std::floor(ideal));
        remainder[i] = ideal - counts[i];
        assigned += counts[i];
    }
    const int leftover = block_size - assigned;
    if (leftover > 0) {
        // Systematic sampling: points u, u+1, ..., u+leftover-1 walked across
        // the cumulative remainders select "leftover" distinct arms, each with
        // inclusion probability equal to its remainder.
        std::vector<double> cum(static_cast<std::size_t>(m));
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            acc += remainder[i];
            cum[i] = acc;
        }
        const double u = rng.next_double();
        int idx = 0;
        for (int j = 0; j < leftover; ++j) {
            const double point = u + j;
            while (idx < m - 1 && point >= cum[idx]) ++idx;
            ++counts[idx];
        }
    }
    // Respect per-arm capacities; spill excess to arms with room, by index.
    for (int i = 0; i < m; ++i) {
        if (counts[i] <= capacity[i]) continue;
        int excess = counts[i] - capacity[i];
        counts[i] = capacity[i];
        for (int j = 0; j < m && excess > 0; ++j) {
            if (j == i) continue;
            const int room = capacity[j] - counts[j];
            const int take = std::min(room, excess);
            counts[j] += take;
            excess -= take;
        }
    }
    std::vector<std::uint8_t> block;
    block.reserve(static_cast<std::size_t>(block_size));
    for (int i = 0; i < m; ++i) {
        for (int c = 0; c < counts[i]; ++c) block.push_back(arm_ids[i]);
    }
    rng.shuffle(block.begin(), block.end());
    return block;
}

/// Queue of pending assignments realizing the current target. One instance
/// per simulated trial; never shared across replicates.
class BlockRandomizer {
public:
    void reset(std::vector<double> probs, std::vector<std::uint8_t> arm_ids, int block_size) {
        probs_ = std::move(probs);
        arm_ids_ = std::move(arm_ids);
        block_size_ = block_size;
        pending_.clear();
        cursor_ = 0;
    }

    bool has_target() const { return !arm_ids_.empty(); }
    bool mid_block() const { return cursor_ < pending_.size(); }

    std::uint8_t draw(std::span<const int> capacity, int max_patients, Rng& rng) {
        if (cursor_ >= pending_.size()) {
            const int b = std::min(block_size_, max_patients);
            pending_ = build_permuted_block(probs_, arm_ids_, capacity, b, rng);
            cursor_ = 0;
        }
        return pending_[cursor_++];
    }

private:
    std::vector<double> probs_;
    std::vector<std::uint8_t> arm_ids_;
    std::vector<std::uint8_t> pending_;
    std::size_t cursor_ = 0;
    int block_size_ = 0;
};

}  // namespace bop2
