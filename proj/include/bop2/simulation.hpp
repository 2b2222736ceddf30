// Monte Carlo estimation of operating characteristics.
//
// Replicates run on independently derived seed streams and land in
// per-replicate slots, so aggregation order is fixed regardless of worker
// count: results are byte-identical for 1 worker and W workers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bop2/posterior.hpp"
#include "bop2/trial.hpp"

namespace bop2 {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct OperatingCharacteristics {
    std::vector<double> reject_rate_per_arm;      // power per arm; type I / FWER under a null
    std::vector<double> ess_per_arm;
    std::vector<double> prop_per_arm;             // mean per-trial allocation proportions
    std::vector<double> early_stop_rate_per_arm;  // any pre-final stop of the arm
    double least_power = 0.0;  // reject rate of the truly best experimental arm
    double fwer = 0.0;         // any experimental arm rejects
    double ess_total = 0.0;
    double early_stop_best = 0.0;
    double prop_best = 0.0;
    int best_arm = 0;
    long n_sims = 0;
    Interval power_ci;      // normal CI on least_power
    Interval ess_ci;        // batch-means bootstrap CI on ess_total
    Interval prop_best_ci;  // empirical 2.5%/97.5% quantiles of per-trial proportions
};

/// p_hat +/- z_{0.975} * sqrt(0.25/n), clipped to [0,1]. The 0.25 is the
/// Bernoulli variance bound, making the interval conservative at any p.
inline Interval normal_ci_power(double p_hat, long n_sims) {
    if (n_sims < 30) throw std::invalid_argument("normal_ci_power: needs n_sims >= 30");
    static const boost::math::normal_distribution<double> norm;
    static const double z = boost::math::quantile(norm, 0.975);
    const double half = z * std::sqrt(0.25 / static_cast<double>(n_sims));
    return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
}

/// Type-7 (linear interpolation) empirical quantile of unsorted data.
inline double empirical_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double h = q * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - std::floor(h)) * (values[hi] - values[lo]);
}

/// Partition per-replicate sample sizes into contiguous batches, average each
/// batch, and take the 2.5%/97.5% quantiles of the batch means.
inline Interval bootstrap_ci_ess(std::span<const int> totals, int batch_count) {
    const long n = static_cast<long>(totals.size());
    if (batch_count < 1 || n % batch_count != 0 || n / batch_count < 30) {
        throw std::invalid_argument(
            "bootstrap_ci_ess: replicate count must split into batches of >= 30");
    }
    const long per = n / batch_count;
    std::vector<double> means(static_cast<std::size_t>(batch_count));
    for (long b = 0; b < batch_count; ++b) {
        double sum = 0.0;
        for (long i = b * per; i < (b + 1) * per; ++i) sum += totals[static_cast<std::size_t>(i)];
        means[static_cast<std::size_t>(b)] = sum / static_cast<double>(per);
    }
    return {empirical_quantile(means, 0.025), empirical_quantile(means, 0.975)};
}

namespace detail {

struct ReplicateRecord {
    std::uint16_t total = 0;
    std::uint16_t n_arm[4] = {0, 0, 0, 0};
    std::uint8_t reject_mask = 0;
    std::uint8_t early_mask = 0;
};

class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

}  // namespace detail

struct SimulationOptions {
    int workers = 1;
    int ess_batch_count = 100;  // batches for the ESS bootstrap CI
};

inline OperatingCharacteristics estimate_oc(const TrialDesign& design, const Scenario& scenario,
                                            long n_sims, std::uint64_t master_seed,
                                            PosteriorCache& cache,
                                            const SimulationOptions& options = {}) {
    if (n_sims < 1) throw ConfigError("estimate_oc: n_sims must be >= 1");
    design.validate();
    scenario.validate(design);
    const int n_arms = design.n_arms();

    std::vector<detail::ReplicateRecord> records(static_cast<std::size_t>(n_sims));
    auto run_range = [&](int worker, int stride) {
        for (long i = worker; i < n_sims; i += stride) {
            Rng rng(master_seed, static_cast<std::uint64_t>(i));
            const TrialResult r = run_trial(design, scenario, rng, &cache);
            auto& rec = records[static_cast<std::size_t>(i)];
            rec.total = static_cast<std::uint16_t>(r.total_enrolled);
            for (int a = 0; a < n_arms; ++a) {
                const auto& arm = r.arms[static_cast<std::size_t>(a)];
                rec.n_arm[a] = static_cast<std::uint16_t>(arm.n);
                if (arm.reject_null) rec.reject_mask |= static_cast<std::uint8_t>(1u << a);
                if (arm.status != ArmStatus::Active) {
                    rec.early_mask |= static_cast<std::uint8_t>(1u << a);
                }
            }
        }
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        run_range(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
        for (auto& t : pool) t.join();
    }

    // Sequential reduction in replicate order: deterministic regardless of
    // how the replicates were distributed across workers.
    OperatingCharacteristics oc;
    oc.n_sims = n_sims;
    oc.best_arm = scenario.best_experimental_arm(design);
    std::vector<detail::KahanSum> reject(static_cast<std::size_t>(n_arms));
    std::vector<detail::KahanSum> ess(static_cast<std::size_t>(n_arms));
    std::vector<detail::KahanSum> prop(static_cast<std::size_t>(n_arms));
    std::vector<detail::KahanSum> early(static_cast<std::size_t>(n_arms));
    detail::KahanSum total_sum, fwer_sum;
    std::vector<int> totals(static_cast<std::size_t>(n_sims));
    std::vector<double> best_props(static_cast<std::size_t>(n_sims));
    for (long i = 0; i < n_sims; ++i) {
        const auto& rec = records[static_cast<std::size_t>(i)];
        totals[static_cast<std::size_t>(i)] = rec.total;
        total_sum.add(rec.total);
        const std::uint8_t exp_mask =
            static_cast<std::uint8_t>(((1u << n_arms) - 1u) & ~(design.controlled ? 1u : 0u));
        fwer_sum.add((rec.reject_mask & exp_mask) != 0 ? 1.0 : 0.0);
        for (int a = 0; a < n_arms; ++a) {
            reject[static_cast<std::size_t>(a)].add((rec.reject_mask >> a) & 1u);
            ess[static_cast<std::size_t>(a)].add(rec.n_arm[a]);
            early[static_cast<std::size_t>(a)].add((rec.early_mask >> a) & 1u);
            prop[static_cast<std::size_t>(a)].add(static_cast<double>(rec.n_arm[a]) / rec.total);
        }
        best_props[static_cast<std::size_t>(i)] =
            static_cast<double>(rec.n_arm[oc.best_arm]) / rec.total;
    }

    const double inv = 1.0 / static_cast<double>(n_sims);
    oc.reject_rate_per_arm.resize(static_cast<std::size_t>(n_arms));
    oc.ess_per_arm.resize(static_cast<std::size_t>(n_arms));
    oc.prop_per_arm.resize(static_cast<std::size_t>(n_arms));
    oc.early_stop_rate_per_arm.resize(static_cast<std::size_t>(n_arms));
    for (int a = 0; a < n_arms; ++a) {
        oc.reject_rate_per_arm[static_cast<std::size_t>(a)] =
            reject[static_cast<std::size_t>(a)].value() * inv;
        oc.ess_per_arm[static_cast<std::size_t>(a)] = ess[static_cast<std::size_t>(a)].value() * inv;
        oc.prop_per_arm[static_cast<std::size_t>(a)] =
            prop[static_cast<std::size_t>(a)].value() * inv;
        oc.early_stop_rate_per_arm[static_cast<std::size_t>(a)] =
            early[static_cast<std::size_t>(a)].value() * inv;
    }
    oc.ess_total = total_sum.value() * inv;
    oc.fwer = fwer_sum.value() * inv;
    oc.least_power = oc.reject_rate_per_arm[static_cast<std::size_t>(oc.best_arm)];
    oc.early_stop_best = oc.early_stop_rate_per_arm[static_cast<std::size_t>(oc.best_arm)];
    oc.prop_best = oc.prop_per_arm[static_cast<std::size_t>(oc.best_arm)];
    if (n_sims >= 30) {
        oc.power_ci = normal_ci_power(oc.least_power, n_sims);
    }
    const int bc = options.ess_batch_count;
    if (bc >= 1 && n_sims % bc == 0 && n_sims / bc >= 30) {
        oc.ess_ci = bootstrap_ci_ess(totals, bc);
    } else {
        oc.ess_ci = {oc.ess_total, oc.ess_total};
    }
    if (n_sims >= 2) {
        oc.prop_best_ci = {empirical_quantile(best_props, 0.025),
                           empirical_quantile(best_props, 0.975)};
    }
    return oc;
}

}  // namespace bop2
