// The trial state machine: recruit in permuted blocks, generate outcomes,
// apply boundary decisions at scheduled interim analyses, drop or stop arms,
// reallocate, and report the trial path.
//
// Analyses run at block boundaries: a scheduled look that lands mid-block is
// carried out once the block completes. Information fractions use the current
// effective maximum enrollment, which shrinks when an arm is dropped under the
// shrink policy, so the final analysis is always decisive.
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "bop2/allocation.hpp"
#include "bop2/boundaries.hpp"
#include "bop2/design.hpp"
#include "bop2/posterior.hpp"
#include "bop2/rng.hpp"

namespace bop2 {

enum class ArmStatus : std::uint8_t { Active, DroppedFutility, StoppedEfficacy, StoppedToxicity };

inline const char* arm_status_name(ArmStatus s) {
    switch (s) {
        case ArmStatus::Active: return "active";
        case ArmStatus::DroppedFutility: return "dropped_futility";
        case ArmStatus::StoppedEfficacy: return "stopped_efficacy";
        case ArmStatus::StoppedToxicity: return "stopped_toxicity";
    }
    return "?";
}

struct ArmState {
    int n = 0;
    int successes = 0;
    int toxicities = 0;
    ArmStatus status = ArmStatus::Active;
    bool reject_null = false;
    int stop_stage = 0;  // 1-based analysis index at which the arm left Active; 0 = reached final
};

struct TrialResult {
    std::vector<ArmState> arms;
    int total_enrolled = 0;
    int stop_stage = 0;  // 1-based analysis index at which the whole trial stopped; 0 = final

    bool any_reject(const TrialDesign& design) const {
        for (int i = design.first_experimental(); i < static_cast<int>(arms.size()); ++i) {
            if (arms[static_cast<std::size_t>(i)].reject_null) return true;
        }
        return false;
    }
};

/// Optional per-trial recording for the trace command and debugging plots.
struct TraceSink {
    struct Patient {
        int index;
        int arm;
        bool success;
        bool toxicity;
    };
    struct Analysis {
        int analysis;  // 1-based; 0 for the final analysis
        int arm;
        int n_total;
        int n_arm;
        double futility_threshold;
        double efficacy_threshold;  // NaN when efficacy stopping is off
        double statistic;
        double toxicity_statistic;  // NaN when not monitored
        Decision decision;
        double allocation_prob;  // target set after this analysis; NaN if none
    };
    std::vector<Patient> patients;
    std::vector<Analysis> analyses;
};

namespace detail {

inline constexpr int kUncapped = std::numeric_limits<int>::max() / 4;

struct EngineArm {
    int n = 0;
    int successes = 0;
    int toxicities = 0;
    int cap = kUncapped;
    ArmStatus status = ArmStatus::Active;
    bool reject = false;
    int stop_stage = 0;
    double weight = 1.0;  // last allocation weight; renormalized over the pool
};

inline BetaParams success_posterior(const EngineArm& a) {
    return {1.0 + a.successes, 1.0 + (a.n - a.successes)};
}

inline BetaParams toxicity_posterior(const EngineArm& a) {
    return {1.0 + a.toxicities, 1.0 + (a.n - a.toxicities)};
}

}  // namespace detail

/// Split a dropped arm's unfilled quota equally over the recipients;
/// the remainder goes one patient at a time to recipients in index order.
inline std::vector<int> redistribute_quota(int unfilled, int recipients) {
    std::vector<int> out(static_cast<std::size_t>(recipients), 0);
    if (recipients == 0 || unfilled <= 0) return out;
    const int base = unfilled / recipients;
    const int rem = unfilled % recipients;
    for (int i = 0; i < recipients; ++i) out[i] = base + (i < rem ? 1 : 0);
    return out;
}

inline TrialResult run_trial(const TrialDesign& design, const Scenario& scenario, Rng& rng,
                             PosteriorCache* cache = nullptr, TraceSink* trace = nullptr) {
    design.validate();
    scenario.validate(design);

    const int n_arms = design.n_arms();
    std::vector<detail::EngineArm> arms(static_cast<std::size_t>(n_arms));
    if (design.per_arm_cap) {
        for (auto& a : arms) a.cap = *design.per_arm_cap;
    }

    std::unique_ptr<PosteriorCache> local_cache;
    if (!cache) local_cache = std::make_unique<PosteriorCache>();
    PosteriorCache& pc = cache ? *cache : *local_cache;

    int total = 0;
    std::size_t next_ia = 0;
    int trial_stop_stage = 0;
    bool trial_over = false;

    auto active_experimental = [&] {
        int c = 0;
        for (int i = design.first_experimental(); i < n_arms; ++i) {
            if (arms[static_cast<std::size_t>(i)].status == ArmStatus::Active) ++c;
        }
        return c;
    };
    auto effective_max = [&] {
        if (!design.per_arm_cap) return design.max_total;
        long long sum = 0;
        for (const auto& a : arms) sum += (a.status == ArmStatus::Active) ? a.cap : a.n;
        return static_cast<int>(std::min<long long>(design.max_total, sum));
    };
    auto statistic_for = [&](int i) {
        const BetaParams post = detail::success_posterior(arms[static_cast<std::size_t>(i)]);
        if (design.controlled) {
            return pc.prob_greater(post, detail::success_posterior(arms[0]));
        }
        return pc.prob_exceeds(post, *design.theta_ref);
    };
    auto toxicity_statistic_for = [&](int i) {
        const BetaParams post = detail::toxicity_posterior(arms[static_cast<std::size_t>(i)]);
        if (design.controlled) {
            return pc.prob_greater(detail::toxicity_posterior(arms[0]), post);
        }
        return 1.0 - pc.prob_exceeds(post, *design.phi_ref);
    };

    // Allocation weights: start from equal allocation; adaptive schemes
    // overwrite at each interim analysis. The realized target at any moment is
    // the weight vector renormalized over arms that are active and below cap.
    auto update_adaptive_weights = [&](int emax) {
        const TuningExponent c = tuning_exponent(total, emax);
        switch (design.scheme) {
            case Scheme::Equal:
                break;
            case Scheme::Brar2: {
                const double stat = statistic_for(1);
                const auto p = brar_two_arm(stat, c);
                arms[0].weight = p.probs[0];
                arms[1].weight = p.probs[1];
                break;
            }
            case Scheme::Trippa: {
                std::vector<double> probs;
                std::vector<int> counts;
                std::vector<int> ids;
                for (int i = design.first_experimental(); i < n_arms; ++i) {
                    const auto& a = arms[static_cast<std::size_t>(i)];
                    if (a.status != ArmStatus::Active) continue;
                    probs.push_back(
                        pc.prob_exceeds(detail::success_posterior(a), *design.theta_ref));
                    counts.push_back(a.n);
                    ids.push_back(i);
                }
                if (ids.empty()) break;
                if (design.controlled) {
                    const auto p = trippa_allocation(probs, counts, arms[0].n, c);
                    arms[0].weight = p.probs[0];
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                        arms[static_cast<std::size_t>(ids[k])].weight = p.probs[k + 1];
                    }
                } else {
                    detail::power_normalize(probs, c.c);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                        arms[static_cast<std::size_t>(ids[k])].weight = probs[k];
                    }
                }
                break;
            }
            case Scheme::Maximum: {
                std::vector<BetaParams> posts;
                std::vector<int> ids;
                for (int i = 0; i < n_arms; ++i) {
                    const auto& a = arms[static_cast<std::size_t>(i)];
                    if (a.status != ArmStatus::Active) continue;
                    posts.push_back(detail::success_posterior(a));
                    ids.push_back(i);
                }
                if (ids.size() < 2) {
                    for (int id : ids) arms[static_cast<std::size_t>(id)].weight = 1.0;
                    break;
                }
                const auto pm = pc.prob_max_all(posts);
                std::vector<double> w(pm.begin(), pm.begin() + ids.size());
                detail::power_normalize(w, c.c);
                for (std::size_t k = 0; k < ids.size(); ++k) {
                    arms[static_cast<std::size_t>(ids[k])].weight = w[k];
                }
                break;
            }
        }
    };

    auto run_interim = [&](int analysis_index, int emax) {
        const InformationFraction f{total, emax};
        const double fut = futility_threshold(design.boundary, f);
        const bool eff_on = design.efficacy_stopping && design.boundary.lambda < 1.0;
        const double eff = eff_on ? efficacy_threshold(design.boundary, f)
                                  : std::numeric_limits<double>::quiet_NaN();

        // Decisions are taken on a single data snapshot for every arm, then
        // reallocation is applied arm by arm in index order.
        std::vector<int> dropped;
        for (int i = design.first_experimental(); i < n_arms; ++i) {
            auto& arm = arms[static_cast<std::size_t>(i)];
            if (arm.status != ArmStatus::Active) continue;
            const double stat = statistic_for(i);
            double tox_stat = std::numeric_limits<double>::quiet_NaN();
            Decision d;
            if (design.toxicity_monitoring && (tox_stat = toxicity_statistic_for(i)) < fut) {
                d = Decision::StopFutility;  // toxicity rule mirrors the futility rule
                arm.status = ArmStatus::StoppedToxicity;
            } else {
                d = decide(stat, design.boundary, f, Stage::Interim, design.efficacy_stopping);
                if (d == Decision::StopFutility) {
                    arm.status = ArmStatus::DroppedFutility;
                } else if (d == Decision::StopEfficacy) {
                    arm.status = ArmStatus::StoppedEfficacy;
                    arm.reject = true;
                }
            }
            if (arm.status != ArmStatus::Active) {
                arm.stop_stage = analysis_index;
                dropped.push_back(i);
            }
            if (trace) {
                trace->analyses.push_back({analysis_index, i, total, arm.n, fut, eff, stat,
                                           tox_stat, d,
                                           std::numeric_limits<double>::quiet_NaN()});
            }
        }

        for (int d : dropped) {
            auto& dead = arms[static_cast<std::size_t>(d)];
            const int unfilled = (dead.cap >= detail::kUncapped) ? 0 : dead.cap - dead.n;
            dead.cap = dead.n;
            if (design.reallocation == Reallocation::Redistribute && unfilled > 0) {
                std::vector<int> recipients;
                for (int i = 0; i < n_arms; ++i) {
                    const auto& a = arms[static_cast<std::size_t>(i)];
                    if (a.status == ArmStatus::Active && a.n < a.cap) recipients.push_back(i);
                }
                const auto extra = redistribute_quota(unfilled, static_cast<int>(recipients.size()));
                for (std::size_t k = 0; k < recipients.size(); ++k) {
                    arms[static_cast<std::size_t>(recipients[k])].cap += extra[k];
                }
            }
        }

        if (active_experimental() == 0) {
            trial_stop_stage = analysis_index;
            trial_over = true;
            return;
        }
        if (total >= design.burn_in) update_adaptive_weights(effective_max());
    };

    auto run_final = [&](int emax) {
        const InformationFraction f{total, emax};
        for (int i = design.first_experimental(); i < n_arms; ++i) {
            auto& arm = arms[static_cast<std::size_t>(i)];
            if (arm.status != ArmStatus::Active) continue;
            const double stat = statistic_for(i);
            Decision d = decide(stat, design.boundary, f, Stage::Final, false);
            double tox_stat = std::numeric_limits<double>::quiet_NaN();
            if (design.toxicity_monitoring) {
                tox_stat = toxicity_statistic_for(i);
                if (tox_stat < design.boundary.lambda) d = Decision::AcceptNull;
            }
            arm.reject = (d == Decision::RejectNull);
            if (trace) {
                trace->analyses.push_back({0, i, total, arm.n, design.boundary.lambda,
                                           design.boundary.lambda, stat, tox_stat, d,
                                           std::numeric_limits<double>::quiet_NaN()});
            }
        }
    };

    std::vector<double> pool_probs;
    std::vector<std::uint8_t> pool_ids;
    std::vector<int> pool_room;

    while (!trial_over) {
        if (active_experimental() == 0) break;
        const int emax = effective_max();
        if (total >= emax) {
            run_final(emax);
            break;
        }

        pool_probs.clear();
        pool_ids.clear();
        pool_room.clear();
        double wsum = 0.0;
        for (int i = 0; i < n_arms; ++i) {
            const auto& a = arms[static_cast<std::size_t>(i)];
            if (a.status == ArmStatus::Active && a.n < a.cap) {
                pool_ids.push_back(static_cast<std::uint8_t>(i));
                pool_probs.push_back(a.weight);
                pool_room.push_back(a.cap - a.n);
                wsum += a.weight;
            }
        }
        if (pool_ids.empty()) {
            run_final(emax);
            break;
        }
        for (double& p : pool_probs) p /= wsum;
        if (design.clip) {
            auto clipped = clip_probabilities({pool_probs}, design.clip->first, design.clip->second);
            pool_probs = std::move(clipped.probs);
        }

        const int bs = design.default_block_size(static_cast<int>(pool_ids.size()));
        const auto block = build_permuted_block(pool_probs, pool_ids, pool_room,
                                                std::min(bs, emax - total), rng);
        if (block.empty()) {
            run_final(emax);
            break;
        }
        for (std::uint8_t armid : block) {
            auto& a = arms[armid];
            const bool success = rng.bernoulli(scenario.theta[armid]);
            bool tox = false;
            if (design.toxicity_monitoring) tox = rng.bernoulli(scenario.phi[armid]);
            ++a.n;
            a.successes += success ? 1 : 0;
            a.toxicities += tox ? 1 : 0;
            ++total;
            if (trace) trace->patients.push_back({total, armid, success, tox});
        }

        if (next_ia < design.ia_schedule.size() && total >= design.ia_schedule[next_ia]) {
            int analysis_index = 0;
            while (next_ia < design.ia_schedule.size() && design.ia_schedule[next_ia] <= total) {
                analysis_index = static_cast<int>(next_ia) + 1;
                ++next_ia;
            }
            if (total < effective_max()) run_interim(analysis_index, effective_max());
        }
    }

    TrialResult result;
    result.arms.resize(static_cast<std::size_t>(n_arms));
    for (int i = 0; i < n_arms; ++i) {
        const auto& a = arms[static_cast<std::size_t>(i)];
        result.arms[static_cast<std::size_t>(i)] =
            ArmState{a.n, a.successes, a.toxicities, a.status, a.reject, a.stop_stage};
    }
    result.total_enrolled = total;
    result.stop_stage = trial_stop_stage;
    return result;
}

}  // namespace bop2
