// Calibration of (lambda, gamma) by grid search under a type I error
// constraint, and enumeration of interim-analysis placements.
//
// Every grid/enumeration point reuses the same master seed (common random
// numbers), which keeps the argmin stable under Monte Carlo noise. Points
// evaluate concurrently; the merge is deterministic because each point owns
// its slot in the result table.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bop2/simulation.hpp"

namespace bop2 {

struct CalibrationSpec {
    Scenario null_scenario;
    Scenario alt_scenario;
    double alpha_target = 0.1;
    double grid_step = 0.01;
    long n_sims_per_point = 10000;
    // Explicit grids override the uniform [0,1] grid (e.g. a single point).
    std::optional<std::vector<double>> lambda_grid;
    std::optional<std::vector<double>> gamma_grid;

    void validate() const {
        if (!(grid_step > 0.0 && grid_step <= 0.5)) {
            throw ConfigError("calibration: grid_step must lie in (0, 0.5]");
        }
        if (!(alpha_target > 0.0 && alpha_target < 1.0)) {
            throw ConfigError("calibration: alpha_target must lie in (0,1)");
        }
        if (n_sims_per_point < 1) throw ConfigError("calibration: n_sims_per_point must be >= 1");
        for (const auto& g : {lambda_grid, gamma_grid}) {
            if (!g) continue;
            if (g->empty()) throw ConfigError("calibration: explicit grid must be nonempty");
            for (double x : *g) {
                if (!(x >= 0.0 && x <= 1.0)) {
                    throw ConfigError("calibration: grid values must lie in [0,1]");
                }
            }
        }
    }
};

struct GridPoint {
    double lambda = 0.0;
    double gamma = 0.0;
    double null_reject = 0.0;  // type I error (two-arm) / FWER (multi-arm)
    double power = std::numeric_limits<double>::quiet_NaN();  // evaluated on feasible points
    double ess_null = 0.0;
    double ess_alt = std::numeric_limits<double>::quiet_NaN();
    bool feasible = false;
};

struct CalibrationResult {
    BoundaryParams chosen;
    double chosen_power = 0.0;
    double chosen_null_reject = 0.0;
    std::vector<GridPoint> surface;
};

inline std::vector<double> unit_grid(double step) {
    std::vector<double> v;
    for (int k = 0;; ++k) {
        const double x = k * step;
        if (x >= 1.0 - 1e-12) break;
        v.push_back(x);
    }
    v.push_back(1.0);
    return v;
}

struct OptimizerOptions {
    int workers = 1;
    std::optional<long> budget;  // cap on total replicates across all points
};

/// Evaluate every (lambda, gamma) grid point on the null scenario, and the
/// alternative on points meeting the error constraint; return the feasible
/// point maximizing power (least power for multi-arm). Ties prefer the lower
/// measured null rejection, then larger lambda, then larger gamma.
inline CalibrationResult grid_search_lambda_gamma(const TrialDesign& design_template,
                                                  const CalibrationSpec& spec,
                                                  std::uint64_t master_seed, PosteriorCache& cache,
                                                  const OptimizerOptions& options = {}) {
    spec.validate();
    const std::vector<double> lambdas =
        spec.lambda_grid ? *spec.lambda_grid : unit_grid(spec.grid_step);
    const std::vector<double> gammas =
        spec.gamma_grid ? *spec.gamma_grid : unit_grid(spec.grid_step);
    const long n_points = static_cast<long>(lambdas.size()) * static_cast<long>(gammas.size());
    if (options.budget && n_points * 2 * spec.n_sims_per_point > *options.budget) {
        throw BudgetError("calibration requires " +
                          std::to_string(n_points * 2 * spec.n_sims_per_point) +
                          " replicates, over the budget of " + std::to_string(*options.budget));
    }

    std::vector<GridPoint> surface(static_cast<std::size_t>(n_points));
    auto eval_point = [&](long idx) {
        const double lambda = lambdas[static_cast<std::size_t>(idx) / gammas.size()];
        const double gamma = gammas[static_cast<std::size_t>(idx) % gammas.size()];
        TrialDesign d = design_template;
        d.boundary = {lambda, gamma};
        GridPoint pt;
        pt.lambda = lambda;
        pt.gamma = gamma;
        const auto null_oc = estimate_oc(d, spec.null_scenario, spec.n_sims_per_point, master_seed,
                                         cache);
        pt.null_reject = null_oc.fwer;
        pt.ess_null = null_oc.ess_total;
        pt.feasible = pt.null_reject <= spec.alpha_target;
        if (pt.feasible) {
            const auto alt_oc = estimate_oc(d, spec.alt_scenario, spec.n_sims_per_point,
                                            master_seed, cache);
            pt.power = alt_oc.least_power;
            pt.ess_alt = alt_oc.ess_total;
        }
        surface[static_cast<std::size_t>(idx)] = pt;
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        for (long i = 0; i < n_points; ++i) eval_point(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (long i = w; i < n_points; i += workers) eval_point(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    const GridPoint* best = nullptr;
    for (const auto& pt : surface) {
        if (!pt.feasible) continue;
        if (!best || pt.power > best->power ||
            (pt.power == best->power &&
             (pt.null_reject < best->null_reject ||
              (pt.null_reject == best->null_reject &&
               (pt.lambda > best->lambda ||
                (pt.lambda == best->lambda && pt.gamma > best->gamma)))))) {
            best = &pt;
        }
    }
    if (!best) {
        throw ConfigError("calibration: no grid point satisfies the type I error constraint");
    }
    CalibrationResult result;
    result.chosen = {best->lambda, best->gamma};
    result.chosen_power = best->power;
    result.chosen_null_reject = best->null_reject;
    result.surface = std::move(surface);
    return result;
}

// ---------------------------------------------------------------------------
// Interim-analysis placement
// ---------------------------------------------------------------------------

enum class IAObjective { MinEss, MaxPropBest, MaxPower };

inline const char* objective_name(IAObjective o) {
    switch (o) {
        case IAObjective::MinEss: return "min_ess";
        case IAObjective::MaxPropBest: return "max_prop_best";
        case IAObjective::MaxPower: return "max_power";
    }
    return "?";
}

struct IASearchSpec {
    int num_ias = 1;
    IAObjective objective = IAObjective::MinEss;
    int step = 1;  // patient-count granularity of candidate placements
    double waiting_fraction = 0.3;

    void validate() const {
        if (num_ias < 0) throw ConfigError("ia_search: num_ias must be >= 0");
        if (step < 1) throw ConfigError("ia_search: step must be >= 1");
        if (!(waiting_fraction >= 0.0 && waiting_fraction < 1.0)) {
            throw ConfigError("ia_search: waiting_fraction must lie in [0,1)");
        }
    }
};

enum class IAStrategy { Optimal, Equal, EqualAfterWaiting };

inline const char* strategy_name(IAStrategy s) {
    switch (s) {
        case IAStrategy::Optimal: return "optimal";
        case IAStrategy::Equal: return "equal";
        case IAStrategy::EqualAfterWaiting: return "equal_after_waiting";
    }
    return "?";
}

/// Equally spaced looks, optionally measured after an initial waiting period
/// in which no interim analysis is placed.
inline std::vector<int> heuristic_schedule(IAStrategy strategy, int max_total, int num_ias,
                                           double waiting_fraction = 0.3) {
    if (num_ias < 1) throw ConfigError("heuristic_schedule: num_ias must be >= 1");
    const double start =
        strategy == IAStrategy::EqualAfterWaiting ? waiting_fraction * max_total : 0.0;
    std::vector<int> schedule;
    for (int k = 1; k <= num_ias; ++k) {
        const double at = start + k * (max_total - start) / (num_ias + 1);
        schedule.push_back(static_cast<int>(std::llround(at)));
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i] < 1 || schedule[i] >= max_total ||
            (i > 0 && schedule[i] <= schedule[i - 1])) {
            throw ConfigError("heuristic_schedule: schedule collapsed; too many analyses");
        }
    }
    return schedule;
}

struct EnumerationEntry {
    std::vector<int> schedule;
    double objective = 0.0;
    double power = 0.0;
    double ess = 0.0;
    double prop_best = 0.0;
    Interval ess_ci;
    Interval power_ci;
    Interval prop_ci;
};

struct EnumerationResult {
    EnumerationEntry best;
    std::vector<EnumerationEntry> table;
    long enumeration_size = 0;
};

namespace detail {

inline void enumerate_schedules(const std::vector<int>& candidates, int num_ias,
                                std::vector<std::vector<int>>& out) {
    std::vector<int> pick;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (static_cast<int>(pick.size()) == num_ias) {
            out.push_back(pick);
            return;
        }
        const int need = num_ias - static_cast<int>(pick.size());
        for (std::size_t i = start; i + static_cast<std::size_t>(need) <= candidates.size(); ++i) {
            pick.push_back(candidates[i]);
            self(self, i + 1);
            pick.pop_back();
        }
    };
    rec(rec, 0);
}

inline double objective_value(IAObjective obj, const OperatingCharacteristics& oc) {
    switch (obj) {
        case IAObjective::MinEss: return oc.ess_total;
        case IAObjective::MaxPropBest: return oc.prop_best;
        case IAObjective::MaxPower: return oc.least_power;
    }
    return 0.0;
}

inline bool objective_better(IAObjective obj, double a, double b) {
    return obj == IAObjective::MinEss ? a < b : a > b;
}

}  // namespace detail

/// Evaluate the objective at every admissible schedule of `num_ias` looks on
/// multiples of `step` below N. Ties break toward larger alternative-scenario
/// power, then the earlier first look.
inline EnumerationResult enumerate_ia_placements(const TrialDesign& design_template,
                                                 const Scenario& scenario, const IASearchSpec& spec,
                                                 long n_sims, std::uint64_t master_seed,
                                                 PosteriorCache& cache,
                                                 const OptimizerOptions& options = {}) {
    spec.validate();
    std::vector<int> candidates;
    for (int at = spec.step; at < design_template.max_total; at += spec.step) {
        candidates.push_back(at);
    }
    std::vector<std::vector<int>> schedules;
    if (spec.num_ias == 0) {
        schedules.push_back({});
    } else {
        detail::enumerate_schedules(candidates, spec.num_ias, schedules);
    }
    EnumerationResult result;
    result.enumeration_size = static_cast<long>(schedules.size());
    if (schedules.empty()) {
        throw ConfigError("ia_search: no admissible schedule (step too coarse?)");
    }
    if (options.budget && result.enumeration_size * n_sims > *options.budget) {
        throw BudgetError("ia enumeration requires " +
                          std::to_string(result.enumeration_size * n_sims) +
                          " replicates, over the budget of " + std::to_string(*options.budget));
    }

    result.table.resize(schedules.size());
    auto eval_point = [&](std::size_t idx) {
        TrialDesign d = design_template;
        d.ia_schedule = schedules[idx];
        const auto oc = estimate_oc(d, scenario, n_sims, master_seed, cache);
        EnumerationEntry e;
        e.schedule = schedules[idx];
        e.objective = detail::objective_value(spec.objective, oc);
        e.power = oc.least_power;
        e.ess = oc.ess_total;
        e.prop_best = oc.prop_best;
        e.ess_ci = oc.ess_ci;
        e.power_ci = oc.power_ci;
        e.prop_ci = oc.prop_best_ci;
        result.table[idx] = std::move(e);
    };
    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < schedules.size(); ++i) eval_point(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < schedules.size();
                     i += static_cast<std::size_t>(workers)) {
                    eval_point(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.table.size(); ++i) {
        const auto& a = result.table[i];
        const auto& b = result.table[best];
        if (detail::objective_better(spec.objective, a.objective, b.objective)) {
            best = i;
        } else if (a.objective == b.objective) {
            if (a.power > b.power ||
                (a.power == b.power && !a.schedule.empty() && !b.schedule.empty() &&
                 a.schedule.front() < b.schedule.front())) {
                best = i;
            }
        }
    }
    result.best = result.table[best];
    return result;
}

struct StrategyRow {
    int num_ias = 0;
    IAStrategy strategy = IAStrategy::Optimal;
    std::vector<int> schedule;
    double objective = 0.0;
    double power = 0.0;
    double ess = 0.0;
    double prop_best = 0.0;
};

/// The Table 1 / Table 5 layout: objective values for the optimal, equally
/// spaced, and equally-spaced-after-waiting placements of 1..max_num_ias looks.
inline std::vector<StrategyRow> compare_ia_strategies(const TrialDesign& design_template,
                                                      const Scenario& scenario,
                                                      const IASearchSpec& spec, long n_sims,
                                                      std::uint64_t master_seed,
                                                      PosteriorCache& cache,
                                                      const OptimizerOptions& options = {}) {
    std::vector<StrategyRow> rows;
    const int max_ias = std::max(1, spec.num_ias);
    for (int m = 1; m <= max_ias; ++m) {
        IASearchSpec sub = spec;
        sub.num_ias = m;
        const auto opt =
            enumerate_ia_placements(design_template, scenario, sub, n_sims, master_seed, cache,
                                    options);
        rows.push_back({m, IAStrategy::Optimal, opt.best.schedule, opt.best.objective,
                        opt.best.power, opt.best.ess, opt.best.prop_best});
        for (IAStrategy strat : {IAStrategy::Equal, IAStrategy::EqualAfterWaiting}) {
            TrialDesign d = design_template;
            d.ia_schedule =
                heuristic_schedule(strat, design_template.max_total, m, spec.waiting_fraction);
            const auto oc = estimate_oc(d, scenario, n_sims, master_seed, cache);
            rows.push_back({m, strat, d.ia_schedule, detail::objective_value(spec.objective, oc),
                            oc.least_power, oc.ess_total, oc.prop_best});
        }
    }
    return rows;
}

}  // namespace bop2
