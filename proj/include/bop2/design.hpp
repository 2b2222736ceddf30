// Trial design and scenario descriptions shared by the engine, the
// optimizer, and the configuration layer.
#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bop2/boundaries.hpp"

namespace bop2 {

/// Configuration problems carry exit-code semantics for the CLI (exit 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Scheme { Equal, Brar2, Trippa, Maximum };
enum class Reallocation { Shrink, Redistribute };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Equal: return "equal";
        case Scheme::Brar2: return "brar2";
        case Scheme::Trippa: return "trippa";
        case Scheme::Maximum: return "maximum";
    }
    return "?";
}

struct TrialDesign {
    std::string id = "design";
    int n_experimental = 1;           // K
    bool controlled = true;           // concurrent control arm at index 0
    int max_total = 0;                // N, total across all arms
    std::optional<int> per_arm_cap;   // absent = unlimited
    std::vector<int> ia_schedule;     // cumulative total-enrollment counts, < N
    BoundaryParams boundary;
    bool efficacy_stopping = true;    // default on for two-arm, off for multi-arm
    bool toxicity_monitoring = false;
    std::optional<double> theta_ref;  // efficacy reference for uncontrolled designs / Trippa
    std::optional<double> phi_ref;    // toxicity reference for uncontrolled designs
    Scheme scheme = Scheme::Equal;
    Reallocation reallocation = Reallocation::Redistribute;
    int burn_in = 0;                  // adaptive updates activate at IAs with n >= burn_in
    std::optional<int> block_size;    // absent: 4 two-arm, 2 x active arms multi-arm
    std::optional<std::pair<double, double>> clip;  // allocation clipping, default off

    int n_arms() const { return n_experimental + (controlled ? 1 : 0); }
    bool is_experimental(int arm) const { return !controlled || arm > 0; }
    int first_experimental() const { return controlled ? 1 : 0; }
    bool multi_arm() const { return n_experimental > 1; }

    int default_block_size(int active_arms) const {
        if (block_size) return *block_size;
        return multi_arm() ? 2 * active_arms : 4;
    }

    void validate() const {
        if (n_experimental < 1) throw ConfigError("design: need at least one experimental arm");
        if (n_arms() < 2 && !(n_experimental == 1 && !controlled)) {
            throw ConfigError("design: arm layout not supported");
        }
        if (n_arms() > 4) {
            throw ConfigError("design: more than 4 arms is not supported (exact posterior "
                              "computations cover up to 4)");
        }
        if (max_total < n_arms()) throw ConfigError("design: max_total too small");
        if (per_arm_cap && *per_arm_cap < 1) throw ConfigError("design: per_arm_cap must be >= 1");
        int prev = 0;
        for (int ia : ia_schedule) {
            if (ia <= prev) throw ConfigError("design: ia_schedule must be strictly increasing");
            if (ia >= max_total) throw ConfigError("design: interim analyses must fall before N");
            prev = ia;
        }
        check_boundary_params(boundary);
        if (!controlled && !theta_ref) {
            throw ConfigError("design: uncontrolled designs require theta_ref");
        }
        if (scheme == Scheme::Trippa && !theta_ref) {
            throw ConfigError("design: the trippa scheme requires theta_ref");
        }
        if (theta_ref && !(*theta_ref >= 0.0 && *theta_ref <= 1.0)) {
            throw ConfigError("design: theta_ref must lie in [0,1]");
        }
        if (!controlled && toxicity_monitoring && !phi_ref) {
            throw ConfigError("design: uncontrolled toxicity monitoring requires phi_ref");
        }
        if (phi_ref && !(*phi_ref >= 0.0 && *phi_ref <= 1.0)) {
            throw ConfigError("design: phi_ref must lie in [0,1]");
        }
        if (scheme == Scheme::Brar2 && multi_arm()) {
            throw ConfigError("design: brar2 applies to two-arm designs only");
        }
        if (scheme == Scheme::Brar2 && !controlled) {
            throw ConfigError("design: brar2 requires a control arm");
        }
        if (scheme == Scheme::Trippa && !controlled) {
            // Without a control arm the scheme degenerates to the treatment
            // weights alone; allowed, matching the uncontrolled scenarios.
        }
        if (reallocation == Reallocation::Shrink && !per_arm_cap) {
            throw ConfigError("design: shrink reallocation requires a finite per_arm_cap");
        }
        if (burn_in < 0) throw ConfigError("design: burn_in must be nonnegative");
        if (!ia_schedule.empty() && burn_in > ia_schedule.front()) {
            throw ConfigError("design: burn_in must not exceed the first interim analysis");
        }
        if (block_size && *block_size < 1) throw ConfigError("design: block_size must be >= 1");
        if (clip && !(clip->first >= 0.0 && clip->first < clip->second && clip->second <= 1.0)) {
            throw ConfigError("design: clip bounds need 0 <= lo < hi <= 1");
        }
        if (efficacy_stopping && boundary.lambda >= 1.0 && !ia_schedule.empty()) {
            throw ConfigError("design: efficacy stopping is degenerate at lambda = 1");
        }
    }
};

struct Scenario {
    std::string name = "scenario";
    std::vector<double> theta;  // true success rates; control first when controlled
    std::vector<double> phi;    // true toxicity rates; empty when not modeled

    void validate(const TrialDesign& design) const {
        if (static_cast<int>(theta.size()) != design.n_arms()) {
            throw ConfigError("scenario '" + name + "': theta length must equal the arm count");
        }
        for (double t : theta) {
            if (!(t >= 0.0 && t <= 1.0)) {
                throw ConfigError("scenario '" + name + "': success rates must lie in [0,1]");
            }
        }
        if (design.toxicity_monitoring) {
            if (static_cast<int>(phi.size()) != design.n_arms()) {
                throw ConfigError("scenario '" + name +
                                  "': toxicity monitoring requires phi per arm");
            }
            for (double p : phi) {
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw ConfigError("scenario '" + name +
                                      "': toxicity rates must lie in [0,1]");
                }
            }
        } else if (!phi.empty() && static_cast<int>(phi.size()) != design.n_arms()) {
            throw ConfigError("scenario '" + name + "': phi length must equal the arm count");
        }
    }

    /// Index of the truly best experimental arm (ties resolve to the lowest
    /// index); used for least power / proportion-to-best aggregates.
    int best_experimental_arm(const TrialDesign& design) const {
        int best = design.first_experimental();
        for (int i = best + 1; i < design.n_arms(); ++i) {
            if (theta[static_cast<std::size_t>(i)] > theta[static_cast<std::size_t>(best)]) {
                best = i;
            }
        }
        return best;
    }
};

}  // namespace bop2
