#ifndef NONHOLO_VERIFY_HPP
#define NONHOLO_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nonholo/flow.hpp"

namespace nonholo {

// One executable claim.  `anchor` is a stable slug naming the verified
// property; `applicable` is false when a gating precondition failed upstream.
struct CheckResult {
    std::string check;
    std::string anchor;
    bool pass = false;
    bool applicable = true;
    nlohmann::json measured = nlohmann::json::object();
    nlohmann::json tolerance = nlohmann::json::object();
    std::string witness;
};

struct VerificationReport {
    std::vector<CheckResult> checks;
    nlohmann::json meta = nlohmann::json::object();

    bool all_pass() const;
    nlohmann::json to_json() const;
    static VerificationReport from_json(const nlohmann::json& j);
};

struct VerifyConfig {
    int duality_trials = 1000;
    int tangency_samples = 10000;
    int convergence_starts = 5;
    int helix_budget = 200000;
    int obstruction_disks = 8;
    int obstruction_grid = 200;
    std::uint64_t rng_seed = 20240801;
};

// H strictly decreasing (1e-12 slack) and final H below eps_conv.
CheckResult verify_convergence(const Trajectory& traj, double eps_conv);

// (i) theta_hat non-decreasing after the first 5% of samples,
// (ii) total advance >= 4*pi, (iii) positive LS slope of theta against
// ln(H0/H) with R^2 > 0.5.  Throws InsufficientSamples below 8 theta samples.
CheckResult verify_circling(const Trajectory& traj, const PathPolyline& path);

// Winding-orbit holonomy at three start radii: the projected angle must
// advance on the side the orientation scalar rho prescribes, with magnitude
// increasing in H.
CheckResult verify_helix(const Scene& scene, const GuidingField& gf,
                         const std::vector<double>& start_H);

// On transverse disks (fixed fiber angle): if dH(X) is sign-definite, the
// fiber-angle derivative along X must attain both signs (or a near-zero).
CheckResult verify_obstruction(const Scene& scene, const GuidingField& gf, int disks, int grid);

// Random-instance duality, tangency and factorization identities.
CheckResult verify_duality(std::uint64_t seed, int trials);

// Constraint tangency |beta(X)| at random tube points, normalized.
CheckResult verify_tangency(const Scene& scene, const GuidingField& gf, int samples,
                            std::uint64_t seed);

// Theta idempotence, psi-roundtrip and first-return sanity.
CheckResult verify_projection(const Scene& scene);

VerificationReport run_suite(const Scene& scene, const GuidingField& gf,
                             const VerifyConfig& cfg);

// sign(rho) for the scene: the orientation scalar of the winding analysis,
// equal to sign(lambda_beta) * orientation_sign.
int rho_sign(const Scene& scene);

// Least-squares fit y = a x + b; returns (a, R^2).
std::pair<double, double> fit_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace nonholo

#endif
