#ifndef NONHOLO_FLOW_HPP
#define NONHOLO_FLOW_HPP

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nonholo/gvf.hpp"
#include "nonholo/ode.hpp"

namespace nonholo {

struct IntegratorConfig {
    enum class Method { Rk4Fixed, Rk45Adaptive };
    Method method = Method::Rk45Adaptive;
    double step = 1e-3;       // Rk4Fixed step
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double max_time = 500.0;
    int max_steps = 2000000;
    double max_step = 0.25;   // cap so per-step angle changes stay unwrappable
    int theta_cadence = 10;   // Theta every k-th accepted step (0 = never)
};

enum class Termination { Converged, TubeExit, Budget, Event, Singular };

std::string termination_name(Termination t);

struct Sample {
    double s = 0;
    Vec3 p{};
    double H = 0;
    double theta_hat = std::numeric_limits<double>::quiet_NaN(); // unwrapped; NaN off-cadence
    double phi_base = 0;       // unwrapped base angle atan2(g, f)
    double beta_residual = 0;  // |beta(X)| / (|V_beta| |X|)
};

struct Trajectory {
    std::vector<Sample> samples;
    Termination termination = Termination::Budget;
    std::string event_name; // for Termination::Event

    const Sample& back() const { return samples.back(); }
};

// Scalar event: fires when value(p) crosses zero in the requested direction
// (+1 rising, -1 falling, 0 both); localized to 1e-9 in time by bisection.
struct EventFn {
    std::string name;
    std::function<double(const Vec3&)> value;
    int direction = 0;
    bool terminal = true;
};

struct EventSpec {
    std::vector<EventFn> events;
};

using FieldFn = std::function<Vec3(const Vec3&)>;

// General-purpose integration of an autonomous field with event detection.
Trajectory integrate(const FieldFn& field, const Vec3& start, const IntegratorConfig& cfg,
                     const EventSpec& events);

// Guiding-field run with the H-based termination events and per-sample
// diagnostics (H, unwrapped base angle, beta residual, cadenced theta_hat).
Trajectory simulate_one(const Scene& scene, const GuidingField& gf, const Vec3& start,
                        const IntegratorConfig& cfg);

std::vector<Trajectory> simulate_gvf(const Scene& scene, const GuidingField& gf,
                                     const std::vector<Vec3>& starts,
                                     const IntegratorConfig& cfg);

struct WindingPeriod {
    double delta_theta_hat = 0;    // change of the projected angle over one base revolution
    int raw_base_direction = 0;    // sign of dphi(winding) for the field's own orientation
    double H_drift = 0;            // |H(end) - H(start)|; zero up to integration error
    Trajectory trajectory;
};

// One full base revolution of the winding orbit, traversed with the base
// angle advancing (the raw component's own direction is reported alongside).
WindingPeriod winding_flow_period(const Scene& scene, const GuidingField& gf, const Vec3& start,
                                  const IntegratorConfig& cfg);

} // namespace nonholo

#endif
