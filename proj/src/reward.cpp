#include "semdrive/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semdrive {

double aicr(const Embedding& v, const Embedding& u_ideal, const Embedding& u_present,
            const RewardWeights& w) {
    const double raw = w.alpha * cosine(v, u_ideal) - w.beta * cosine(v, u_present);
    return std::clamp(raw, -1.0, 1.0);
}

KinematicFactors kinematic_factors(double speed_mps, double lateral_deviation_m,
                                   double heading_error_rad, double yaw_rate,
                                   const KinematicTargets& targets) {
    KinematicFactors f;
    const double dv = speed_mps - targets.v_target;
    f.speed = std::exp(-(dv * dv) / (2.0 * targets.sigma_v * targets.sigma_v));
    f.center = std::max(0.0, 1.0 - std::abs(lateral_deviation_m) / targets.d_max);
    f.angle = std::max(0.0, 1.0 - std::abs(heading_error_rad) / targets.theta_max);
    f.stability = std::max(0.0, 1.0 - std::abs(yaw_rate) / targets.omega_max);
    return f;
}

double hvfr(const KinematicFactors& f) {
    for (double x : {f.speed, f.center, f.angle, f.stability})
        if (x < 0.0 || x > 1.0) throw std::invalid_argument("hvfr: factor outside [0,1]");
    return f.speed * f.center * f.angle * f.stability;
}

double pcfm(const Embedding& v, const double* action, const Embedding& u_ideal,
            const WorldModel& model) {
    return cosine(model.predict(v, action), u_ideal);
}

RewardBreakdown combine(double task, double hvfr_term, double aicr_term, double pcfm_term,
                        const RewardWeights& w, const AblationFlags& ablation) {
    RewardBreakdown b;
    b.task = task;
    b.hvfr = ablation.no_hvfr ? 0.0 : hvfr_term;
    b.aicr = ablation.no_aicr ? 0.0 : aicr_term;
    b.pcfm = ablation.no_pcfm ? 0.0 : pcfm_term;
    b.total = b.task + w.rho1 * b.hvfr + w.rho2 * b.aicr + w.lambda * b.pcfm;
    return b;
}

double task_reward(double progress_delta_m, bool collision) {
    return 0.01 * progress_delta_m - (collision ? 10.0 : 0.0);
}

}  // namespace semdrive
