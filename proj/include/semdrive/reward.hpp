#pragma once

#include "semdrive/embedding.hpp"
#include "semdrive/world_model.hpp"

namespace semdrive {

struct RewardWeights {
    double rho1 = 1.0;    // safety-fusion scale
    double rho2 = 1.0;    // contrastive scale
    double lambda = 0.05; // foresight scale
    double alpha = 0.5;   // ideal-prompt cosine weight (alpha + beta = 1)
    double beta = 0.5;    // present-prompt cosine weight
};

struct AblationFlags {
    bool no_hvfr = false;
    bool no_aicr = false;
    bool no_pcfm = false;
};

// Terms are recorded pre-weighting; an ablated term is stored as exactly 0,
// so total == task + rho1*hvfr + rho2*aicr + lambda*pcfm always holds on the
// stored values.
struct RewardBreakdown {
    double task = 0.0;
    double hvfr = 0.0;
    double aicr = 0.0;
    double pcfm = 0.0;
    double total = 0.0;
};

// alpha*cos(v, u_ideal) - beta*cos(v, u_present), clipped to [-1,1]
// (the clip is inert while alpha + beta = 1; kept as a stability guard).
double aicr(const Embedding& v, const Embedding& u_ideal, const Embedding& u_present,
            const RewardWeights& w);

struct KinematicTargets {
    double v_target = 5.5;        // m/s
    double sigma_v = 2.0;         // m/s, speed falloff scale
    double d_max = 3.0;           // m
    double theta_max = M_PI / 4;  // rad
    double omega_max = 1.0;       // rad/s
};

struct KinematicFactors {
    double speed = 0.0;      // exp(-(v - v_target)^2 / (2 sigma_v^2))
    double center = 0.0;     // max(0, 1 - |dev| / d_max)
    double angle = 0.0;      // max(0, 1 - |theta_err| / theta_max)
    double stability = 0.0;  // max(0, 1 - |yaw_rate| / omega_max)
};

KinematicFactors kinematic_factors(double speed_mps, double lateral_deviation_m,
                                   double heading_error_rad, double yaw_rate,
                                   const KinematicTargets& targets);

// Product of the four factors: a multiplicative safety veto (any zero factor
// collapses the whole term). Throws if a factor leaves [0,1].
double hvfr(const KinematicFactors& f);

// Cosine between the model's (normalized) one-step prediction and u_ideal.
double pcfm(const Embedding& v, const double* action, const Embedding& u_ideal,
            const WorldModel& model);

RewardBreakdown combine(double task, double hvfr_term, double aicr_term, double pcfm_term,
                        const RewardWeights& w, const AblationFlags& ablation = {});

// progress term scaled to cents-per-meter plus a flat collision penalty
double task_reward(double progress_delta_m, bool collision);

}  // namespace semdrive
