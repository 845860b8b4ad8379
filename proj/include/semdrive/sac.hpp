#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semdrive/embedding.hpp"
#include "semdrive/nn.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/sim_world.hpp"

namespace semdrive {

// ---------------------------------------------------------------------------
// Observations, transitions, replay
// ---------------------------------------------------------------------------

struct ObservationVec {
    BevGrid bev;
    std::array<double, 3> ego{};     // speed, steer, yaw rate, each normalized
    std::vector<double> waypoints;   // 2K values in [-1,1]
};

struct Transition {
    ObservationVec obs;
    std::array<double, 2> action{};
    double reward = 0.0;
    ObservationVec next_obs;
    bool done = false;
    RewardBreakdown breakdown;
    Embedding v;       // embedding of obs (world-model training data)
    Embedding v_next;  // embedding of next_obs
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);  // FIFO overwrite at capacity
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    // Uniform with replacement, reproducible per seed. Returns an empty batch
    // (not-ready) while size < min_fill. Pointers are valid until the next push.
    std::vector<const Transition*> sample(std::size_t n, std::size_t min_fill,
                                          std::uint64_t seed) const;

private:
    std::vector<Transition> data_;  // grows to capacity, then ring-overwritten
    std::size_t capacity_ = 0;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

struct ConvSpec {
    int out_ch = 0;
    int kernel = 0;
    int stride = 0;
};

struct AgentConfig {
    int grid_size = 64;
    std::vector<ConvSpec> conv = {{16, 8, 4}, {32, 4, 2}, {32, 3, 1}};
    int d_v = 256;
    int d_e = 32;
    int d_w = 64;
    int wp_dim = 20;  // 2K
    int head_hidden = 256;
    double lr = 3e-4;
    double gamma = 0.99;
    double tau = 5e-3;
    bool twin_critics = true;   // min over two target heads; off = single critic
    bool auto_entropy = true;   // off freezes alpha at init_alpha
    double init_alpha = 0.2;
    double target_entropy = -2.0;
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    std::uint64_t seed = 0;
};

// Three-branch encoder: conv stack (tanh) + linear head over the one-hot BEV,
// and one small MLP each for the ego triple and the waypoint vector; output
// is the concatenation [f_bev | f_ego | f_wp].
class FeatureExtractor {
public:
    FeatureExtractor(const AgentConfig& cfg, Rng& rng);

    int feature_dim() const { return cfg_.d_v + cfg_.d_e + cfg_.d_w; }
    int flat_conv_dim() const { return flat_dim_; }

    struct Ws {
        std::vector<std::vector<double>> conv_acts;  // [0] = one-hot input
        std::vector<std::vector<double>> conv_dacts;
        std::vector<int> spatial;                    // size after each stage
        Mlp::Ws bev_fc, ego, wp;
        std::vector<double> features;
    };

    void forward(const ObservationVec& obs, Ws& ws) const;
    void backward(Ws& ws, const double* dfeatures);
    void visit(std::vector<ParamRef>& refs);

private:
    AgentConfig cfg_;
    std::vector<Conv2d> convs_;
    Mlp bev_fc_;   // flat -> d_v (tanh)
    Mlp ego_net_;  // 3 -> d_e -> d_e (tanh)
    Mlp wp_net_;   // 2K -> d_w -> d_w (tanh)
    int flat_dim_ = 0;
};

// One tanh-Gaussian draw after squashing, with the change-of-variables
// log-density correction.
struct ActionSample {
    std::array<double, 2> mu{};
    std::array<double, 2> log_std{};
    std::array<double, 2> eps{};
    std::array<double, 2> pre_tanh{};
    std::array<double, 2> action{};
    std::array<bool, 2> log_std_in_range{};  // clamp pass-through indicator
    double log_prob = 0.0;
};

// y = r when done, else r + gamma * (target_q_min - alpha * next_log_prob)
double bellman_target(double r, double target_q_min, double next_log_prob, double gamma,
                      double alpha_ent, bool done);

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

struct ActorStats {
    double loss = 0.0;
    double entropy = 0.0;  // mean of -log_prob over the batch
    double alpha = 0.0;
};

class SacAgent {
public:
    explicit SacAgent(const AgentConfig& cfg);
    // copies re-point every optimizer at their own parameter storage
    SacAgent(const SacAgent& other);
    SacAgent& operator=(const SacAgent& other);

    const AgentConfig& config() const { return cfg_; }
    double alpha_ent() const { return alpha_; }

    std::vector<double> extract_features(const ObservationVec& obs) const;

    std::array<double, 2> act(const ObservationVec& obs, std::uint64_t seed,
                              double* log_prob = nullptr) const;
    std::array<double, 2> act_greedy(const ObservationVec& obs) const;  // tanh(mu)
    ActionSample sample_from_features(const std::vector<double>& features, Rng& rng) const;

    // Frozen regression targets for one batch (seed drives next-action draws).
    std::vector<double> bellman_targets(const std::vector<const Transition*>& batch,
                                        std::uint64_t seed) const;
    // Mean over both critics of mean_i 0.5*(Q(o_i,a_i) - y_i)^2; no update.
    double critic_loss_given_targets(const std::vector<const Transition*>& batch,
                                     const std::vector<double>& y) const;
    // Full critic step (targets, backward through heads + extractor, Adam).
    double critic_update(const std::vector<const Transition*>& batch, std::uint64_t seed);

    // Actor loss mean(alpha*logp - Q) with explicit noise draws; no update.
    double actor_loss_given_eps(const std::vector<const Transition*>& batch,
                                const std::vector<std::array<double, 2>>& eps) const;
    // Reparameterized actor step + temperature step on features from the batch.
    ActorStats actor_update(const std::vector<const Transition*>& batch, std::uint64_t seed);

    // Same actor/temperature step against a caller-supplied critic: q_fn must
    // return Q and fill dq_da. Used with synthetic critics in tests.
    using QFun = std::function<double(const std::vector<double>& features,
                                      const std::array<double, 2>& action,
                                      std::array<double, 2>& dq_da)>;
    ActorStats actor_update_with_q(const std::vector<std::vector<double>>& features,
                                   std::uint64_t seed, const QFun& q_fn);

    void polyak_step();  // tau from config
    void polyak_step(double tau);

    // parameter access (finite differences, checkpoints, tests)
    std::vector<ParamRef> critic_path_params();  // extractor + online critic heads
    std::vector<ParamRef> actor_params();
    std::vector<ParamRef> online_critic_params(int i);
    std::vector<ParamRef> target_critic_params(int i);
    FeatureExtractor& extractor() { return extractor_; }

    std::vector<std::pair<std::string, std::vector<double>>> sections();
    void load_sections(const std::map<std::string, std::vector<double>>& sections);

private:
    double q_min(const std::vector<double>& features, const std::array<double, 2>& action,
                 Mlp::Ws& ws1, Mlp::Ws& ws2, int* argmin) const;

    AgentConfig cfg_;
    FeatureExtractor extractor_;
    Mlp q1_, q2_;  // online critic heads [features | action] -> scalar
    Mlp t1_, t2_;  // Polyak target heads
    Mlp actor_;    // features -> (mu, log_std)
    double alpha_;
    double alpha_grad_ = 0.0;
    Adam critic_adam_;
    Adam actor_adam_;
    Adam alpha_adam_;
};

}  // namespace semdrive
