#include "semdrive/sac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semdrive {

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::size_t min_fill,
                                                    std::uint64_t seed) const {
    std::vector<const Transition*> batch;
    if (size() < std::max<std::size_t>(min_fill, 1)) return batch;  // not ready
    batch.reserve(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        batch.push_back(&data_[rng.uniform_index(size())]);
    return batch;
}

// ---------------------------------------------------------------------------
// Feature extractor
// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(const AgentConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.conv.empty()) throw std::invalid_argument("FeatureExtractor: empty conv stack");
    convs_.resize(cfg.conv.size());
    int ch = 4;  // one-hot class channels
    int size = cfg.grid_size;
    for (std::size_t i = 0; i < cfg.conv.size(); ++i) {
        convs_[i].init(ch, cfg.conv[i].out_ch, cfg.conv[i].kernel, cfg.conv[i].stride, rng);
        size = Conv2d::out_size(size, cfg.conv[i].kernel, cfg.conv[i].stride);
        ch = cfg.conv[i].out_ch;
    }
    flat_dim_ = ch * size * size;
    bev_fc_.tanh_output = true;
    bev_fc_.init({flat_dim_, cfg.d_v}, rng);
    ego_net_.tanh_output = true;
    ego_net_.init({3, cfg.d_e, cfg.d_e}, rng);
    wp_net_.tanh_output = true;
    wp_net_.init({cfg.wp_dim, cfg.d_w, cfg.d_w}, rng);
}

void FeatureExtractor::forward(const ObservationVec& obs, Ws& ws) const {
    if (obs.bev.size != cfg_.grid_size)
        throw std::invalid_argument("FeatureExtractor: bev size mismatch");
    if (static_cast<int>(obs.waypoints.size()) != cfg_.wp_dim)
        throw std::invalid_argument("FeatureExtractor: waypoint dim mismatch");

    const int g = cfg_.grid_size;
    ws.conv_acts.resize(convs_.size() + 1);
    ws.conv_dacts.resize(convs_.size() + 1);
    ws.spatial.assign(convs_.size() + 1, 0);
    ws.spatial[0] = g;
    auto& onehot = ws.conv_acts[0];
    onehot.assign(static_cast<std::size_t>(4) * g * g, 0.0);
    for (std::size_t idx = 0; idx < obs.bev.cells.size(); ++idx)
        onehot[static_cast<std::size_t>(obs.bev.cells[idx]) * g * g + idx] = 1.0;

    for (std::size_t i = 0; i < convs_.size(); ++i) {
        const int in_size = ws.spatial[i];
        const int out_size = convs_[i].out_size(in_size);
        ws.spatial[i + 1] = out_size;
        ws.conv_acts[i + 1].resize(static_cast<std::size_t>(convs_[i].out_ch) * out_size * out_size);
        convs_[i].forward(ws.conv_acts[i].data(), in_size, ws.conv_acts[i + 1].data());
        for (double& v : ws.conv_acts[i + 1]) v = std::tanh(v);
    }

    const double* f_bev = bev_fc_.forward(ws.conv_acts.back().data(), ws.bev_fc);
    const double* f_ego = ego_net_.forward(obs.ego.data(), ws.ego);
    const double* f_wp = wp_net_.forward(obs.waypoints.data(), ws.wp);

    ws.features.resize(feature_dim());
    std::copy(f_bev, f_bev + cfg_.d_v, ws.features.begin());
    std::copy(f_ego, f_ego + cfg_.d_e, ws.features.begin() + cfg_.d_v);
    std::copy(f_wp, f_wp + cfg_.d_w, ws.features.begin() + cfg_.d_v + cfg_.d_e);
}

void FeatureExtractor::backward(Ws& ws, const double* dfeatures) {
    std::vector<double> dflat(flat_dim_);
    bev_fc_.backward(ws.bev_fc, dfeatures, dflat.data());
    ego_net_.backward(ws.ego, dfeatures + cfg_.d_v, nullptr);
    wp_net_.backward(ws.wp, dfeatures + cfg_.d_v + cfg_.d_e, nullptr);

    ws.conv_dacts[convs_.size()] = dflat;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        // gradient arrives w.r.t. the post-tanh activation
        auto& d = ws.conv_dacts[i + 1];
        const auto& a = ws.conv_acts[i + 1];
        for (std::size_t j = 0; j < d.size(); ++j) d[j] *= 1.0 - a[j] * a[j];
        double* dx = nullptr;
        if (i > 0) {
            ws.conv_dacts[i].assign(ws.conv_acts[i].size(), 0.0);
            dx = ws.conv_dacts[i].data();
        }
        convs_[i].backward(ws.conv_acts[i].data(), ws.spatial[i], d.data(), dx);
    }
}

void FeatureExtractor::visit(std::vector<ParamRef>& refs) {
    for (auto& c : convs_) c.visit(refs);
    bev_fc_.visit(refs);
    ego_net_.visit(refs);
    wp_net_.visit(refs);
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

double bellman_target(double r, double target_q_min, double next_log_prob, double gamma,
                      double alpha_ent, bool done) {
    if (done) return r;
    return r + gamma * (target_q_min - alpha_ent * next_log_prob);
}

namespace {

constexpr double kTanhEps = 1e-6;

ActionSample make_sample(const double* head_out, const std::array<double, 2>& eps,
                         const AgentConfig& cfg) {
    ActionSample s;
    s.eps = eps;
    for (int j = 0; j < 2; ++j) {
        s.mu[j] = head_out[j];
        const double raw = head_out[2 + j];
        s.log_std_in_range[j] = raw >= cfg.log_std_min && raw <= cfg.log_std_max;
        s.log_std[j] = std::clamp(raw, cfg.log_std_min, cfg.log_std_max);
        const double sigma = std::exp(s.log_std[j]);
        s.pre_tanh[j] = s.mu[j] + sigma * eps[j];
        s.action[j] = std::tanh(s.pre_tanh[j]);
        s.log_prob += -0.5 * std::log(2.0 * M_PI) - s.log_std[j] - 0.5 * eps[j] * eps[j] -
                      std::log(1.0 - s.action[j] * s.action[j] + kTanhEps);
    }
    return s;
}

std::array<double, 2> gaussian_pair(Rng& rng) {
    const double a = rng.gaussian();
    const double b = rng.gaussian();
    return {a, b};
}

}  // namespace

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

namespace {
FeatureExtractor build_extractor(const AgentConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "extractor"));
    return FeatureExtractor(cfg, rng);
}
}  // namespace

SacAgent::SacAgent(const AgentConfig& cfg) : cfg_(cfg), extractor_(build_extractor(cfg)) {
    Rng rng(derive_seed(cfg.seed, "heads"));
    const int fd = extractor_.feature_dim();
    q1_.init({fd + 2, cfg.head_hidden, cfg.head_hidden, 1}, rng);
    q2_.init({fd + 2, cfg.head_hidden, cfg.head_hidden, 1}, rng);
    actor_.init({fd, cfg.head_hidden, cfg.head_hidden, 4}, rng);
    t1_ = q1_;
    t2_ = q2_;
    alpha_ = cfg.init_alpha;
    critic_adam_ = Adam(critic_path_params(), cfg.lr);
    actor_adam_ = Adam(actor_params(), cfg.lr);
    alpha_adam_ = Adam({{&alpha_, &alpha_grad_, 1}}, cfg.lr);
}

SacAgent::SacAgent(const SacAgent& other)
    : cfg_(other.cfg_),
      extractor_(other.extractor_),
      q1_(other.q1_),
      q2_(other.q2_),
      t1_(other.t1_),
      t2_(other.t2_),
      actor_(other.actor_),
      alpha_(other.alpha_),
      alpha_grad_(other.alpha_grad_),
      critic_adam_(other.critic_adam_),
      actor_adam_(other.actor_adam_),
      alpha_adam_(other.alpha_adam_) {
    critic_adam_.rebind(critic_path_params());
    actor_adam_.rebind(actor_params());
    alpha_adam_.rebind({{&alpha_, &alpha_grad_, 1}});
}

SacAgent& SacAgent::operator=(const SacAgent& other) {
    if (this == &other) return *this;
    cfg_ = other.cfg_;
    extractor_ = other.extractor_;
    q1_ = other.q1_;
    q2_ = other.q2_;
    t1_ = other.t1_;
    t2_ = other.t2_;
    actor_ = other.actor_;
    alpha_ = other.alpha_;
    alpha_grad_ = other.alpha_grad_;
    critic_adam_ = other.critic_adam_;
    actor_adam_ = other.actor_adam_;
    alpha_adam_ = other.alpha_adam_;
    critic_adam_.rebind(critic_path_params());
    actor_adam_.rebind(actor_params());
    alpha_adam_.rebind({{&alpha_, &alpha_grad_, 1}});
    return *this;
}

std::vector<ParamRef> SacAgent::critic_path_params() {
    std::vector<ParamRef> refs;
    extractor_.visit(refs);
    q1_.visit(refs);
    if (cfg_.twin_critics) q2_.visit(refs);
    return refs;
}

std::vector<ParamRef> SacAgent::actor_params() {
    std::vector<ParamRef> refs;
    actor_.visit(refs);
    return refs;
}

std::vector<ParamRef> SacAgent::online_critic_params(int i) {
    std::vector<ParamRef> refs;
    (i == 1 ? q1_ : q2_).visit(refs);
    return refs;
}

std::vector<ParamRef> SacAgent::target_critic_params(int i) {
    std::vector<ParamRef> refs;
    (i == 1 ? t1_ : t2_).visit(refs);
    return refs;
}

std::vector<double> SacAgent::extract_features(const ObservationVec& obs) const {
    FeatureExtractor::Ws ws;
    extractor_.forward(obs, ws);
    return ws.features;
}

ActionSample SacAgent::sample_from_features(const std::vector<double>& features, Rng& rng) const {
    Mlp::Ws ws;
    const double* head = actor_.forward(features.data(), ws);
    return make_sample(head, gaussian_pair(rng), cfg_);
}

std::array<double, 2> SacAgent::act(const ObservationVec& obs, std::uint64_t seed,
                                    double* log_prob) const {
    Rng rng(seed);
    const ActionSample s = sample_from_features(extract_features(obs), rng);
    if (log_prob) *log_prob = s.log_prob;
    return s.action;
}

std::array<double, 2> SacAgent::act_greedy(const ObservationVec& obs) const {
    Mlp::Ws ws;
    const std::vector<double> f = extract_features(obs);
    const double* head = actor_.forward(f.data(), ws);
    return {std::tanh(head[0]), std::tanh(head[1])};
}

std::vector<double> SacAgent::bellman_targets(const std::vector<const Transition*>& batch,
                                              std::uint64_t seed) const {
    if (batch.empty()) throw std::invalid_argument("bellman_targets: empty batch");
    std::vector<double> y(batch.size());
    FeatureExtractor::Ws ws;
    Mlp::Ws aws, tws1, tws2;
    std::vector<double> qin(extractor_.feature_dim() + 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        extractor_.forward(batch[i]->next_obs, ws);
        const double* head = actor_.forward(ws.features.data(), aws);
        Rng rng(derive_seed(seed, "next-act", i));
        const ActionSample s = make_sample(head, gaussian_pair(rng), cfg_);
        std::copy(ws.features.begin(), ws.features.end(), qin.begin());
        qin[qin.size() - 2] = s.action[0];
        qin[qin.size() - 1] = s.action[1];
        double qmin = t1_.forward(qin.data(), tws1)[0];
        if (cfg_.twin_critics) qmin = std::min(qmin, t2_.forward(qin.data(), tws2)[0]);
        y[i] = bellman_target(batch[i]->reward, qmin, s.log_prob, cfg_.gamma, alpha_,
                              batch[i]->done);
    }
    return y;
}

double SacAgent::critic_loss_given_targets(const std::vector<const Transition*>& batch,
                                           const std::vector<double>& y) const {
    if (batch.empty() || batch.size() != y.size())
        throw std::invalid_argument("critic_loss_given_targets: bad batch");
    FeatureExtractor::Ws ws;
    Mlp::Ws w1, w2;
    std::vector<double> qin(extractor_.feature_dim() + 2);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        extractor_.forward(batch[i]->obs, ws);
        std::copy(ws.features.begin(), ws.features.end(), qin.begin());
        qin[qin.size() - 2] = batch[i]->action[0];
        qin[qin.size() - 1] = batch[i]->action[1];
        const double d1 = q1_.forward(qin.data(), w1)[0] - y[i];
        l1 += 0.5 * d1 * d1;
        if (cfg_.twin_critics) {
            const double d2 = q2_.forward(qin.data(), w2)[0] - y[i];
            l2 += 0.5 * d2 * d2;
        }
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    return cfg_.twin_critics ? 0.5 * (l1 + l2) * inv_b : l1 * inv_b;
}

double SacAgent::critic_update(const std::vector<const Transition*>& batch, std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
    const std::vector<double> y = bellman_targets(batch, seed);

    zero_grads(critic_path_params());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    // minimize the same scalar critic_loss_given_targets reports
    const double head_scale = cfg_.twin_critics ? 0.5 * inv_b : inv_b;
    const int fd = extractor_.feature_dim();
    FeatureExtractor::Ws ws;
    Mlp::Ws w1, w2;
    std::vector<double> qin(fd + 2), dqin1(fd + 2), dqin2(fd + 2), dfeat(fd);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        extractor_.forward(batch[i]->obs, ws);
        std::copy(ws.features.begin(), ws.features.end(), qin.begin());
        qin[fd] = batch[i]->action[0];
        qin[fd + 1] = batch[i]->action[1];

        const double d1 = q1_.forward(qin.data(), w1)[0] - y[i];
        l1 += 0.5 * d1 * d1;
        const double dout1 = d1 * head_scale;
        q1_.backward(w1, &dout1, dqin1.data());
        for (int j = 0; j < fd; ++j) dfeat[j] = dqin1[j];

        if (cfg_.twin_critics) {
            const double d2 = q2_.forward(qin.data(), w2)[0] - y[i];
            l2 += 0.5 * d2 * d2;
            const double dout2 = d2 * head_scale;
            q2_.backward(w2, &dout2, dqin2.data());
            for (int j = 0; j < fd; ++j) dfeat[j] += dqin2[j];
        }
        extractor_.backward(ws, dfeat.data());
    }
    const double loss = cfg_.twin_critics ? 0.5 * (l1 + l2) * inv_b : l1 * inv_b;
    if (!std::isfinite(loss)) throw std::runtime_error("critic_update: training diverged");
    critic_adam_.step();
    return loss;
}

double SacAgent::q_min(const std::vector<double>& features, const std::array<double, 2>& action,
                       Mlp::Ws& ws1, Mlp::Ws& ws2, int* argmin) const {
    std::vector<double> qin(features);
    qin.push_back(action[0]);
    qin.push_back(action[1]);
    const double q1 = q1_.forward(qin.data(), ws1)[0];
    if (!cfg_.twin_critics) {
        if (argmin) *argmin = 1;
        return q1;
    }
    const double q2 = q2_.forward(qin.data(), ws2)[0];
    if (argmin) *argmin = q1 <= q2 ? 1 : 2;
    return std::min(q1, q2);
}

double SacAgent::actor_loss_given_eps(const std::vector<const Transition*>& batch,
                                      const std::vector<std::array<double, 2>>& eps) const {
    if (batch.empty() || batch.size() != eps.size())
        throw std::invalid_argument("actor_loss_given_eps: bad batch");
    Mlp::Ws aws, w1, w2;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::vector<double> f = extract_features(batch[i]->obs);
        const double* head = actor_.forward(f.data(), aws);
        const ActionSample s = make_sample(head, eps[i], cfg_);
        loss += alpha_ * s.log_prob - q_min(f, s.action, w1, w2, nullptr);
    }
    return loss / static_cast<double>(batch.size());
}

ActorStats SacAgent::actor_update_with_q(const std::vector<std::vector<double>>& features,
                                         std::uint64_t seed, const QFun& q_fn) {
    if (features.empty()) throw std::invalid_argument("actor_update: empty batch");
    zero_grads(actor_params());
    const double inv_b = 1.0 / static_cast<double>(features.size());
    Mlp::Ws aws;
    std::array<double, 4> dhead{};
    double loss = 0.0, sum_logp = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double* head = actor_.forward(features[i].data(), aws);
        Rng rng(derive_seed(seed, "act-eps", i));
        const ActionSample s = make_sample(head, gaussian_pair(rng), cfg_);
        std::array<double, 2> dqda{};
        const double q = q_fn(features[i], s.action, dqda);
        loss += alpha_ * s.log_prob - q;
        sum_logp += s.log_prob;
        for (int j = 0; j < 2; ++j) {
            const double a = s.action[j];
            const double one_m_a2 = 1.0 - a * a;
            const double corr = 2.0 * a / (one_m_a2 + kTanhEps);
            const double dl_da = alpha_ * corr - dqda[j];
            const double du = dl_da * one_m_a2;
            dhead[j] = du * inv_b;
            const double sigma = std::exp(s.log_std[j]);
            const double dls = du * s.eps[j] * sigma - alpha_;
            dhead[2 + j] = (s.log_std_in_range[j] ? dls : 0.0) * inv_b;
        }
        actor_.backward(aws, dhead.data(), nullptr);
    }
    ActorStats stats;
    stats.loss = loss * inv_b;
    stats.entropy = -sum_logp * inv_b;
    if (!std::isfinite(stats.loss)) throw std::runtime_error("actor_update: training diverged");
    actor_adam_.step();
    if (cfg_.auto_entropy) {
        // descend J(alpha) = alpha * (entropy_target_gap); below-target entropy
        // pushes alpha up
        alpha_grad_ = stats.entropy - cfg_.target_entropy;
        alpha_adam_.step();
        alpha_ = std::max(alpha_, 1e-6);
    }
    stats.alpha = alpha_;
    return stats;
}

ActorStats SacAgent::actor_update(const std::vector<const Transition*>& batch,
                                  std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
    std::vector<std::vector<double>> features;
    features.reserve(batch.size());
    for (const Transition* t : batch) features.push_back(extract_features(t->obs));
    // gradient flows through the critic input only; critic weight-grad
    // accumulation here is discarded by the zero at the next critic update
    QFun q_fn = [this](const std::vector<double>& f, const std::array<double, 2>& a,
                       std::array<double, 2>& dqda) {
        Mlp::Ws w1, w2;
        int argmin = 1;
        const double q = q_min(f, a, w1, w2, &argmin);
        const double dout = 1.0;
        std::vector<double> dqin(f.size() + 2);
        (argmin == 1 ? q1_ : q2_).backward(argmin == 1 ? w1 : w2, &dout, dqin.data());
        dqda = {dqin[f.size()], dqin[f.size() + 1]};
        return q;
    };
    return actor_update_with_q(features, seed, q_fn);
}

void SacAgent::polyak_step() { polyak_step(cfg_.tau); }

void SacAgent::polyak_step(double tau) {
    polyak_update(online_critic_params(1), target_critic_params(1), tau);
    polyak_update(online_critic_params(2), target_critic_params(2), tau);
}

std::vector<std::pair<std::string, std::vector<double>>> SacAgent::sections() {
    std::vector<ParamRef> ext;
    extractor_.visit(ext);
    std::vector<std::pair<std::string, std::vector<double>>> out;
    out.push_back({"extractor", flatten_params(ext)});
    out.push_back({"q1", flatten_params(online_critic_params(1))});
    out.push_back({"q2", flatten_params(online_critic_params(2))});
    out.push_back({"t1", flatten_params(target_critic_params(1))});
    out.push_back({"t2", flatten_params(target_critic_params(2))});
    out.push_back({"actor", flatten_params(actor_params())});
    out.push_back({"alpha", {alpha_}});
    return out;
}

void SacAgent::load_sections(const std::map<std::string, std::vector<double>>& sections) {
    std::vector<ParamRef> ext;
    extractor_.visit(ext);
    unflatten_params(sections.at("extractor"), ext);
    unflatten_params(sections.at("q1"), online_critic_params(1));
    unflatten_params(sections.at("q2"), online_critic_params(2));
    unflatten_params(sections.at("t1"), target_critic_params(1));
    unflatten_params(sections.at("t2"), target_critic_params(2));
    unflatten_params(sections.at("actor"), actor_params());
    alpha_ = sections.at("alpha").at(0);
}

}  // namespace semdrive
