#include "semdrive/world_model.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "semdrive/checkpoint.hpp"

namespace semdrive {

WorldModel::WorldModel(int embed_dim, int action_dim, int hidden_dim, std::uint64_t seed)
    : embed_dim_(embed_dim), action_dim_(action_dim), hidden_dim_(hidden_dim), seed_(seed) {
    if (embed_dim <= 0 || action_dim <= 0 || hidden_dim <= 0)
        throw std::invalid_argument("WorldModel: bad dims");
    Rng rng(derive_seed(seed, "world-model"));
    net_.init({embed_dim + action_dim, hidden_dim, hidden_dim, embed_dim}, rng);
    adam_ = Adam(params(), 1e-3);
}

WorldModel::WorldModel(const WorldModel& other)
    : embed_dim_(other.embed_dim_),
      action_dim_(other.action_dim_),
      hidden_dim_(other.hidden_dim_),
      seed_(other.seed_),
      net_(other.net_),
      adam_(other.adam_),
      updates_(other.updates_) {
    adam_.rebind(params());
}

WorldModel& WorldModel::operator=(const WorldModel& other) {
    if (this == &other) return *this;
    embed_dim_ = other.embed_dim_;
    action_dim_ = other.action_dim_;
    hidden_dim_ = other.hidden_dim_;
    seed_ = other.seed_;
    net_ = other.net_;
    adam_ = other.adam_;
    updates_ = other.updates_;
    adam_.rebind(params());
    return *this;
}

std::vector<ParamRef> WorldModel::params() {
    std::vector<ParamRef> refs;
    net_.visit(refs);
    return refs;
}

Embedding WorldModel::predict_raw(const Embedding& v, const double* action) const {
    if (static_cast<int>(v.size()) != embed_dim_)
        throw std::invalid_argument("WorldModel::predict: embedding dim mismatch");
    std::vector<double> input(v);
    input.insert(input.end(), action, action + action_dim_);
    Mlp::Ws ws;
    const double* out = net_.forward(input.data(), ws);
    Embedding raw(out, out + embed_dim_);
    for (double x : raw)
        if (!std::isfinite(x)) throw std::runtime_error("WorldModel: non-finite output (corrupted model)");
    return raw;
}

Embedding WorldModel::predict(const Embedding& v, const double* action) const {
    Embedding raw = predict_raw(v, action);
    l2_normalize(raw);
    return raw;
}

double WorldModel::batch_loss(const WorldBatch& batch) const {
    if (batch.size() == 0) throw std::invalid_argument("WorldModel: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Embedding raw = predict_raw(batch.v[i], batch.a[i].data());
        for (int j = 0; j < embed_dim_; ++j) {
            const double diff = raw[j] - batch.v_next[i][j];
            total += diff * diff;
        }
    }
    return total / static_cast<double>(batch.size());
}

double WorldModel::train_step(const WorldBatch& batch, double lr) {
    if (batch.size() == 0) throw std::invalid_argument("WorldModel::train_step: empty batch");
    zero_grads(params());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    Mlp::Ws ws;
    std::vector<double> input(embed_dim_ + action_dim_);
    std::vector<double> dout(embed_dim_);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (static_cast<int>(batch.v[i].size()) != embed_dim_ ||
            static_cast<int>(batch.v_next[i].size()) != embed_dim_)
            throw std::invalid_argument("WorldModel::train_step: batch dim mismatch");
        std::copy(batch.v[i].begin(), batch.v[i].end(), input.begin());
        std::copy(batch.a[i].begin(), batch.a[i].end(), input.begin() + embed_dim_);
        const double* out = net_.forward(input.data(), ws);
        for (int j = 0; j < embed_dim_; ++j) {
            const double diff = out[j] - batch.v_next[i][j];
            total += diff * diff;
            dout[j] = 2.0 * diff * inv_b;
        }
        net_.backward(ws, dout.data(), nullptr);
    }
    const double loss = total * inv_b;
    if (!std::isfinite(loss)) throw std::runtime_error("WorldModel::train_step: training diverged");
    adam_.set_lr(lr);
    adam_.step();
    ++updates_;
    return loss;
}

void WorldModel::save(const std::string& path) const {
    nlohmann::json meta;
    meta["embed_dim"] = embed_dim_;
    meta["action_dim"] = action_dim_;
    meta["hidden_dim"] = hidden_dim_;
    meta["seed"] = seed_;
    meta["updates"] = updates_;
    auto* self = const_cast<WorldModel*>(this);
    save_checkpoint(path, meta.dump(), {{"net", flatten_params(self->params())}});
}

WorldModel WorldModel::load(const std::string& path) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    const nlohmann::json meta = nlohmann::json::parse(ck.meta_json);
    WorldModel model(meta.at("embed_dim").get<int>(), meta.at("action_dim").get<int>(),
                     meta.at("hidden_dim").get<int>(), meta.at("seed").get<std::uint64_t>());
    model.updates_ = meta.at("updates").get<long>();
    unflatten_params(ck.sections.at("net"), model.params());
    return model;
}

}  // namespace semdrive
