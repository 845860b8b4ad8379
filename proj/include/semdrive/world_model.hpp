#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semdrive/embedding.hpp"
#include "semdrive/nn.hpp"

namespace semdrive {

struct WorldBatch {
    std::vector<Embedding> v;                  // current embeddings
    std::vector<std::array<double, 2>> a;      // actions taken
    std::vector<Embedding> v_next;             // observed next embeddings
    std::size_t size() const { return v.size(); }
};

// One-step predictor (embedding, action) -> next embedding.
// Feedforward (k + action_dim) -> hidden -> hidden -> k with tanh hidden
// layers. The training loss is MSE on the raw output; the prediction used by
// the reward path is L2-normalized back onto the sphere.
class WorldModel {
public:
    WorldModel(int embed_dim, int action_dim, int hidden_dim, std::uint64_t seed);
    // copies re-point the optimizer at their own parameter storage
    WorldModel(const WorldModel& other);
    WorldModel& operator=(const WorldModel& other);

    int embed_dim() const { return embed_dim_; }
    int action_dim() const { return action_dim_; }
    int hidden_dim() const { return hidden_dim_; }

    // forward + L2 normalization; throws on a non-finite output
    Embedding predict(const Embedding& v, const double* action) const;
    // raw forward pass (no normalization), as seen by the training loss
    Embedding predict_raw(const Embedding& v, const double* action) const;

    // mean over the batch of ||raw_prediction - v_next||^2; Adam step;
    // returns the pre-update loss. Throws on a non-finite loss.
    double train_step(const WorldBatch& batch, double lr);
    // loss only, no gradient, no update (finite-difference harness)
    double batch_loss(const WorldBatch& batch) const;

    std::vector<ParamRef> params();
    long update_count() const { return updates_; }

    void save(const std::string& path) const;
    static WorldModel load(const std::string& path);

private:
    int embed_dim_;
    int action_dim_;
    int hidden_dim_;
    std::uint64_t seed_;
    Mlp net_;
    Adam adam_;
    long updates_ = 0;
};

}  // namespace semdrive
