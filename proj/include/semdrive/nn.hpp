#pragma once

#include <cstdint>
#include <vector>

#include "semdrive/rng.hpp"

namespace semdrive {

// Flat view over one parameter block and its gradient accumulator.
struct ParamRef {
    double* value = nullptr;
    double* grad = nullptr;
    std::size_t count = 0;
};

std::size_t param_count(const std::vector<ParamRef>& refs);
void zero_grads(const std::vector<ParamRef>& refs);
std::vector<double> flatten_params(const std::vector<ParamRef>& refs);
// throws when the flat size disagrees with the refs
void unflatten_params(const std::vector<double>& flat, const std::vector<ParamRef>& refs);
// target <- tau*online + (1-tau)*target, elementwise; shapes must match.
void polyak_update(const std::vector<ParamRef>& online, const std::vector<ParamRef>& target,
                   double tau);
void copy_params(const std::vector<ParamRef>& from, const std::vector<ParamRef>& to);

// ---------------------------------------------------------------------------
// Layers (sample-at-a-time; batching is a caller loop with grad accumulation)
// ---------------------------------------------------------------------------

struct Linear {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> w;   // out x in, row-major
    std::vector<double> b;
    std::vector<double> gw;
    std::vector<double> gb;

    void init(int in, int out, Rng& rng);  // uniform +-1/sqrt(in), zero bias
    void forward(const double* x, double* y) const;
    // accumulates gw/gb from (x, dy); writes dL/dx into dx when non-null
    void backward(const double* x, const double* dy, double* dx);
    void visit(std::vector<ParamRef>& refs);
};

struct Conv2d {
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 0;
    int stride = 0;
    std::vector<double> w;  // out_ch x in_ch x k x k
    std::vector<double> b;
    std::vector<double> gw;
    std::vector<double> gb;

    void init(int in_channels, int out_channels, int kernel_size, int stride_len, Rng& rng);
    static int out_size(int in_size, int kernel, int stride);  // valid padding
    int out_size(int in_size) const { return out_size(in_size, kernel, stride); }
    void forward(const double* x, int in_size, double* y) const;
    void backward(const double* x, int in_size, const double* dy, double* dx);
    void visit(std::vector<ParamRef>& refs);
};

// Feedforward stack: tanh on hidden layers, linear output unless
// tanh_output is set.
struct Mlp {
    std::vector<Linear> layers;
    bool tanh_output = false;

    struct Ws {
        std::vector<std::vector<double>> acts;  // acts[0] = input, acts[i] = layer i output
        std::vector<std::vector<double>> dacts;
    };

    void init(const std::vector<int>& dims, Rng& rng);
    int in_dim() const { return layers.front().in_dim; }
    int out_dim() const { return layers.back().out_dim; }
    // returns pointer to the output activation inside ws
    const double* forward(const double* x, Ws& ws) const;
    // dout has out_dim entries; accumulates grads; writes dL/dinput when dx non-null
    void backward(Ws& ws, const double* dout, double* dx);
    void visit(std::vector<ParamRef>& refs);
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<ParamRef> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    // one update from the currently accumulated gradients (bias-corrected)
    void step();
    // re-point the refs at a copied owner's storage; moment state is kept
    void rebind(std::vector<ParamRef> params);

private:
    std::vector<ParamRef> params_;
    std::vector<double> m_;
    std::vector<double> v_;
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
};

}  // namespace semdrive
