#include "semdrive/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace semdrive {

std::size_t param_count(const std::vector<ParamRef>& refs) {
    std::size_t n = 0;
    for (const auto& r : refs) n += r.count;
    return n;
}

void zero_grads(const std::vector<ParamRef>& refs) {
    for (const auto& r : refs)
        for (std::size_t i = 0; i < r.count; ++i) r.grad[i] = 0.0;
}

std::vector<double> flatten_params(const std::vector<ParamRef>& refs) {
    std::vector<double> flat;
    flat.reserve(param_count(refs));
    for (const auto& r : refs) flat.insert(flat.end(), r.value, r.value + r.count);
    return flat;
}

void unflatten_params(const std::vector<double>& flat, const std::vector<ParamRef>& refs) {
    if (flat.size() != param_count(refs))
        throw std::invalid_argument("unflatten_params: size mismatch");
    std::size_t k = 0;
    for (const auto& r : refs)
        for (std::size_t i = 0; i < r.count; ++i) r.value[i] = flat[k++];
}

void polyak_update(const std::vector<ParamRef>& online, const std::vector<ParamRef>& target,
                   double tau) {
    if (online.size() != target.size())
        throw std::invalid_argument("polyak_update: block count mismatch");
    for (std::size_t b = 0; b < online.size(); ++b) {
        if (online[b].count != target[b].count)
            throw std::invalid_argument("polyak_update: block shape mismatch");
        for (std::size_t i = 0; i < online[b].count; ++i)
            target[b].value[i] = tau * online[b].value[i] + (1.0 - tau) * target[b].value[i];
    }
}

void copy_params(const std::vector<ParamRef>& from, const std::vector<ParamRef>& to) {
    polyak_update(from, to, 1.0);
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

void Linear::init(int in, int out, Rng& rng) {
    in_dim = in;
    out_dim = out;
    w.resize(static_cast<std::size_t>(in) * out);
    b.assign(out, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(out, 0.0);
    const double lim = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& x : w) x = rng.uniform(-lim, lim);
}

void Linear::forward(const double* x, double* y) const {
    for (int o = 0; o < out_dim; ++o) {
        const double* row = &w[static_cast<std::size_t>(o) * in_dim];
        double acc = b[o];
        for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

void Linear::backward(const double* x, const double* dy, double* dx) {
    if (dx)
        for (int i = 0; i < in_dim; ++i) dx[i] = 0.0;
    for (int o = 0; o < out_dim; ++o) {
        const double g = dy[o];
        gb[o] += g;
        double* grow = &gw[static_cast<std::size_t>(o) * in_dim];
        const double* row = &w[static_cast<std::size_t>(o) * in_dim];
        for (int i = 0; i < in_dim; ++i) {
            grow[i] += g * x[i];
            if (dx) dx[i] += g * row[i];
        }
    }
}

void Linear::visit(std::vector<ParamRef>& refs) {
    refs.push_back({w.data(), gw.data(), w.size()});
    refs.push_back({b.data(), gb.data(), b.size()});
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

void Conv2d::init(int in_channels, int out_channels, int kernel_size, int stride_len, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kernel = kernel_size;
    stride = stride_len;
    w.resize(static_cast<std::size_t>(out_ch) * in_ch * kernel * kernel);
    b.assign(out_ch, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(out_ch, 0.0);
    const double lim = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel * kernel);
    for (auto& x : w) x = rng.uniform(-lim, lim);
}

int Conv2d::out_size(int in_size, int kernel, int stride) {
    if (in_size < kernel) throw std::invalid_argument("Conv2d: input smaller than kernel");
    return (in_size - kernel) / stride + 1;
}

void Conv2d::forward(const double* x, int in_size, double* y) const {
    const int os = out_size(in_size);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int orow = 0; orow < os; ++orow) {
            for (int ocol = 0; ocol < os; ++ocol) {
                double acc = b[oc];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* xc = &x[static_cast<std::size_t>(ic) * in_size * in_size];
                    const double* wk =
                        &w[((static_cast<std::size_t>(oc) * in_ch + ic) * kernel) * kernel];
                    for (int kr = 0; kr < kernel; ++kr) {
                        const double* xrow = &xc[(orow * stride + kr) * in_size + ocol * stride];
                        const double* wrow = &wk[kr * kernel];
                        for (int kc = 0; kc < kernel; ++kc) acc += wrow[kc] * xrow[kc];
                    }
                }
                y[(static_cast<std::size_t>(oc) * os + orow) * os + ocol] = acc;
            }
        }
    }
}

void Conv2d::backward(const double* x, int in_size, const double* dy, double* dx) {
    const int os = out_size(in_size);
    if (dx) {
        const std::size_t n = static_cast<std::size_t>(in_ch) * in_size * in_size;
        for (std::size_t i = 0; i < n; ++i) dx[i] = 0.0;
    }
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int orow = 0; orow < os; ++orow) {
            for (int ocol = 0; ocol < os; ++ocol) {
                const double g = dy[(static_cast<std::size_t>(oc) * os + orow) * os + ocol];
                gb[oc] += g;
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* xc = &x[static_cast<std::size_t>(ic) * in_size * in_size];
                    double* dxc = dx ? &dx[static_cast<std::size_t>(ic) * in_size * in_size] : nullptr;
                    const std::size_t wbase =
                        (static_cast<std::size_t>(oc) * in_ch + ic) * kernel * kernel;
                    for (int kr = 0; kr < kernel; ++kr) {
                        const int xoff = (orow * stride + kr) * in_size + ocol * stride;
                        for (int kc = 0; kc < kernel; ++kc) {
                            gw[wbase + kr * kernel + kc] += g * xc[xoff + kc];
                            if (dxc) dxc[xoff + kc] += g * w[wbase + kr * kernel + kc];
                        }
                    }
                }
            }
        }
    }
}

void Conv2d::visit(std::vector<ParamRef>& refs) {
    refs.push_back({w.data(), gw.data(), w.size()});
    refs.push_back({b.data(), gb.data(), b.size()});
}

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

void Mlp::init(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least input and output dims");
    layers.resize(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
        layers[i].init(dims[i], dims[i + 1], rng);
}

const double* Mlp::forward(const double* x, Ws& ws) const {
    ws.acts.resize(layers.size() + 1);
    ws.dacts.resize(layers.size() + 1);
    ws.acts[0].assign(x, x + layers.front().in_dim);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        ws.acts[i + 1].resize(layers[i].out_dim);
        layers[i].forward(ws.acts[i].data(), ws.acts[i + 1].data());
        if (i + 1 < layers.size() || tanh_output)
            for (double& v : ws.acts[i + 1]) v = std::tanh(v);
    }
    return ws.acts.back().data();
}

void Mlp::backward(Ws& ws, const double* dout, double* dx) {
    std::vector<double>& dlast = ws.dacts[layers.size()];
    dlast.assign(dout, dout + layers.back().out_dim);
    for (std::size_t i = layers.size(); i-- > 0;) {
        if (i + 1 < layers.size() || tanh_output) {
            // activation derivative of the tanh applied after layer i
            const auto& a = ws.acts[i + 1];
            auto& d = ws.dacts[i + 1];
            for (std::size_t j = 0; j < a.size(); ++j) d[j] *= 1.0 - a[j] * a[j];
        }
        ws.dacts[i].resize(layers[i].in_dim);
        double* dprev = (i == 0) ? dx : ws.dacts[i].data();
        layers[i].backward(ws.acts[i].data(), ws.dacts[i + 1].data(), dprev);
    }
}

void Mlp::visit(std::vector<ParamRef>& refs) {
    for (auto& layer : layers) layer.visit(refs);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.assign(param_count(params_), 0.0);
    v_.assign(param_count(params_), 0.0);
}

void Adam::rebind(std::vector<ParamRef> params) {
    if (param_count(params) != param_count(params_))
        throw std::invalid_argument("Adam::rebind: parameter count mismatch");
    params_ = std::move(params);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t k = 0;
    for (const auto& p : params_) {
        for (std::size_t i = 0; i < p.count; ++i, ++k) {
            const double g = p.grad[i];
            m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
            v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g * g;
            const double mhat = m_[k] / bc1;
            const double vhat = v_[k] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace semdrive
