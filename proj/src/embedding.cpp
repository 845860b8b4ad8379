#include "semdrive/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semdrive/rng.hpp"

namespace semdrive {

namespace {
// distinct projection-family streams so the two encoders never share weights
constexpr std::uint64_t kBevStream = 1;
constexpr std::uint64_t kTextStream = 2;
}  // namespace

double l2_norm(const Embedding& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void l2_normalize(Embedding& v) {
    const double n = l2_norm(v);
    if (n < 1e-12) throw std::invalid_argument("l2_normalize: zero-norm vector");
    for (double& x : v) x /= n;
}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-24 || nb < 1e-24) throw std::invalid_argument("cosine: zero-norm input");
    return num / (std::sqrt(na) * std::sqrt(nb));
}

double static_reward(const Embedding& v, const Embedding& u_ideal, const Embedding& u_present) {
    const double raw = 0.5 * cosine(v, u_ideal) - 0.5 * cosine(v, u_present);
    return (raw + 1.0) / 2.0;
}

BevEncoder::BevEncoder(int grid_size, int dim, std::uint64_t seed)
    : grid_size_(grid_size), dim_(dim) {
    if (grid_size <= 0 || dim <= 0) throw std::invalid_argument("BevEncoder: bad shape");
    const std::size_t rows = static_cast<std::size_t>(grid_size) * grid_size * n_classes;
    weights_.resize(rows * dim);
    for (std::size_t i = 0; i < weights_.size(); ++i)
        weights_[i] = hashed_uniform_sym(seed, kBevStream, i);
}

Embedding BevEncoder::encode(const BevGrid& grid) const {
    if (grid.size != grid_size_)
        throw std::invalid_argument("BevEncoder::encode: grid size mismatch");
    Embedding out(dim_, 0.0);
    const std::size_t n_cells = grid.cells.size();
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        // one-hot channels: only the cell's own class row contributes
        const std::size_t row = cell * n_classes + grid.cells[cell];
        const double* w = &weights_[row * dim_];
        for (int j = 0; j < dim_; ++j) out[j] += w[j];
    }
    l2_normalize(out);
    return out;
}

TextEncoder::TextEncoder(int dim, std::uint64_t seed, int buckets)
    : dim_(dim), buckets_(buckets) {
    if (dim <= 0 || buckets <= 0) throw std::invalid_argument("TextEncoder: bad shape");
    weights_.resize(static_cast<std::size_t>(buckets) * dim);
    for (std::size_t i = 0; i < weights_.size(); ++i)
        weights_[i] = hashed_uniform_sym(seed, kTextStream, i);
}

Embedding TextEncoder::encode(const std::string& prompt) const {
    std::string_view s(prompt);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.empty()) throw std::invalid_argument("TextEncoder::encode: empty prompt");

    std::vector<double> counts(buckets_, 0.0);
    if (s.size() < 3) {
        counts[fnv1a(s) % buckets_] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= s.size(); ++i)
            counts[fnv1a(s.substr(i, 3)) % buckets_] += 1.0;
    }
    Embedding out(dim_, 0.0);
    for (int b = 0; b < buckets_; ++b) {
        if (counts[b] == 0.0) continue;
        const double* w = &weights_[static_cast<std::size_t>(b) * dim_];
        for (int j = 0; j < dim_; ++j) out[j] += counts[b] * w[j];
    }
    l2_normalize(out);
    return out;
}

}  // namespace semdrive
