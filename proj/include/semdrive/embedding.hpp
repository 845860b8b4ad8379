#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semdrive/sim_world.hpp"

namespace semdrive {

// Unit-norm real vector of the configured dimension.
using Embedding = std::vector<double>;

double l2_norm(const Embedding& v);
// In place; throws on (numerically) zero norm.
void l2_normalize(Embedding& v);

// Standard cosine similarity; throws on dimension mismatch or zero-norm input.
double cosine(const Embedding& a, const Embedding& b);

// raw = 0.5*cos(v, u_ideal) - 0.5*cos(v, u_present), affinely mapped to [0,1].
double static_reward(const Embedding& v, const Embedding& u_ideal, const Embedding& u_present);

// Frozen random projection over one-hot class channels. Identical grids yield
// bitwise-identical embeddings; the matrix is a pure function of (seed, shape).
class BevEncoder {
public:
    BevEncoder(int grid_size, int dim, std::uint64_t seed);

    Embedding encode(const BevGrid& grid) const;
    int dim() const { return dim_; }
    int grid_size() const { return grid_size_; }

    static constexpr int n_classes = 4;

private:
    int grid_size_;
    int dim_;
    std::vector<double> weights_;  // (grid*grid*n_classes) x dim, row-major
};

// Bag-of-hashed-3-grams into `buckets` counts, then the same frozen
// projection family, then L2 normalization.
class TextEncoder {
public:
    TextEncoder(int dim, std::uint64_t seed, int buckets = 4096);

    Embedding encode(const std::string& prompt) const;
    int dim() const { return dim_; }
    int buckets() const { return buckets_; }

private:
    int dim_;
    int buckets_;
    std::vector<double> weights_;  // buckets x dim, row-major
};

}  // namespace semdrive
