#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mtd/data.hpp"
#include "mtd/matrix.hpp"
#include "mtd/model.hpp"

namespace mtd {

class Rng;

// Symmetric-normalized cross-session item transition graph in CSR form.
// Construction symmetrizes the observed transitions, adds self-loops, and
// stores value(i,j) = 1 / sqrt(deg_i * deg_j) where deg counts the row's
// binary entries (self-loop included). Immutable after construction.
struct SparseAdjacency {
    int nodes = 0;
    std::vector<int> row_offsets;  // nodes + 1
    std::vector<int> cols;         // sorted within each row
    std::vector<double> vals;

    std::size_t entry_count() const { return cols.size(); }
    int degree(int node) const { return row_offsets[node + 1] - row_offsets[node]; }
    double value_at(int i, int j) const;  // 0 when absent

    // y = A * x for row-major x (nodes x d). Deterministic accumulation
    // order (columns ascending).
    void multiply(const DenseMatrix& x, DenseMatrix& y) const;

    // Consecutive item pairs of every training session become undirected
    // binary edges.
    static SparseAdjacency from_corpus(const SessionCorpus& corpus);

    // Direct construction from an undirected edge list (duplicates and
    // orientation ignored; self-loops always added).
    static SparseAdjacency from_edges(int nodes, std::span<const std::pair<int, int>> edges);
};

// "i j value" text dump of the normalized entries.
void dump_adjacency(const SparseAdjacency& adj, const std::string& path);

// L rounds of H <- relu(A * H * W_l), starting from h0.
DenseMatrix gcn_forward(const SparseAdjacency& adj, const DenseMatrix& h0, const GraphParams& p);

// Column-wise mean of the node embeddings.
std::vector<double> readout(const DenseMatrix& h);

// Uniform random permutation of 0..n-1 with the identity excluded by
// resampling. Throws DataError when n < 2.
std::vector<int> corruption_permutation(int n, Rng& rng);

// Bilinear discriminator sigma(h^T W z): probability that the node embedding
// belongs to the graph summarized by z.
double discriminate(std::span<const double> h, std::span<const double> z, const DenseMatrix& w);

// Forward cache for the mutual-information objective.
struct GraphForward {
    std::vector<DenseMatrix> h;    // clean activations, h[0] = input copy, size L+1
    std::vector<DenseMatrix> hp;   // A * h[l] per layer (pre-transform), size L
    std::vector<DenseMatrix> hc;   // corrupted activations, size L+1
    std::vector<DenseMatrix> hcp;  // A * hc[l] per layer, size L
    std::vector<int> perm;         // hc[0].row(i) == h[0].row(perm[i])
    std::vector<double> z;         // readout of clean output
};

GraphForward graph_forward(const SparseAdjacency& adj, const ModelState& state,
                           std::vector<int> perm);

// Binary cross-entropy over M positive (true node, summary) and M corrupted
// pairs; probabilities clamped to [1e-12, 1 - 1e-12] before the log. With
// with_grad, gradients scaled by grad_scale flow into the discriminator, the
// propagation weights, and the item table.
double mi_loss(const SparseAdjacency& adj, ModelState& state, const std::vector<int>& perm,
               bool with_grad, double grad_scale = 1.0);

// Convenience: draws a corruption permutation and evaluates mi_loss.
double mi_loss_sampled(const SparseAdjacency& adj, ModelState& state, Rng& rng,
                       bool with_grad, double grad_scale = 1.0);

}  // namespace mtd
