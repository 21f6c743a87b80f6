#include "mtd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "mtd/error.hpp"
#include "mtd/rng.hpp"

namespace mtd {

namespace {

// Shared CSR assembly from a deduplicated undirected edge set.
SparseAdjacency build_normalized(int nodes, const std::set<std::pair<int, int>>& undirected) {
    // Adjacency sets, self-loops included.
    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) neighbors[static_cast<std::size_t>(i)].push_back(i);
    for (const auto& [a, b] : undirected) {
        if (a == b) continue;  // already covered by the self-loop
        neighbors[static_cast<std::size_t>(a)].push_back(b);
        neighbors[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& row : neighbors) std::sort(row.begin(), row.end());

    SparseAdjacency adj;
    adj.nodes = nodes;
    adj.row_offsets.resize(static_cast<std::size_t>(nodes) + 1, 0);
    for (int i = 0; i < nodes; ++i) {
        adj.row_offsets[static_cast<std::size_t>(i) + 1] =
            adj.row_offsets[static_cast<std::size_t>(i)] +
            static_cast<int>(neighbors[static_cast<std::size_t>(i)].size());
    }
    adj.cols.reserve(static_cast<std::size_t>(adj.row_offsets.back()));
    adj.vals.reserve(static_cast<std::size_t>(adj.row_offsets.back()));
    for (int i = 0; i < nodes; ++i) {
        const double deg_i = static_cast<double>(neighbors[static_cast<std::size_t>(i)].size());
        for (int j : neighbors[static_cast<std::size_t>(i)]) {
            const double deg_j = static_cast<double>(neighbors[static_cast<std::size_t>(j)].size());
            adj.cols.push_back(j);
            adj.vals.push_back(1.0 / std::sqrt(deg_i * deg_j));
        }
    }
    return adj;
}

}  // namespace

double SparseAdjacency::value_at(int i, int j) const {
    for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (cols[static_cast<std::size_t>(k)] == j) return vals[static_cast<std::size_t>(k)];
    }
    return 0.0;
}

void SparseAdjacency::multiply(const DenseMatrix& x, DenseMatrix& y) const {
    if (x.rows != nodes) throw DimensionError("adjacency multiply: row count mismatch");
    if (!y.same_shape(x)) y = DenseMatrix(x.rows, x.cols);
    y.zero();
    const int d = x.cols;
    for (int i = 0; i < nodes; ++i) {
        double* yrow = y.data.data() + static_cast<std::size_t>(i) * d;
        for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
            const double v = vals[static_cast<std::size_t>(k)];
            const double* xrow =
                x.data.data() + static_cast<std::size_t>(cols[static_cast<std::size_t>(k)]) * d;
            for (int j = 0; j < d; ++j) yrow[j] += v * xrow[j];
        }
    }
}

SparseAdjacency SparseAdjacency::from_corpus(const SessionCorpus& corpus) {
    std::set<std::pair<int, int>> edges;
    for (const auto& s : corpus.sessions) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            int a = s[i];
            int b = s[i + 1];
            if (a > b) std::swap(a, b);
            edges.emplace(a, b);
        }
    }
    return build_normalized(corpus.item_count(), edges);
}

SparseAdjacency SparseAdjacency::from_edges(int nodes, std::span<const std::pair<int, int>> edges) {
    std::set<std::pair<int, int>> dedup;
    for (auto [a, b] : edges) {
        if (a < 0 || a >= nodes || b < 0 || b >= nodes) {
            throw DataError("from_edges: node index out of range");
        }
        if (a > b) std::swap(a, b);
        dedup.emplace(a, b);
    }
    return build_normalized(nodes, dedup);
}

void dump_adjacency(const SparseAdjacency& adj, const std::string& path) {
    std::ostringstream out;
    for (int i = 0; i < adj.nodes; ++i) {
        for (int k = adj.row_offsets[i]; k < adj.row_offsets[i + 1]; ++k) {
            out << i << ' ' << adj.cols[static_cast<std::size_t>(k)] << ' '
                << adj.vals[static_cast<std::size_t>(k)] << '\n';
        }
    }
    write_file_atomic(path, out.str());
}

DenseMatrix gcn_forward(const SparseAdjacency& adj, const DenseMatrix& h0, const GraphParams& p) {
    DenseMatrix h = h0;
    DenseMatrix prop;
    for (const ParamTensor& w : p.layer_w) {
        adj.multiply(h, prop);
        h = elementwise(matmul(prop, w.value), Activation::relu);
    }
    return h;
}

std::vector<double> readout(const DenseMatrix& h) {
    if (h.rows < 1) throw DataError("readout: empty embedding matrix");
    std::vector<double> z(static_cast<std::size_t>(h.cols), 0.0);
    for (int i = 0; i < h.rows; ++i) {
        for (int j = 0; j < h.cols; ++j) z[static_cast<std::size_t>(j)] += h.at(i, j);
    }
    const double inv = 1.0 / static_cast<double>(h.rows);
    for (double& v : z) v *= inv;
    return z;
}

std::vector<int> corruption_permutation(int n, Rng& rng) {
    if (n < 2) throw DataError("corruption requires at least 2 nodes");
    while (true) {
        std::vector<int> perm = rng.permutation(n);
        for (int i = 0; i < n; ++i) {
            if (perm[static_cast<std::size_t>(i)] != i) return perm;
        }
        // Identity drawn; resample.
    }
}

double discriminate(std::span<const double> h, std::span<const double> z, const DenseMatrix& w) {
    return sigmoid(dot(h, matvec(w, z)));
}

GraphForward graph_forward(const SparseAdjacency& adj, const ModelState& state,
                           std::vector<int> perm) {
    const DenseMatrix& table = state.item_table.value;
    if (adj.nodes != table.rows) {
        throw DimensionError("graph_forward: adjacency has " + std::to_string(adj.nodes) +
                             " nodes but item table has " + std::to_string(table.rows) + " rows");
    }
    GraphForward f;
    f.perm = std::move(perm);

    f.h.push_back(table);
    DenseMatrix corrupted(table.rows, table.cols);
    for (int i = 0; i < table.rows; ++i) {
        auto src = table.row(f.perm[static_cast<std::size_t>(i)]);
        auto dst = corrupted.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    f.hc.push_back(std::move(corrupted));

    for (const ParamTensor& w : state.graph.layer_w) {
        DenseMatrix prop;
        adj.multiply(f.h.back(), prop);
        f.h.push_back(elementwise(matmul(prop, w.value), Activation::relu));
        f.hp.push_back(std::move(prop));

        DenseMatrix cprop;
        adj.multiply(f.hc.back(), cprop);
        f.hc.push_back(elementwise(matmul(cprop, w.value), Activation::relu));
        f.hcp.push_back(std::move(cprop));
    }
    f.z = readout(f.h.back());
    return f;
}

double mi_loss(const SparseAdjacency& adj, ModelState& state, const std::vector<int>& perm,
               bool with_grad, double grad_scale) {
    const int m = state.item_count;
    const int d = state.dim;
    const int layers = static_cast<int>(state.graph.layer_w.size());
    GraphForward f = graph_forward(adj, state, perm);

    const DenseMatrix& h_out = f.h.back();
    const DenseMatrix& hc_out = f.hc.back();
    const DenseMatrix& wg = state.graph.disc_bilinear.value;

    // w = W_g * z is shared by every pair.
    std::vector<double> wz = matvec(wg, f.z);

    const double inv_pairs = 1.0 / static_cast<double>(2 * m);
    double loss = 0.0;
    std::vector<double> da(static_cast<std::size_t>(m));   // d(loss)/d(positive logit)
    std::vector<double> dac(static_cast<std::size_t>(m));  // d(loss)/d(corrupted logit)
    for (int i = 0; i < m; ++i) {
        const double a = dot(h_out.row(i), wz);
        const double ac = dot(hc_out.row(i), wz);
        loss -= log_sigmoid_clamped(a) * inv_pairs;        // -log xi(h, z)
        loss -= log_sigmoid_clamped(-ac) * inv_pairs;      // -log(1 - xi(h~, z))
        if (with_grad) {
            da[static_cast<std::size_t>(i)] = grad_scale * inv_pairs * (sigmoid(a) - 1.0);
            dac[static_cast<std::size_t>(i)] = grad_scale * inv_pairs * sigmoid(ac);
        }
    }
    if (!with_grad) return loss;

    // Discriminator backward: a_i = h_i^T W_g z.
    DenseMatrix dh(m, d);
    DenseMatrix dhc(m, d);
    std::vector<double> u_acc(static_cast<std::size_t>(d), 0.0);  // sum_i da_i h_i + dac_i hc_i
    for (int i = 0; i < m; ++i) {
        const double gi = da[static_cast<std::size_t>(i)];
        const double gci = dac[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) {
            dh.at(i, j) = gi * wz[static_cast<std::size_t>(j)];
            dhc.at(i, j) = gci * wz[static_cast<std::size_t>(j)];
            u_acc[static_cast<std::size_t>(j)] += gi * h_out.at(i, j) + gci * hc_out.at(i, j);
        }
    }
    add_outer(state.graph.disc_bilinear.grad, u_acc, f.z);
    std::vector<double> dz = matvec_t(wg, u_acc);

    // Readout: z = column mean of the clean output.
    const double inv_m = 1.0 / static_cast<double>(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d; ++j) dh.at(i, j) += dz[static_cast<std::size_t>(j)] * inv_m;
    }

    // Propagation backward, clean then corrupted path.
    for (int l = layers - 1; l >= 0; --l) {
        ParamTensor& w = state.graph.layer_w[static_cast<std::size_t>(l)];
        // Clean: h[l+1] = relu(hp[l] * W).
        for (std::size_t i = 0; i < dh.data.size(); ++i) {
            if (f.h[static_cast<std::size_t>(l) + 1].data[i] <= 0.0) dh.data[i] = 0.0;
        }
        add_scaled(w.grad, matmul_tn(f.hp[static_cast<std::size_t>(l)], dh));
        DenseMatrix dprop = matmul_nt(dh, w.value);
        adj.multiply(dprop, dh);  // A is symmetric

        // Corrupted path shares the weights.
        for (std::size_t i = 0; i < dhc.data.size(); ++i) {
            if (f.hc[static_cast<std::size_t>(l) + 1].data[i] <= 0.0) dhc.data[i] = 0.0;
        }
        add_scaled(w.grad, matmul_tn(f.hcp[static_cast<std::size_t>(l)], dhc));
        DenseMatrix dcprop = matmul_nt(dhc, w.value);
        adj.multiply(dcprop, dhc);
    }

    DenseMatrix& table_grad = state.item_table.grad;
    add_scaled(table_grad, dh);
    for (int i = 0; i < m; ++i) {
        auto grow = table_grad.row(f.perm[static_cast<std::size_t>(i)]);
        auto src = dhc.row(i);
        for (int j = 0; j < d; ++j) grow[static_cast<std::size_t>(j)] += src[static_cast<std::size_t>(j)];
    }
    return loss;
}

double mi_loss_sampled(const SparseAdjacency& adj, ModelState& state, Rng& rng,
                       bool with_grad, double grad_scale) {
    return mi_loss(adj, state, corruption_permutation(state.item_count, rng), with_grad, grad_scale);
}

}  // namespace mtd
