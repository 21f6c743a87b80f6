#pragma once

#include <span>
#include <vector>

#include "mtd/data.hpp"
#include "mtd/matrix.hpp"
#include "mtd/model.hpp"

namespace mtd {

class Rng;

struct IntraConfig {
    // Inverted-dropout probability on the encoded item states; active only
    // when a training Rng is supplied to encode_session.
    double dropout = 0.0;
    PositionalMode positional = PositionalMode::decay;
    // Longer prefixes keep their most recent items.
    int max_prefix_len = 200;
};

// Forward cache for one encoded prefix: every intermediate the hand-derived
// backward pass needs.
struct SessionEncoding {
    std::vector<int> prefix;        // item IDs after truncation
    DenseMatrix e;                  // I x d input embeddings
    DenseMatrix q, k, v;            // I x d attention projections
    DenseMatrix attn;               // I x I row-softmaxed attention weights
    DenseMatrix x;                  // I x d attention output
    DenseMatrix u;                  // I x d feed-forward pre-activation
    DenseMatrix r;                  // I x d relu(u)
    DenseMatrix states;             // I x d item states fed to aggregation (post-dropout)
    DenseMatrix dropout_mask;       // empty when dropout is off
    DenseMatrix agg_pre;            // I x d sigmoid inputs
    DenseMatrix agg_sig;            // I x d sigmoid outputs
    std::vector<double> alpha;      // I aggregation weights, sums to 1
    std::vector<double> omega;      // I positional weights, sums to 1
    std::vector<double> aggregate;  // d, sum_i alpha_i * state_i
    std::vector<double> positional; // d, sum_i omega_i * state_i
    std::vector<double> fused;      // 3d concat [last, aggregate, positional]
    std::vector<double> session;    // d, the session representation q_s

    int len() const { return static_cast<int>(prefix.size()); }
};

// Scaled dot-product self-attention over the stacked prefix embeddings.
// No causal mask and no positional signal; positions enter later through the
// decay fusion.
DenseMatrix self_attention(const DenseMatrix& e, const IntraParams& p);

// Two-layer feed-forward with ReLU: relu(x*W1 + b1)*W2 + b2.
DenseMatrix ffn(const DenseMatrix& x, const IntraParams& p);

// Attention pooling conditioned on the final item state:
// alpha_i = softmax_i(g . sigmoid(W3*x_last + W4*x_i)).
struct AggregateResult {
    std::vector<double> pooled;  // d
    std::vector<double> alpha;   // I, sums to 1
};
AggregateResult aggregate_states(const DenseMatrix& states, const IntraParams& p);

// Normalized positional weights for a prefix of length len; sums to 1.
// In decay mode the weights increase strictly toward the most recent item.
std::vector<double> positional_weights(int len, PositionalMode mode);

// q_s = W_c * [last; pooled; positional]
std::vector<double> session_embedding(std::span<const double> last,
                                      std::span<const double> pooled,
                                      std::span<const double> positional,
                                      const IntraParams& p);

// Inner-product scores against every item embedding: z_m = <q_s, v_m>.
std::vector<double> score_items(std::span<const double> session, const DenseMatrix& item_table);

// Full forward pass over one prefix. Throws DataError on an empty prefix.
// `train_rng` enables dropout; pass nullptr for deterministic inference.
SessionEncoding encode_session(std::span<const int> prefix, const ModelState& state,
                               const IntraConfig& cfg, Rng* train_rng);

// Accumulates d(loss)/d(params) for one instance given d(loss)/d(scores).
// Touches every intra parameter plus the item table.
void intra_backward(ModelState& state, const SessionEncoding& enc,
                    std::span<const double> dscores);

// Mean multi-class cross-entropy over the batch:
//   loss = -(1/N) sum_n log softmax(z_n)[target_n]
// With with_grad, gradients scaled by grad_scale are accumulated into the
// intra parameters and the item table. Returns the unscaled mean loss.
double intra_loss(std::span<const Instance> batch, ModelState& state,
                  const IntraConfig& cfg, Rng* train_rng,
                  bool with_grad, double grad_scale = 1.0);

}  // namespace mtd
