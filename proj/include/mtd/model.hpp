#pragma once

#include <vector>

#include "mtd/param.hpp"

namespace mtd {

class Rng;

// Positional fusion weighting. `decay` gives later items exponentially more
// weight (normalized exp(-(distance_from_end + 1))); `raw_ascending` keeps the
// unnegated exponent for comparison, which weighs early items more.
enum class PositionalMode { decay, raw_ascending };

// Session-encoder weights. Vectors are stored 1 x d.
struct IntraParams {
    ParamTensor attn_query;   // d x d
    ParamTensor attn_key;     // d x d
    ParamTensor attn_value;   // d x d
    ParamTensor ffn_w1;       // d x d
    ParamTensor ffn_b1;       // 1 x d
    ParamTensor ffn_w2;       // d x d
    ParamTensor ffn_b2;       // 1 x d
    ParamTensor agg_last;     // d x d, transform of the final item state
    ParamTensor agg_item;     // d x d, transform of each item state
    ParamTensor agg_score;    // 1 x d, projection producing attention logits
    ParamTensor fuse_concat;  // d x 3d, mixes [last, aggregate, positional]
};

// Graph-encoder weights: one d x d transform per propagation layer plus the
// bilinear discriminator matrix.
struct GraphParams {
    std::vector<ParamTensor> layer_w;  // each d x d
    ParamTensor disc_bilinear;         // d x d
};

// Full trainable state. The item embedding table is shared by both encoders;
// Adam moments live with each parameter and are shared across training
// phases. Single-writer: the trainer mutates, everyone else reads between
// steps.
struct ModelState {
    int item_count = 0;   // M
    int dim = 0;          // d
    int gcn_layers = 1;   // L

    ParamTensor item_table;  // M x d
    IntraParams intra;
    GraphParams graph;

    // Zero-mean Gaussian init, stddev 0.1, drawn in checkpoint order.
    static ModelState init(int item_count, int dim, int gcn_layers, Rng& rng);

    // Every parameter, in the fixed order the checkpoint format uses:
    // item_table, attn_query, attn_key, attn_value, ffn_w1, ffn_b1, ffn_w2,
    // ffn_b2, agg_last, agg_item, agg_score, fuse_concat, gcn_w{0..L-1},
    // disc_bilinear.
    std::vector<ParamTensor*> all_params();

    // Parameters touched by the intra-session phase (includes item_table).
    std::vector<ParamTensor*> intra_params();

    // Parameters touched by the graph phase (includes item_table).
    std::vector<ParamTensor*> graph_params();
};

}  // namespace mtd
