#include "mtd/model.hpp"

#include <string>

#include "mtd/error.hpp"
#include "mtd/rng.hpp"

namespace mtd {

ModelState ModelState::init(int item_count, int dim, int gcn_layers, Rng& rng) {
    if (item_count < 1 || dim < 1) {
        throw DataError("model init: item count and dimension must be positive");
    }
    if (gcn_layers < 1 || gcn_layers > 3) {
        throw DataError("model init: gcn layer count must be in 1..3");
    }
    constexpr double kStd = 0.1;

    ModelState s;
    s.item_count = item_count;
    s.dim = dim;
    s.gcn_layers = gcn_layers;

    auto draw = [&](const char* name, int r, int c) {
        return ParamTensor(name, DenseMatrix::gaussian(r, c, kStd, rng));
    };

    s.item_table = draw("item_table", item_count, dim);
    s.intra.attn_query = draw("attn_query", dim, dim);
    s.intra.attn_key = draw("attn_key", dim, dim);
    s.intra.attn_value = draw("attn_value", dim, dim);
    s.intra.ffn_w1 = draw("ffn_w1", dim, dim);
    s.intra.ffn_b1 = draw("ffn_b1", 1, dim);
    s.intra.ffn_w2 = draw("ffn_w2", dim, dim);
    s.intra.ffn_b2 = draw("ffn_b2", 1, dim);
    s.intra.agg_last = draw("agg_last", dim, dim);
    s.intra.agg_item = draw("agg_item", dim, dim);
    s.intra.agg_score = draw("agg_score", 1, dim);
    s.intra.fuse_concat = draw("fuse_concat", dim, 3 * dim);
    for (int l = 0; l < gcn_layers; ++l) {
        s.graph.layer_w.push_back(draw(("gcn_w" + std::to_string(l)).c_str(), dim, dim));
    }
    s.graph.disc_bilinear = draw("disc_bilinear", dim, dim);
    return s;
}

std::vector<ParamTensor*> ModelState::all_params() {
    std::vector<ParamTensor*> out = {
        &item_table,
        &intra.attn_query, &intra.attn_key, &intra.attn_value,
        &intra.ffn_w1, &intra.ffn_b1, &intra.ffn_w2, &intra.ffn_b2,
        &intra.agg_last, &intra.agg_item, &intra.agg_score,
        &intra.fuse_concat,
    };
    for (auto& w : graph.layer_w) out.push_back(&w);
    out.push_back(&graph.disc_bilinear);
    return out;
}

std::vector<ParamTensor*> ModelState::intra_params() {
    return {
        &item_table,
        &intra.attn_query, &intra.attn_key, &intra.attn_value,
        &intra.ffn_w1, &intra.ffn_b1, &intra.ffn_w2, &intra.ffn_b2,
        &intra.agg_last, &intra.agg_item, &intra.agg_score,
        &intra.fuse_concat,
    };
}

std::vector<ParamTensor*> ModelState::graph_params() {
    std::vector<ParamTensor*> out = {&item_table};
    for (auto& w : graph.layer_w) out.push_back(&w);
    out.push_back(&graph.disc_bilinear);
    return out;
}

}  // namespace mtd
