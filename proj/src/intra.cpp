#include "mtd/intra.hpp"

#include <cmath>
#include <string>

#include "mtd/error.hpp"
#include "mtd/rng.hpp"

namespace mtd {

DenseMatrix self_attention(const DenseMatrix& e, const IntraParams& p) {
    if (e.rows < 1) throw DataError("self_attention: empty session");
    const double scale = 1.0 / std::sqrt(static_cast<double>(e.cols));
    DenseMatrix q = matmul(e, p.attn_query.value);
    DenseMatrix k = matmul(e, p.attn_key.value);
    DenseMatrix v = matmul(e, p.attn_value.value);
    DenseMatrix scores = matmul_nt(q, k);
    for (double& s : scores.data) s *= scale;
    return matmul(softmax_rows(scores), v);
}

DenseMatrix ffn(const DenseMatrix& x, const IntraParams& p) {
    DenseMatrix u = matmul(x, p.ffn_w1.value);
    for (int i = 0; i < u.rows; ++i) {
        for (int j = 0; j < u.cols; ++j) u.at(i, j) += p.ffn_b1.value.at(0, j);
    }
    DenseMatrix out = matmul(elementwise(u, Activation::relu), p.ffn_w2.value);
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += p.ffn_b2.value.at(0, j);
    }
    return out;
}

AggregateResult aggregate_states(const DenseMatrix& states, const IntraParams& p) {
    const int len = states.rows;
    const int d = states.cols;
    std::vector<double> last_term = matvec(p.agg_last.value, states.row(len - 1));

    AggregateResult res;
    res.alpha.resize(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        std::vector<double> pre = matvec(p.agg_item.value, states.row(i));
        for (int j = 0; j < d; ++j) pre[static_cast<std::size_t>(j)] += last_term[static_cast<std::size_t>(j)];
        double logit = 0.0;
        for (int j = 0; j < d; ++j) {
            logit += p.agg_score.value.at(0, j) * sigmoid(pre[static_cast<std::size_t>(j)]);
        }
        res.alpha[static_cast<std::size_t>(i)] = logit;
    }
    softmax_inplace(res.alpha);

    res.pooled.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < len; ++i) {
        const double a = res.alpha[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) res.pooled[static_cast<std::size_t>(j)] += a * states.at(i, j);
    }
    return res;
}

std::vector<double> positional_weights(int len, PositionalMode mode) {
    // Exponent is the 1-based distance from the session end: the last item
    // gets exp(-1), the one before exp(-2), and so on (sign flipped in
    // raw_ascending mode).
    std::vector<double> w(static_cast<std::size_t>(len));
    const double sign = (mode == PositionalMode::decay) ? -1.0 : 1.0;
    for (int i = 0; i < len; ++i) {
        w[static_cast<std::size_t>(i)] = sign * static_cast<double>(len - i);
    }
    softmax_inplace(w);
    return w;
}

std::vector<double> session_embedding(std::span<const double> last,
                                      std::span<const double> pooled,
                                      std::span<const double> positional,
                                      const IntraParams& p) {
    std::vector<double> fused;
    fused.reserve(last.size() * 3);
    fused.insert(fused.end(), last.begin(), last.end());
    fused.insert(fused.end(), pooled.begin(), pooled.end());
    fused.insert(fused.end(), positional.begin(), positional.end());
    return matvec(p.fuse_concat.value, fused);
}

std::vector<double> score_items(std::span<const double> session, const DenseMatrix& item_table) {
    return matvec(item_table, session);
}

SessionEncoding encode_session(std::span<const int> prefix, const ModelState& state,
                               const IntraConfig& cfg, Rng* train_rng) {
    if (prefix.empty()) throw DataError("encode_session: empty session");
    if (static_cast<int>(prefix.size()) > cfg.max_prefix_len) {
        prefix = prefix.subspan(prefix.size() - static_cast<std::size_t>(cfg.max_prefix_len));
    }
    const int len = static_cast<int>(prefix.size());
    const int d = state.dim;
    const IntraParams& p = state.intra;

    SessionEncoding enc;
    enc.prefix.assign(prefix.begin(), prefix.end());

    enc.e = DenseMatrix(len, d);
    for (int i = 0; i < len; ++i) {
        const int id = prefix[static_cast<std::size_t>(i)];
        if (id < 0 || id >= state.item_count) {
            throw DataError("encode_session: item ID " + std::to_string(id) + " out of range");
        }
        auto src = state.item_table.value.row(id);
        auto dst = enc.e.row(i);
        for (int j = 0; j < d; ++j) dst[static_cast<std::size_t>(j)] = src[static_cast<std::size_t>(j)];
    }

    // Self-attention.
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    enc.q = matmul(enc.e, p.attn_query.value);
    enc.k = matmul(enc.e, p.attn_key.value);
    enc.v = matmul(enc.e, p.attn_value.value);
    DenseMatrix scores = matmul_nt(enc.q, enc.k);
    for (double& s : scores.data) s *= scale;
    enc.attn = softmax_rows(scores);
    enc.x = matmul(enc.attn, enc.v);

    // Feed-forward.
    enc.u = matmul(enc.x, p.ffn_w1.value);
    for (int i = 0; i < len; ++i) {
        for (int j = 0; j < d; ++j) enc.u.at(i, j) += p.ffn_b1.value.at(0, j);
    }
    enc.r = elementwise(enc.u, Activation::relu);
    enc.states = matmul(enc.r, p.ffn_w2.value);
    for (int i = 0; i < len; ++i) {
        for (int j = 0; j < d; ++j) enc.states.at(i, j) += p.ffn_b2.value.at(0, j);
    }

    if (train_rng != nullptr && cfg.dropout > 0.0) {
        const double keep = 1.0 - cfg.dropout;
        enc.dropout_mask = DenseMatrix(len, d);
        for (std::size_t i = 0; i < enc.dropout_mask.data.size(); ++i) {
            enc.dropout_mask.data[i] = train_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            enc.states.data[i] *= enc.dropout_mask.data[i];
        }
    }

    // Aggregation conditioned on the last item state.
    std::vector<double> last_term = matvec(p.agg_last.value, enc.states.row(len - 1));
    enc.agg_pre = DenseMatrix(len, d);
    enc.agg_sig = DenseMatrix(len, d);
    enc.alpha.resize(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        std::vector<double> item_term = matvec(p.agg_item.value, enc.states.row(i));
        double logit = 0.0;
        for (int j = 0; j < d; ++j) {
            const double pre = last_term[static_cast<std::size_t>(j)] + item_term[static_cast<std::size_t>(j)];
            const double sig = sigmoid(pre);
            enc.agg_pre.at(i, j) = pre;
            enc.agg_sig.at(i, j) = sig;
            logit += p.agg_score.value.at(0, j) * sig;
        }
        enc.alpha[static_cast<std::size_t>(i)] = logit;
    }
    softmax_inplace(enc.alpha);

    enc.aggregate.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < len; ++i) {
        const double a = enc.alpha[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) enc.aggregate[static_cast<std::size_t>(j)] += a * enc.states.at(i, j);
    }

    // Positional fusion with fixed recency weights.
    enc.omega = positional_weights(len, cfg.positional);
    enc.positional.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < len; ++i) {
        const double w = enc.omega[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) enc.positional[static_cast<std::size_t>(j)] += w * enc.states.at(i, j);
    }

    enc.fused.clear();
    enc.fused.reserve(static_cast<std::size_t>(3 * d));
    auto last_row = enc.states.row(len - 1);
    enc.fused.insert(enc.fused.end(), last_row.begin(), last_row.end());
    enc.fused.insert(enc.fused.end(), enc.aggregate.begin(), enc.aggregate.end());
    enc.fused.insert(enc.fused.end(), enc.positional.begin(), enc.positional.end());
    enc.session = matvec(p.fuse_concat.value, enc.fused);
    return enc;
}

void intra_backward(ModelState& state, const SessionEncoding& enc,
                    std::span<const double> dscores) {
    const int len = enc.len();
    const int d = state.dim;
    IntraParams& p = state.intra;

    // Scoring: z_m = <v_m, q_s>.
    std::vector<double> dsession(static_cast<std::size_t>(d), 0.0);
    for (int m = 0; m < state.item_count; ++m) {
        const double g = dscores[static_cast<std::size_t>(m)];
        if (g == 0.0) continue;
        auto vrow = state.item_table.value.row(m);
        auto grow = state.item_table.grad.row(m);
        for (int j = 0; j < d; ++j) {
            dsession[static_cast<std::size_t>(j)] += g * vrow[static_cast<std::size_t>(j)];
            grow[static_cast<std::size_t>(j)] += g * enc.session[static_cast<std::size_t>(j)];
        }
    }

    // Fusion: q_s = W_c * fused.
    add_outer(p.fuse_concat.grad, dsession, enc.fused);
    std::vector<double> dfused = matvec_t(p.fuse_concat.value, dsession);

    DenseMatrix dstates(len, d);
    std::vector<double> dpooled(dfused.begin() + d, dfused.begin() + 2 * d);
    std::vector<double> dpos(dfused.begin() + 2 * d, dfused.begin() + 3 * d);
    for (int j = 0; j < d; ++j) dstates.at(len - 1, j) += dfused[static_cast<std::size_t>(j)];

    // Positional fusion.
    for (int i = 0; i < len; ++i) {
        const double w = enc.omega[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) dstates.at(i, j) += w * dpos[static_cast<std::size_t>(j)];
    }

    // Aggregation: pooled = sum_i alpha_i * states_i.
    std::vector<double> dalpha(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        dalpha[static_cast<std::size_t>(i)] = dot(enc.states.row(i), dpooled);
        const double a = enc.alpha[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) dstates.at(i, j) += a * dpooled[static_cast<std::size_t>(j)];
    }

    // alpha = softmax(logits).
    double inner = 0.0;
    for (int i = 0; i < len; ++i) {
        inner += enc.alpha[static_cast<std::size_t>(i)] * dalpha[static_cast<std::size_t>(i)];
    }
    std::vector<double> dlast_term(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < len; ++i) {
        const double dlogit =
            enc.alpha[static_cast<std::size_t>(i)] * (dalpha[static_cast<std::size_t>(i)] - inner);
        // logit_i = <g, sigmoid(pre_i)>
        std::vector<double> dpre(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const double sig = enc.agg_sig.at(i, j);
            p.agg_score.grad.at(0, j) += dlogit * sig;
            dpre[static_cast<std::size_t>(j)] =
                dlogit * p.agg_score.value.at(0, j) * sig * (1.0 - sig);
        }
        // pre_i = W3 * last + W4 * states_i
        add_outer(p.agg_item.grad, dpre, enc.states.row(i));
        std::vector<double> back = matvec_t(p.agg_item.value, dpre);
        for (int j = 0; j < d; ++j) {
            dstates.at(i, j) += back[static_cast<std::size_t>(j)];
            dlast_term[static_cast<std::size_t>(j)] += dpre[static_cast<std::size_t>(j)];
        }
    }
    add_outer(p.agg_last.grad, dlast_term, enc.states.row(len - 1));
    std::vector<double> back_last = matvec_t(p.agg_last.value, dlast_term);
    for (int j = 0; j < d; ++j) dstates.at(len - 1, j) += back_last[static_cast<std::size_t>(j)];

    // Dropout.
    if (enc.dropout_mask.size() > 0) {
        for (std::size_t i = 0; i < dstates.data.size(); ++i) {
            dstates.data[i] *= enc.dropout_mask.data[i];
        }
    }

    // Feed-forward: states = relu(u) * W2 + b2, u = x * W1 + b1.
    add_scaled(p.ffn_w2.grad, matmul_tn(enc.r, dstates));
    for (int i = 0; i < len; ++i) {
        for (int j = 0; j < d; ++j) p.ffn_b2.grad.at(0, j) += dstates.at(i, j);
    }
    DenseMatrix du = matmul_nt(dstates, p.ffn_w2.value);
    for (std::size_t i = 0; i < du.data.size(); ++i) {
        if (enc.u.data[i] <= 0.0) du.data[i] = 0.0;
    }
    add_scaled(p.ffn_w1.grad, matmul_tn(enc.x, du));
    for (int i = 0; i < len; ++i) {
        for (int j = 0; j < d; ++j) p.ffn_b1.grad.at(0, j) += du.at(i, j);
    }
    DenseMatrix dx = matmul_nt(du, p.ffn_w1.value);

    // Attention: x = attn * v, attn = softmax(q k^T / sqrt(d)).
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    DenseMatrix dattn = matmul_nt(dx, enc.v);
    DenseMatrix dv = matmul_tn(enc.attn, dx);
    DenseMatrix dsc = softmax_rows_backward(dattn, enc.attn);
    for (double& s : dsc.data) s *= scale;
    DenseMatrix dq = matmul(dsc, enc.k);
    DenseMatrix dk = matmul_tn(dsc, enc.q);

    add_scaled(p.attn_query.grad, matmul_tn(enc.e, dq));
    add_scaled(p.attn_key.grad, matmul_tn(enc.e, dk));
    add_scaled(p.attn_value.grad, matmul_tn(enc.e, dv));

    DenseMatrix de = matmul_nt(dq, p.attn_query.value);
    add_scaled(de, matmul_nt(dk, p.attn_key.value));
    add_scaled(de, matmul_nt(dv, p.attn_value.value));

    for (int i = 0; i < len; ++i) {
        auto grow = state.item_table.grad.row(enc.prefix[static_cast<std::size_t>(i)]);
        for (int j = 0; j < d; ++j) grow[static_cast<std::size_t>(j)] += de.at(i, j);
    }
}

double intra_loss(std::span<const Instance> batch, ModelState& state,
                  const IntraConfig& cfg, Rng* train_rng,
                  bool with_grad, double grad_scale) {
    if (batch.empty()) throw DataError("intra_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    double total = 0.0;
    for (const Instance& inst : batch) {
        if (inst.target < 0 || inst.target >= state.item_count) {
            throw DataError("intra_loss: target ID " + std::to_string(inst.target) +
                            " outside vocabulary of size " + std::to_string(state.item_count));
        }
        SessionEncoding enc = encode_session(inst.prefix, state, cfg, train_rng);
        std::vector<double> z = score_items(enc.session, state.item_table.value);
        const double lse = log_sum_exp(z);
        total += (lse - z[static_cast<std::size_t>(inst.target)]) * inv_n;

        if (with_grad) {
            std::vector<double> dz(z.size());
            const double w = grad_scale * inv_n;
            for (std::size_t m = 0; m < z.size(); ++m) {
                dz[m] = std::exp(z[m] - lse) * w;
            }
            dz[static_cast<std::size_t>(inst.target)] -= w;
            intra_backward(state, enc, dz);
        }
    }
    return total;
}

}  // namespace mtd
