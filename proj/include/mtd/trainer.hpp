#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtd/data.hpp"
#include "mtd/graph.hpp"
#include "mtd/intra.hpp"
#include "mtd/model.hpp"
#include "mtd/param.hpp"

namespace mtd {

class Rng;

struct TrainConfig {
    int dim = 100;
    double lr = 1e-3;
    int batch = 512;
    int epochs = 10;
    double lambda1 = 1.0;   // weight on the intra-session objective
    double lambda2 = 1e-6;  // L2 penalty on the active phase's parameters
    int freq = 1;           // intra passes per graph pass within an epoch
    int graph_steps = 16;   // optimizer steps in each epoch's graph pass
    double dropout = 0.2;
    std::uint64_t seed = 42;
    int gcn_layers = 1;
    bool disable_graph = false;  // intra-only ablation
    PositionalMode positional = PositionalMode::decay;
    int max_prefix_len = 200;
    AdamConfig adam;  // lr is taken from `lr` above

    IntraConfig intra_config() const {
        return IntraConfig{dropout, positional, max_prefix_len};
    }
    AdamConfig adam_config() const {
        AdamConfig a = adam;
        a.lr = lr;
        return a;
    }
};

struct EpochReport {
    int epoch = 0;
    double graph_loss = 0.0;  // mutual-information loss before the step
    double intra_loss = 0.0;  // mean cross-entropy over the epoch's batches
    double graph_ms = 0.0;
    double intra_ms = 0.0;
    int graph_steps = 0;
    int intra_steps = 0;
};

// One optimizer step on the mutual-information objective plus L2 on the
// graph-phase parameters. Returns the (unregularized) loss.
double graph_phase_step(ModelState& state, const SparseAdjacency& adj,
                        const TrainConfig& cfg, Rng& rng);

// Overwrites the item table with the propagated embeddings
// gcn_forward(adj, item_table, graph). Value overwrite only; Adam moments
// are untouched.
void sync_item_table(ModelState& state, const SparseAdjacency& adj);

// One epoch: graph phase (unless disabled), table sync, then `freq` full
// shuffled passes over the instances in mini-batches. Throws NumericError
// naming the phase and step if a loss goes non-finite.
EpochReport train_epoch(ModelState& state, std::span<const Instance> instances,
                        const SparseAdjacency* adj, const TrainConfig& cfg, Rng& rng);

// Full run: builds the adjacency (unless disabled), initializes nothing --
// the caller owns state creation -- and trains for cfg.epochs.
std::vector<EpochReport> train(ModelState& state, const SessionCorpus& corpus,
                               const TrainConfig& cfg, Rng& rng,
                               const std::function<void(const EpochReport&)>& on_epoch = {});

// Binary little-endian checkpoint. Header: magic "MTDC", version, M, d,
// layer count (u32 each); then each parameter in ModelState::all_params()
// order as u32 name length + name bytes + row-major f64 payload.
void checkpoint_save(ModelState& state, const std::string& path);

// Loads a checkpoint written by checkpoint_save. Optional expectations let
// callers reject a mismatched vocabulary or embedding size up front; errors
// name the expected and found values. A truncated or malformed file throws
// CheckpointError and yields no state.
ModelState checkpoint_load(const std::string& path,
                           std::optional<int> expect_items = std::nullopt,
                           std::optional<int> expect_dim = std::nullopt);

}  // namespace mtd
