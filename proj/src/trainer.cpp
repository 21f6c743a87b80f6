#include "mtd/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mtd/error.hpp"
#include "mtd/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace mtd {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check_finite(double loss, const char* phase, int epoch, int step) {
    if (!std::isfinite(loss)) {
        throw NumericError(std::string("non-finite loss in ") + phase + " phase, epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
    }
}

}  // namespace

double graph_phase_step(ModelState& state, const SparseAdjacency& adj,
                        const TrainConfig& cfg, Rng& rng) {
    auto params = state.graph_params();
    for (ParamTensor* p : params) p->zero_grad();
    const double loss = mi_loss_sampled(adj, state, rng, /*with_grad=*/true);
    for (ParamTensor* p : params) l2_regularize(*p, cfg.lambda2);
    const AdamConfig adam = cfg.adam_config();
    for (ParamTensor* p : params) adam_step(*p, adam);
    return loss;
}

void sync_item_table(ModelState& state, const SparseAdjacency& adj) {
    state.item_table.value = gcn_forward(adj, state.item_table.value, state.graph);
}

EpochReport train_epoch(ModelState& state, std::span<const Instance> instances,
                        const SparseAdjacency* adj, const TrainConfig& cfg, Rng& rng) {
    EpochReport report;

    if (!cfg.disable_graph) {
        if (adj == nullptr) throw DataError("train_epoch: graph phase enabled but no adjacency");
        const auto t0 = Clock::now();
        report.graph_loss = graph_phase_step(state, *adj, cfg, rng);
        check_finite(report.graph_loss, "graph", report.epoch, 0);
        sync_item_table(state, *adj);
        report.graph_ms = ms_since(t0);
        report.graph_steps = 1;
    }

    const auto t1 = Clock::now();
    auto intra_params = state.intra_params();
    const AdamConfig adam = cfg.adam_config();
    const IntraConfig icfg = cfg.intra_config();
    // Zero gradient scale: losses are still reported but no step is taken.
    const bool step_enabled = cfg.lambda1 != 0.0 || cfg.lambda2 != 0.0;

    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double loss_sum = 0.0;
    int batches = 0;
    std::vector<Instance> batch;
    for (int pass = 0; pass < cfg.freq; ++pass) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(instances[order[i]]);
            }
            for (ParamTensor* p : intra_params) p->zero_grad();
            const double loss =
                intra_loss(batch, state, icfg, &rng, /*with_grad=*/step_enabled, cfg.lambda1);
            check_finite(loss, "intra", report.epoch, batches);
            loss_sum += loss;
            ++batches;
            if (step_enabled) {
                for (ParamTensor* p : intra_params) l2_regularize(*p, cfg.lambda2);
                for (ParamTensor* p : intra_params) adam_step(*p, adam);
            }
            ++report.intra_steps;
        }
    }
    report.intra_loss = batches > 0 ? loss_sum / batches : 0.0;
    report.intra_ms = ms_since(t1);
    return report;
}

std::vector<EpochReport> train(ModelState& state, const SessionCorpus& corpus,
                               const TrainConfig& cfg, Rng& rng,
                               const std::function<void(const EpochReport&)>& on_epoch) {
    const std::vector<Instance> instances = make_instances(corpus);
    if (instances.empty()) throw DataError("train: corpus produced no instances");

    std::optional<SparseAdjacency> adj;
    if (!cfg.disable_graph) adj = SparseAdjacency::from_corpus(corpus);

    std::vector<EpochReport> reports;
    reports.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochReport r = train_epoch(state, instances, adj ? &*adj : nullptr, cfg, rng);
        r.epoch = e;
        reports.push_back(r);
        if (on_epoch) on_epoch(r);
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'T', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

std::uint32_t take_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw CheckpointError("checkpoint truncated");
    std::uint32_t v = 0;
    std::memcpy(&v, in.data() + pos, 4);
    pos += 4;
    return v;
}

}  // namespace

void checkpoint_save(ModelState& state, const std::string& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(state.item_count));
    put_u32(out, static_cast<std::uint32_t>(state.dim));
    put_u32(out, static_cast<std::uint32_t>(state.gcn_layers));
    for (ParamTensor* p : state.all_params()) {
        put_u32(out, static_cast<std::uint32_t>(p->name.size()));
        out.append(p->name);
        const std::size_t bytes = p->value.data.size() * sizeof(double);
        const std::size_t off = out.size();
        out.resize(off + bytes);
        std::memcpy(out.data() + off, p->value.data.data(), bytes);
    }
    write_file_atomic(path, out);
}

ModelState checkpoint_load(const std::string& path,
                           std::optional<int> expect_items,
                           std::optional<int> expect_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on checkpoint: " + path);

    std::size_t pos = 0;
    if (blob.size() < 4 || std::memcmp(blob.data(), kMagic, 4) != 0) {
        throw CheckpointError("bad checkpoint magic in " + path);
    }
    pos = 4;
    const std::uint32_t version = take_u32(blob, pos);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kVersion) + ")");
    }
    const int items = static_cast<int>(take_u32(blob, pos));
    const int dim = static_cast<int>(take_u32(blob, pos));
    const int layers = static_cast<int>(take_u32(blob, pos));
    if (items < 1 || dim < 1 || layers < 1 || layers > 3) {
        throw CheckpointError("checkpoint header has implausible sizes");
    }
    if (expect_items && *expect_items != items) {
        throw CheckpointError("checkpoint item count mismatch: expected M=" +
                              std::to_string(*expect_items) + ", found M=" + std::to_string(items));
    }
    if (expect_dim && *expect_dim != dim) {
        throw CheckpointError("checkpoint dimension mismatch: expected d=" +
                              std::to_string(*expect_dim) + ", found d=" + std::to_string(dim));
    }

    Rng scratch(0);  // values are overwritten below
    ModelState state = ModelState::init(items, dim, layers, scratch);
    for (ParamTensor* p : state.all_params()) {
        const std::uint32_t name_len = take_u32(blob, pos);
        if (pos + name_len > blob.size()) throw CheckpointError("checkpoint truncated");
        const std::string name(blob.data() + pos, name_len);
        pos += name_len;
        if (name != p->name) {
            throw CheckpointError("checkpoint parameter order mismatch: expected '" + p->name +
                                  "', found '" + name + "'");
        }
        const std::size_t bytes = p->value.data.size() * sizeof(double);
        if (pos + bytes > blob.size()) throw CheckpointError("checkpoint truncated");
        std::memcpy(p->value.data.data(), blob.data() + pos, bytes);
        pos += bytes;
        if (!p->value.all_finite()) {
            throw CheckpointError("checkpoint parameter '" + p->name + "' has non-finite entries");
        }
    }
    if (pos != blob.size()) throw CheckpointError("trailing bytes in checkpoint " + path);
    return state;
}

}  // namespace mtd
