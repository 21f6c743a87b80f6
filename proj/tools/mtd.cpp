// Command-line front end: data preparation, training, evaluation, baselines,
// and single-session recommendation.
//
// Exit codes: 0 success, 1 usage, 2 data/file problems, 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mtd/baselines.hpp"
#include "mtd/data.hpp"
#include "mtd/error.hpp"
#include "mtd/eval.hpp"
#include "mtd/graph.hpp"
#include "mtd/intra.hpp"
#include "mtd/model.hpp"
#include "mtd/rng.hpp"
#include "mtd/trainer.hpp"

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::vector<int> parse_k_list(const std::string& ks) {
    std::vector<int> out;
    std::stringstream ss(ks);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty()) continue;
        try {
            const int k = std::stoi(part);
            if (k < 1) throw mtd::UsageError("--k values must be >= 1");
            out.push_back(k);
        } catch (const std::invalid_argument&) {
            throw mtd::UsageError("--k expects comma-separated integers, got '" + part + "'");
        } catch (const std::out_of_range&) {
            throw mtd::UsageError("--k value out of range: '" + part + "'");
        }
    }
    if (out.empty()) throw mtd::UsageError("--k list is empty");
    return out;
}

mtd::PositionalMode parse_positional(const std::string& s) {
    if (s == "decay") return mtd::PositionalMode::decay;
    if (s == "raw") return mtd::PositionalMode::raw_ascending;
    throw mtd::UsageError("--positional must be 'decay' or 'raw', got '" + s + "'");
}

std::string positional_name(mtd::PositionalMode mode) {
    return mode == mtd::PositionalMode::decay ? "decay" : "raw";
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct EvalOutputs {
    std::string report_out;
    std::string ranks_out;
};

void emit_metrics(const mtd::MetricReport& report,
                  std::span<const mtd::RankingResult> results,
                  const EvalOutputs& outs) {
    std::cout << mtd::format_metric_table(report);
    const std::string lines = mtd::format_metric_lines(report);
    std::cout << lines;
    if (!outs.report_out.empty()) mtd::write_file_atomic(outs.report_out, lines);
    if (!outs.ranks_out.empty()) {
        mtd::write_file_atomic(outs.ranks_out, mtd::format_rank_csv(results));
    }
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
    std::string input, train_out, test_out, vocab_out;
    double split_frac = 0.9;
    int min_freq = 5;
    int min_len = 2;
};

int cmd_prepare(const PrepareArgs& args) {
    if (args.split_frac <= 0.0 || args.split_frac >= 1.0) {
        throw mtd::UsageError("--split-frac must lie strictly between 0 and 1");
    }
    const mtd::RawSessions raw = mtd::load_corpus(args.input);
    const mtd::SessionCorpus corpus = mtd::build_vocab(raw, args.min_freq, args.min_len);

    const auto boundary = static_cast<std::size_t>(
        static_cast<double>(corpus.sessions.size()) * args.split_frac);
    if (boundary == 0 || boundary == corpus.sessions.size()) {
        throw mtd::DataError("split leaves an empty train or test side (" +
                             std::to_string(corpus.sessions.size()) + " sessions, fraction " +
                             std::to_string(args.split_frac) + ")");
    }
    std::vector<std::vector<int>> train(
        corpus.sessions.begin(), corpus.sessions.begin() + static_cast<std::ptrdiff_t>(boundary));
    std::vector<std::vector<int>> test(
        corpus.sessions.begin() + static_cast<std::ptrdiff_t>(boundary), corpus.sessions.end());
    mtd::save_sessions(args.train_out, train);
    mtd::save_sessions(args.test_out, test);
    const std::string vocab_path =
        args.vocab_out.empty() ? args.train_out + ".vocab" : args.vocab_out;
    mtd::save_vocab(vocab_path, corpus.vocab);

    std::cout << "prepared " << corpus.sessions.size() << " sessions over "
              << corpus.item_count() << " items: " << train.size() << " train, " << test.size()
              << " test\n";
    std::cout << "vocabulary written to " << vocab_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string train_path;
    std::string ckpt_out;
    std::string dump_adjacency_path;
    std::string from_manifest;
    mtd::TrainConfig cfg;
    std::string positional = "decay";
};

json config_to_json(const mtd::TrainConfig& cfg) {
    return json{{"dim", cfg.dim},
                {"lr", cfg.lr},
                {"batch", cfg.batch},
                {"epochs", cfg.epochs},
                {"lambda1", cfg.lambda1},
                {"lambda2", cfg.lambda2},
                {"freq", cfg.freq},
                {"dropout", cfg.dropout},
                {"seed", cfg.seed},
                {"gcn_layers", cfg.gcn_layers},
                {"disable_graph", cfg.disable_graph},
                {"positional", positional_name(cfg.positional)},
                {"max_prefix_len", cfg.max_prefix_len}};
}

mtd::TrainConfig config_from_json(const json& j) {
    mtd::TrainConfig cfg;
    cfg.dim = j.at("dim").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.batch = j.at("batch").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.lambda1 = j.at("lambda1").get<double>();
    cfg.lambda2 = j.at("lambda2").get<double>();
    cfg.freq = j.at("freq").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.gcn_layers = j.at("gcn_layers").get<int>();
    cfg.disable_graph = j.at("disable_graph").get<bool>();
    cfg.positional = parse_positional(j.at("positional").get<std::string>());
    cfg.max_prefix_len = j.at("max_prefix_len").get<int>();
    return cfg;
}

void validate_train_config(const mtd::TrainConfig& cfg) {
    if (cfg.dim < 1) throw mtd::UsageError("--dim must be positive");
    if (cfg.lr <= 0.0) throw mtd::UsageError("--lr must be positive");
    if (cfg.batch < 1) throw mtd::UsageError("--batch must be positive");
    if (cfg.epochs < 1) throw mtd::UsageError("--epochs must be positive");
    if (cfg.freq < 1) throw mtd::UsageError("--freq must be >= 1");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw mtd::UsageError("--dropout must lie in [0, 1)");
    }
    if (cfg.gcn_layers < 1 || cfg.gcn_layers > 3) {
        throw mtd::UsageError("--gcn-layers must be in 1..3");
    }
    if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0) {
        throw mtd::UsageError("loss weights must be nonnegative");
    }
    if (cfg.max_prefix_len < 1) throw mtd::UsageError("--max-prefix-len must be positive");
}

int cmd_train(TrainArgs& args) {
    if (!args.from_manifest.empty()) {
        std::ifstream in(args.from_manifest);
        if (!in) throw mtd::IoError("cannot open manifest: " + args.from_manifest);
        json manifest = json::parse(in);
        args.cfg = config_from_json(manifest.at("config"));
        args.train_path = manifest.at("inputs").at("train").get<std::string>();
        if (args.ckpt_out.empty()) {
            args.ckpt_out = manifest.at("outputs").at("checkpoint").get<std::string>();
        }
    } else {
        args.cfg.positional = parse_positional(args.positional);
    }
    validate_train_config(args.cfg);

    const mtd::RawSessions raw = mtd::load_corpus(args.train_path);
    // The input is expected to be prepared already; remap only, no filtering.
    const mtd::SessionCorpus corpus = mtd::build_vocab(raw, 1, 2);
    const std::vector<mtd::Instance> instances = mtd::make_instances(corpus);
    std::cout << "corpus: " << corpus.sessions.size() << " sessions, " << corpus.item_count()
              << " items, " << instances.size() << " instances\n";

    std::optional<mtd::SparseAdjacency> adj;
    if (!args.cfg.disable_graph || !args.dump_adjacency_path.empty()) {
        adj = mtd::SparseAdjacency::from_corpus(corpus);
    }
    if (!args.dump_adjacency_path.empty()) {
        mtd::dump_adjacency(*adj, args.dump_adjacency_path);
        std::cout << "adjacency (" << adj->entry_count() << " entries) dumped to "
                  << args.dump_adjacency_path << "\n";
    }

    mtd::Rng rng(args.cfg.seed);
    mtd::ModelState state =
        mtd::ModelState::init(corpus.item_count(), args.cfg.dim, args.cfg.gcn_layers, rng);

    for (int epoch = 0; epoch < args.cfg.epochs; ++epoch) {
        mtd::EpochReport rep = mtd::train_epoch(
            state, instances, args.cfg.disable_graph ? nullptr : &*adj, args.cfg, rng);
        rep.epoch = epoch;
        char line[160];
        if (args.cfg.disable_graph) {
            std::snprintf(line, sizeof(line), "epoch %3d  intra_loss %.6f  (%.1f ms)\n",
                          epoch, rep.intra_loss, rep.intra_ms);
        } else {
            std::snprintf(line, sizeof(line),
                          "epoch %3d  graph_loss %.6f (%.1f ms)  intra_loss %.6f (%.1f ms)\n",
                          epoch, rep.graph_loss, rep.graph_ms, rep.intra_loss, rep.intra_ms);
        }
        std::cout << line << std::flush;
    }

    mtd::checkpoint_save(state, args.ckpt_out);
    mtd::save_vocab(args.ckpt_out + ".vocab", corpus.vocab);

    const json cfg_json = config_to_json(args.cfg);
    char run_id[64];
    std::snprintf(run_id, sizeof(run_id), "%s-%08llx", utc_timestamp().c_str(),
                  static_cast<unsigned long long>(
                      fnv1a(cfg_json.dump() + args.train_path) & 0xffffffffULL));
    json manifest;
    manifest["run_id"] = run_id;
    manifest["command"] = "train";
    manifest["config"] = cfg_json;
    manifest["inputs"] = {{"train", args.train_path}};
    manifest["outputs"] = {{"checkpoint", args.ckpt_out},
                           {"vocabulary", args.ckpt_out + ".vocab"}};
    mtd::write_file_atomic(args.ckpt_out + ".manifest.json", manifest.dump(2) + "\n");

    std::cout << "checkpoint written to " << args.ckpt_out << " (run " << run_id << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct LoadedModel {
    mtd::ModelState state;
    mtd::Vocab vocab;
};

LoadedModel load_model(const std::string& ckpt_path) {
    LoadedModel m{mtd::checkpoint_load(ckpt_path), mtd::load_vocab(ckpt_path + ".vocab")};
    if (m.vocab.size() != m.state.item_count) {
        throw mtd::CheckpointError(
            "vocabulary mismatch: checkpoint has M=" + std::to_string(m.state.item_count) +
            " items, vocabulary has M=" + std::to_string(m.vocab.size()));
    }
    return m;
}

std::vector<mtd::RankingResult> rank_with_model(const LoadedModel& model,
                                                std::span<const mtd::Instance> instances,
                                                int k_max, mtd::PositionalMode positional) {
    mtd::IntraConfig cfg;
    cfg.positional = positional;
    std::vector<mtd::RankingResult> results;
    results.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const mtd::SessionEncoding enc =
            mtd::encode_session(instances[i].prefix, model.state, cfg, nullptr);
        const std::vector<double> scores =
            mtd::score_items(enc.session, model.state.item_table.value);
        results.push_back(
            mtd::rank_instance(scores, instances[i].target, k_max, static_cast<int>(i)));
    }
    return results;
}

int cmd_eval(const std::string& ckpt, const std::string& test_path, const std::string& k_list,
             const std::string& positional, const EvalOutputs& outs) {
    const std::vector<int> ks = parse_k_list(k_list);
    LoadedModel model = load_model(ckpt);
    const int k_max = *std::max_element(ks.begin(), ks.end());
    if (k_max > model.state.item_count) {
        throw mtd::UsageError("--k " + std::to_string(k_max) + " exceeds vocabulary size " +
                              std::to_string(model.state.item_count));
    }

    const mtd::RawSessions raw = mtd::load_corpus(test_path);
    const std::vector<mtd::Instance> instances = mtd::apply_vocab(raw, model.vocab);
    if (instances.empty()) {
        throw mtd::DataError("no evaluable instances: every test session is unknown or too short");
    }
    std::cout << "evaluating " << instances.size() << " instances over "
              << model.state.item_count << " items\n";

    const auto results = rank_with_model(model, instances, k_max, parse_positional(positional));
    emit_metrics(mtd::compute_metrics(results, ks), results, outs);
    return 0;
}

// ---------------------------------------------------------------------------
// recommend
// ---------------------------------------------------------------------------

int cmd_recommend(const std::string& ckpt, const std::string& session, int topk,
                  const std::string& positional) {
    LoadedModel model = load_model(ckpt);

    std::vector<int> prefix;
    std::istringstream ss(session);
    std::string token_str;
    while (ss >> token_str) {
        mtd::Token token = 0;
        try {
            token = std::stoll(token_str);
        } catch (const std::exception&) {
            throw mtd::UsageError("--session tokens must be integers, got '" + token_str + "'");
        }
        const int id = model.vocab.encode(token);
        if (id < 0) {
            std::cerr << "warning: unknown item token " << token << " dropped\n";
        } else {
            prefix.push_back(id);
        }
    }
    if (prefix.empty()) {
        throw mtd::UsageError("no known items remain in --session; cannot recommend");
    }
    if (topk < 1) throw mtd::UsageError("--topk must be positive");
    topk = std::min(topk, model.state.item_count);

    mtd::IntraConfig cfg;
    cfg.positional = parse_positional(positional);
    const mtd::SessionEncoding enc = mtd::encode_session(prefix, model.state, cfg, nullptr);
    const std::vector<double> scores = mtd::score_items(enc.session, model.state.item_table.value);
    const mtd::RankingResult ranked = mtd::rank_instance(scores, 0, topk);

    for (int i = 0; i < topk; ++i) {
        const int id = ranked.topk[static_cast<std::size_t>(i)];
        char line[64];
        std::snprintf(line, sizeof(line), "%lld\t%.6f\n",
                      static_cast<long long>(model.vocab.decode(id)),
                      scores[static_cast<std::size_t>(id)]);
        std::cout << line;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

int cmd_baseline(const std::string& method, const std::string& train_path,
                 const std::string& test_path, const std::string& k_list, int knn_k,
                 const EvalOutputs& outs) {
    if (method != "pop" && method != "spop" && method != "itemknn") {
        throw mtd::UsageError("unknown --method '" + method + "'; expected pop, spop or itemknn");
    }
    const std::vector<int> ks = parse_k_list(k_list);

    const mtd::SessionCorpus corpus = mtd::build_vocab(mtd::load_corpus(train_path), 1, 2);
    const int k_max = *std::max_element(ks.begin(), ks.end());
    if (k_max > corpus.item_count()) {
        throw mtd::UsageError("--k " + std::to_string(k_max) + " exceeds vocabulary size " +
                              std::to_string(corpus.item_count()));
    }
    const std::vector<mtd::Instance> instances =
        mtd::apply_vocab(mtd::load_corpus(test_path), corpus.vocab);
    if (instances.empty()) {
        throw mtd::DataError("no evaluable instances: every test session is unknown or too short");
    }

    std::function<std::vector<double>(std::span<const int>)> scorer;
    mtd::PopModel pop;
    mtd::SPopModel spop;
    mtd::ItemKnnModel knn;
    if (method == "pop") {
        pop = mtd::PopModel::fit(corpus);
        scorer = [&pop](std::span<const int> p) { return pop.scores(p); };
    } else if (method == "spop") {
        spop = mtd::SPopModel::fit(corpus);
        scorer = [&spop](std::span<const int> p) { return spop.scores(p); };
    } else {
        knn = mtd::ItemKnnModel::fit(corpus);
        scorer = [&knn, knn_k](std::span<const int> p) { return knn.scores(p, knn_k); };
    }

    std::vector<mtd::RankingResult> results;
    results.reserve(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        results.push_back(mtd::rank_instance(scorer(instances[i].prefix), instances[i].target,
                                             k_max, static_cast<int>(i)));
    }
    std::cout << "method " << method << ": " << instances.size() << " instances over "
              << corpus.item_count() << " items\n";
    emit_metrics(mtd::compute_metrics(results, ks), results, outs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"session-based next-item recommender"};
    app.require_subcommand(1);
    app.set_config("--config", "", "optional key=value defaults file; flags override");

    // prepare
    PrepareArgs prep;
    CLI::App* prepare = app.add_subcommand("prepare", "filter, remap and split a raw corpus");
    prepare->add_option("--input", prep.input, "raw corpus file")->required();
    prepare->add_option("--train-out", prep.train_out, "train split output")->required();
    prepare->add_option("--test-out", prep.test_out, "test split output")->required();
    prepare->add_option("--vocab-out", prep.vocab_out,
                        "vocabulary dump (default <train-out>.vocab)");
    prepare->add_option("--split-frac", prep.split_frac, "fraction of sessions for training");
    prepare->add_option("--min-freq", prep.min_freq, "minimum item frequency");
    prepare->add_option("--min-len", prep.min_len, "minimum session length");

    // train
    TrainArgs targs;
    CLI::App* train = app.add_subcommand("train", "train a model on a prepared corpus");
    auto* opt_train = train->add_option("--train", targs.train_path, "prepared train file");
    train->add_option("--ckpt-out", targs.ckpt_out, "checkpoint output path");
    auto* opt_dim = train->add_option("--dim", targs.cfg.dim, "embedding dimension");
    auto* opt_lr = train->add_option("--lr", targs.cfg.lr, "Adam learning rate");
    auto* opt_batch = train->add_option("--batch", targs.cfg.batch, "mini-batch size");
    auto* opt_epochs = train->add_option("--epochs", targs.cfg.epochs, "training epochs");
    auto* opt_l1 = train->add_option("--lambda1", targs.cfg.lambda1, "intra objective weight");
    auto* opt_l2 = train->add_option("--lambda2", targs.cfg.lambda2, "L2 penalty");
    auto* opt_freq = train->add_option("--freq", targs.cfg.freq, "intra passes per epoch");
    auto* opt_drop = train->add_option("--dropout", targs.cfg.dropout, "dropout probability");
    auto* opt_layers =
        train->add_option("--gcn-layers", targs.cfg.gcn_layers, "propagation layers (1..3)");
    auto* opt_seed = train->add_option("--seed", targs.cfg.seed, "RNG seed");
    auto* opt_nograph = train->add_flag("--no-graph", targs.cfg.disable_graph,
                                        "disable the cross-session graph phase");
    auto* opt_pos =
        train->add_option("--positional", targs.positional, "positional weighting: decay or raw");
    auto* opt_maxlen = train->add_option("--max-prefix-len", targs.cfg.max_prefix_len,
                                         "keep only the most recent items beyond this length");
    train->add_option("--dump-adjacency", targs.dump_adjacency_path,
                      "write the normalized adjacency as 'i j value' lines");
    train->add_option("--from-manifest", targs.from_manifest,
                      "re-run training from a manifest written by a previous run");

    // eval
    std::string eval_ckpt, eval_test, eval_k = "10,20", eval_pos = "decay";
    EvalOutputs eval_outs;
    CLI::App* eval = app.add_subcommand("eval", "compute Pre@K / MRR@K on a test file");
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--test", eval_test, "prepared test file")->required();
    eval->add_option("--k", eval_k, "comma-separated K list");
    eval->add_option("--positional", eval_pos, "positional weighting used at training time");
    eval->add_option("--report-out", eval_outs.report_out, "write metric lines to this file");
    eval->add_option("--ranks-out", eval_outs.ranks_out, "write per-instance ranks as CSV");

    // recommend
    std::string rec_ckpt, rec_session, rec_pos = "decay";
    int rec_topk = 10;
    CLI::App* recommend = app.add_subcommand("recommend", "rank items for one session");
    recommend->add_option("--ckpt", rec_ckpt, "checkpoint path")->required();
    recommend->add_option("--session", rec_session, "whitespace-separated item tokens")
        ->required();
    recommend->add_option("--topk", rec_topk, "list length");
    recommend->add_option("--positional", rec_pos, "positional weighting used at training time");

    // baseline
    std::string base_method, base_train, base_test, base_k = "10,20";
    int base_knn_k = 0;
    EvalOutputs base_outs;
    CLI::App* baseline = app.add_subcommand("baseline", "evaluate a reference ranker");
    baseline->add_option("--method", base_method, "pop, spop or itemknn")->required();
    baseline->add_option("--train", base_train, "prepared train file")->required();
    baseline->add_option("--test", base_test, "prepared test file")->required();
    baseline->add_option("--k", base_k, "comma-separated K list");
    baseline->add_option("--knn-k", base_knn_k, "itemknn neighbor cutoff (0 = all)");
    baseline->add_option("--report-out", base_outs.report_out, "write metric lines to this file");
    baseline->add_option("--ranks-out", base_outs.ranks_out, "write per-instance ranks as CSV");

    try {
        app.parse(argc, argv);

        if (prepare->parsed()) return cmd_prepare(prep);
        if (train->parsed()) {
            if (!targs.from_manifest.empty()) {
                const std::vector<const CLI::Option*> fixed = {
                    opt_dim, opt_lr, opt_batch, opt_epochs, opt_l1,  opt_l2,    opt_freq,
                    opt_drop, opt_layers, opt_seed, opt_pos, opt_maxlen, opt_nograph};
                for (const CLI::Option* o : fixed) {
                    if (o->count() > 0) {
                        throw mtd::UsageError("--from-manifest replaces training flags; drop " +
                                              o->get_name());
                    }
                }
                if (opt_train->count() > 0) {
                    throw mtd::UsageError("--from-manifest supplies the train file; drop --train");
                }
            } else {
                if (opt_train->count() == 0) throw mtd::UsageError("--train is required");
                if (targs.ckpt_out.empty()) throw mtd::UsageError("--ckpt-out is required");
            }
            return cmd_train(targs);
        }
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_test, eval_k, eval_pos, eval_outs);
        if (recommend->parsed()) return cmd_recommend(rec_ckpt, rec_session, rec_topk, rec_pos);
        if (baseline->parsed()) {
            return cmd_baseline(base_method, base_train, base_test, base_k, base_knn_k, base_outs);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;  // CLI11 prints usage; normalize to exit code 1
    } catch (const mtd::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const mtd::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const mtd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
