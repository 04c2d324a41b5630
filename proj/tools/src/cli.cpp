// Copyright 2026 The trmoe Authors.
// SPDX-License-Identifier: Apache-2.0

#include "trmoe_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "trmoe/analysis.hpp"
#include "trmoe/checkpoint.hpp"
#include "trmoe/data.hpp"
#include "trmoe/errors.hpp"
#include "trmoe/metrics.hpp"
#include "trmoe/rationale.hpp"
#include "trmoe/report.hpp"
#include "trmoe/sweep.hpp"
#include "trmoe/synth.hpp"
#include "trmoe/trainer.hpp"
#include "trmoe_cli/cli_config.hpp"

namespace trmoe::cli {

namespace {

namespace fs = std::filesystem;

// Flags shared by train, ablate and sweep. Unset optionals keep the config
// file value.
struct TrainFlags {
    std::string config;
    std::string data;
    std::string out;
    std::optional<double> lambda_sep;
    std::string ablation;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<double> lr;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> accum_steps;
    std::optional<std::size_t> eval_every;
    std::optional<double> dropout;

    void attach(CLI::App& app, bool with_ablation) {
        app.add_option("--config", config, "JSON config file (see docs/config.md)");
        app.add_option("--data", data, "dataset JSONL; overrides data.path");
        app.add_option("--out", out, "output directory")->required();
        app.add_option("--lambda-sep", lambda_sep, "separation-loss weight");
        if (with_ablation) app.add_option("--ablation", ablation, "none | no-mtl | no-moe");
        app.add_option("--seed", seed, "model and training seed");
        app.add_option("--steps", steps, "optimisation steps (train.max_steps)");
        app.add_option("--lr", lr, "Adam learning rate");
        app.add_option("--batch-size", batch_size, "examples per microbatch");
        app.add_option("--accum-steps", accum_steps, "microbatches per optimisation step");
        app.add_option("--eval-every", eval_every, "evaluate on the held-out split every N steps");
        app.add_option("--dropout", dropout, "dropout rate");
    }

    CliConfig resolve() const {
        CliConfig c = config.empty() ? CliConfig{} : CliConfig::load(config);
        if (!data.empty()) c.data.path = data;
        if (lambda_sep) c.train.lambda_sep = *lambda_sep;
        if (!ablation.empty()) {
            const auto a = parse_ablation(ablation);
            if (!a) throw ConfigError("--ablation", "expected none, no-mtl or no-moe");
            c.train.ablation = *a;
        }
        if (seed) c.model.seed = c.train.seed = *seed;
        if (steps) c.train.max_steps = *steps;
        if (lr) c.train.lr = *lr;
        if (batch_size) c.train.batch_size = *batch_size;
        if (accum_steps) c.train.accum_steps = *accum_steps;
        if (eval_every) c.train.eval_every = *eval_every;
        if (dropout) c.model.dropout_rate = *dropout;
        // The ablation flag wins over whatever the file says about routing.
        c.model = apply_ablation(c.model, c.train.ablation);
        if (c.data.path.empty()) throw ConfigError("--data", "no dataset given (flag or data.path)");
        c.train.validate();
        return c;
    }
};

std::vector<AnnotatedInstance> load_dataset(const std::string& path, std::ostream& err) {
    if (!fs::exists(path)) throw ConfigError("--data", "no such file: " + path);
    JsonlReport report = load_jsonl(path);
    if (!report.errors.empty()) {
        for (const auto& e : report.errors) err << path << ":" << e.line << ": " << e.message << "\n";
        throw DataError(std::to_string(report.errors.size()) + " malformed line(s) in " + path);
    }
    if (report.instances.empty()) throw DataError("dataset " + path + " is empty");
    return std::move(report.instances);
}

ExperimentData prepare(const CliConfig& c, std::ostream& err) {
    const auto all = load_dataset(c.data.path, err);
    auto [train, eval] = split_holdout(all, c.data.holdout_fraction, c.data.split_seed);
    if (train.empty() || eval.empty()) throw DataError("holdout split leaves an empty train or eval set");
    ExperimentData d;
    d.vocab = Vocabulary::build(vocabulary_texts(train));
    d.train = std::move(train);
    d.eval = std::move(eval);
    return d;
}

void make_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--seeds", "expected a comma-separated list of integers, got \"" + s + "\"");
        }
    }
    if (out.empty()) throw ConfigError("--seeds", "must not be empty");
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--grid", "expected a comma-separated list of numbers, got \"" + s + "\"");
        }
    }
    if (out.empty()) throw ConfigError("--grid", "must not be empty");
    return out;
}

int cmd_gen_data(std::size_t size, std::uint64_t seed, const std::string& out_path, const std::string& backend,
                 const std::string& style, bool fallback, std::size_t timeout_ms, std::ostream& out, std::ostream& err) {
    if (size == 0) throw ConfigError("--size", "must be positive");
    RationaleStyle rs;
    if (style == "appraisal")
        rs = RationaleStyle::Appraisal;
    else if (style == "event")
        rs = RationaleStyle::EventGrounded;
    else
        throw ConfigError("--rationale-style", "expected appraisal or event");
    auto instances = synth_corpus(size, seed);
    if (backend == "offline") {
        RationaleProvider(rs).annotate(instances);
    } else if (backend == "http") {
        HttpRationaleConfig http = HttpRationaleConfig::from_env();
        http.fallback = fallback;
        http.timeout = std::chrono::milliseconds(timeout_ms);
        RationaleProvider provider(http, [&](const std::string& msg) { err << "warning: " << msg << "\n"; });
        provider.annotate(instances);
        if (provider.fallback_events()) err << provider.fallback_events() << " rationale(s) fell back to offline\n";
    } else {
        throw ConfigError("--rationales", "expected offline or http");
    }
    const fs::path p(out_path);
    if (p.has_parent_path()) make_dir(p.parent_path().string());
    write_jsonl(out_path, instances);
    out << "wrote " << instances.size() << " instances to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const TrainFlags& flags, std::ostream& out, std::ostream& err) {
    CliConfig c = flags.resolve();
    const ExperimentData data = prepare(c, err);
    c.model.vocab_size = data.vocab.size();
    c.model.validate();
    make_dir(flags.out);
    const fs::path dir(flags.out);
    write_text_file((dir / "config.echo.json").string(), c.to_json());

    Rng rng(c.model.seed);
    Model model = Model::build(c.model, rng);
    std::size_t dropped = 0;
    const auto examples = build_examples(data.train, data.vocab, &dropped);
    if (dropped) err << "warning: " << dropped << " instance(s) without rationale; REA example dropped\n";

    std::ofstream metrics((dir / "metrics.jsonl").string(), std::ios::binary | std::ios::trunc);
    std::ofstream evals((dir / "eval.jsonl").string(), std::ios::binary | std::ios::trunc);
    if (!metrics || !evals) throw Error("cannot write metrics under " + flags.out);
    TrainHooks hooks;
    hooks.on_step = [&](const StepRecord& r) { metrics << r.to_json() << '\n' << std::flush; };
    hooks.on_eval = [&](std::size_t step) {
        evals << "{\"step\":" << step << ",\"eval\":" << evaluate(model, data.eval, data.vocab).to_json() << "}\n"
              << std::flush;
    };
    TrainResult result;
    try {
        result = train(model, examples, c.train, hooks);
    } catch (const TrainingDiverged& e) {
        err << "error: training diverged: " << e.what() << "\ngate state at failure:\n" << e.gate_dump();
        return kExitRuntime;
    }

    const std::string ckpt = c.train.checkpoint_path.empty() ? (dir / "checkpoint.bin").string()
                                                             : c.train.checkpoint_path;
    save_checkpoint(ckpt, model, {c.train, result.steps, result.rng_state, data.vocab});
    const EvalReport report = evaluate(model, data.eval, data.vocab);
    write_text_file((dir / "eval.json").string(), report.to_json() + "\n");
    if (!c.model.routed_layers.empty()) emit_analysis(RoutingSnapshot::capture(model), (dir / "analysis").string());
    out << report.to_json() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, std::ostream& out, std::ostream& err) {
    const auto instances = load_dataset(data_path, err);
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    out << evaluate(ck.model, instances, ck.meta.vocab).to_json() << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& checkpoint, const std::string& out_dir, std::ostream& out) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    if (ck.model.config().routed_layers.empty())
        throw ConfigError("--checkpoint", "model has no routed layers to analyse");
    const RoutingSnapshot snap = RoutingSnapshot::capture(ck.model);
    const std::string dir = (fs::path(out_dir) / "analysis").string();
    emit_analysis(snap, dir);
    const auto h = routing_entropy(snap);
    out << "entropy pol=" << h[0] << " imp=" << h[1] << " rea=" << h[2]
        << " gate_cosine=" << off_diagonal_mean(gate_similarity_matrix(snap)) << "\nwrote " << dir << "\n";
    return kExitOk;
}

int cmd_ablate(const TrainFlags& flags, const std::string& seeds, std::size_t workers, std::ostream& out,
               std::ostream& err) {
    const CliConfig c = flags.resolve();
    const auto seed_list = parse_seeds(seeds);
    const ExperimentData data = prepare(c, err);
    make_dir(flags.out);
    const fs::path dir(flags.out);
    write_text_file((dir / "config.echo.json").string(), c.to_json());
    const auto rows = run_ablation(c.model, c.train, seed_list, data, workers);
    const std::string csv = ablation_csv(rows);
    write_text_file((dir / "ablation.csv").string(), csv);
    out << csv;
    return kExitOk;
}

int cmd_sweep(const TrainFlags& flags, const std::string& kind, const std::string& grid, const std::string& seeds,
              std::size_t workers, std::ostream& out, std::ostream& err) {
    const CliConfig c = flags.resolve();
    const auto k = parse_sweep_kind(kind);
    if (!k) throw ConfigError("--kind", "expected lambda or experts");
    const auto values = parse_grid(grid);
    const auto seed_list = parse_seeds(seeds);
    const ExperimentData data = prepare(c, err);
    make_dir(flags.out);
    const fs::path dir(flags.out);
    write_text_file((dir / "config.echo.json").string(), c.to_json());
    const auto rows = run_sweep(*k, values, c.model, c.train, seed_list, data, workers);
    const std::string csv = sweep_csv(rows);
    write_text_file((dir / "sweep.csv").string(), csv);
    std::vector<Series> series(4);
    series[0].name = "all_acc";
    series[1].name = "all_f1";
    series[2].name = "isa_acc";
    series[3].name = "gate_cosine";
    for (const auto& r : rows) {
        series[0].y.push_back(r.all_acc_mean);
        series[1].y.push_back(r.all_f1_mean);
        series[2].y.push_back(r.isa_acc_mean);
        series[3].y.push_back(r.gate_cosine_mean);
    }
    write_text_file((dir / "sweep.svg").string(),
                    line_chart_svg(kind + " sweep", *k == SweepKind::Lambda ? "lambda_sep" : "experts per routed layer",
                                   values, series));
    out << csv;
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"trmoe: task-routed mixture-of-experts multi-task training", "trmoe"};
    app.require_subcommand(1);

    // gen-data
    std::size_t size = 600, timeout_ms = 30000;
    std::uint64_t gen_seed = 7;
    std::string gen_out, backend = "offline", style = "appraisal";
    bool fallback = false;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic annotated corpus as JSONL");
    gen->add_option("--size", size, "number of instances");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "output JSONL path")->required();
    gen->add_option("--rationales", backend, "offline | http");
    gen->add_option("--rationale-style", style, "appraisal | event (offline template)");
    gen->add_flag("--fallback", fallback, "use the offline template when the http backend fails");
    gen->add_option("--timeout-ms", timeout_ms, "http request timeout");

    TrainFlags train_flags, ablate_flags, sweep_flags;
    auto* tr = app.add_subcommand("train", "train a model; writes checkpoint, metrics and analysis under --out");
    train_flags.attach(*tr, true);

    std::string checkpoint, eval_data, analyze_out;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint; prints a JSON report");
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--data", eval_data, "dataset JSONL")->required();

    auto* an = app.add_subcommand("analyze", "routing entropy, dominance and similarity as CSV and SVG");
    an->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    an->add_option("--out", analyze_out, "output directory")->required();

    std::string seeds = "1,2,3", kind, grid;
    std::size_t workers = 1;
    auto* ab = app.add_subcommand("ablate", "full model vs no-mtl vs no-moe over several seeds");
    ablate_flags.attach(*ab, false);
    ab->add_option("--seeds", seeds, "comma-separated seeds");
    ab->add_option("--workers", workers, "parallel training runs");

    auto* sw = app.add_subcommand("sweep", "lambda or expert-count sweep over several seeds");
    sweep_flags.attach(*sw, true);
    sw->add_option("--kind", kind, "lambda | experts")->required();
    sw->add_option("--grid", grid, "comma-separated grid values")->required();
    sw->add_option("--seeds", seeds, "comma-separated seeds");
    sw->add_option("--workers", workers, "parallel training runs");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*gen) return cmd_gen_data(size, gen_seed, gen_out, backend, style, fallback, timeout_ms, out, err);
        if (*tr) return cmd_train(train_flags, out, err);
        if (*ev) return cmd_eval(checkpoint, eval_data, out, err);
        if (*an) return cmd_analyze(checkpoint, analyze_out, out);
        if (*ab) return cmd_ablate(ablate_flags, seeds, workers, out, err);
        if (*sw) return cmd_sweep(sweep_flags, kind, grid, seeds, workers, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitInvalid;
}

}  // namespace trmoe::cli
