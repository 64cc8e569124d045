// Command-line workbench: synth -> train -> score -> eval -> report.
// Exit codes: 0 success, 1 usage, 2 data error, 3 training error.

#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "wifid/config.hpp"
#include "wifid/detectors.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTrain = 3;

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

wifid::Config load_config(const CommonOpts& c) {
    return c.config_path.empty() ? wifid::Config{} : wifid::Config::load(c.config_path);
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

wifid::DatasetSpec dataset_spec_from(const wifid::Config& cfg, std::uint64_t seed) {
    wifid::DatasetSpec spec;
    spec.n_mod = int(cfg.integer("dataset.n_mod", spec.n_mod));
    spec.n_sir_bins = int(cfg.integer("dataset.n_sir_bins", spec.n_sir_bins));
    spec.n_batches = int(cfg.integer("dataset.n_batches", spec.n_batches));
    spec.batch_size = int(cfg.integer("dataset.batch_size", spec.batch_size));
    if (cfg.has("dataset.sir_grid_db")) {
        spec.sir_grid_db = parse_grid(cfg.str("dataset.sir_grid_db"));
        spec.n_sir_bins = int(spec.sir_grid_db.size());
    } else if (spec.n_sir_bins != int(spec.sir_grid_db.size())) {
        spec.sir_grid_db.resize(spec.n_sir_bins);
        for (int i = 0; i < spec.n_sir_bins; ++i) spec.sir_grid_db[i] = 3.0 * i;
    }
    if (cfg.has("dataset.snr_db")) {
        auto v = parse_grid(cfg.str("dataset.snr_db"));
        if (v.size() != spec.snr_db.size())
            throw std::runtime_error("config: dataset.snr_db needs exactly 4 values");
        std::copy(v.begin(), v.end(), spec.snr_db.begin());
    }
    spec.base_seed = seed;
    return spec;
}

wifid::ArchConfig arch_from(const wifid::Config& cfg) {
    wifid::ArchConfig a;
    a.backbone_channels = int(cfg.integer("arch.backbone_channels", a.backbone_channels));
    a.n_res_blocks = int(cfg.integer("arch.n_res_blocks", a.n_res_blocks));
    a.head_hidden = int(cfg.integer("arch.head_hidden", a.head_hidden));
    a.embed_dim = int(cfg.integer("arch.embed_dim", a.embed_dim));
    a.ar_channels = int(cfg.integer("arch.ar_channels", a.ar_channels));
    a.ar_levels = int(cfg.integer("arch.ar_levels", a.ar_levels));
    a.vae_latent = int(cfg.integer("arch.vae_latent", a.vae_latent));
    a.vae_channels = int(cfg.integer("arch.vae_channels", a.vae_channels));
    a.dropout = float(cfg.real("arch.dropout", a.dropout));
    return a;
}

int fail(int code, const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    return code;
}

// ---- synth ----

int cmd_synth(const CommonOpts& common, const std::string& kind_str,
              const std::string& interferer_str, bool channel, std::string out,
              std::string manifest) {
    wifid::Config cfg = load_config(common);
    const std::uint64_t seed =
        common.seed_set ? common.seed : cfg.u64("dataset.seed", 0);

    wifid::DatasetKind kind;
    if (kind_str == "din") {
        kind = wifid::DatasetKind::din();
    } else if (kind_str == "dout-oe") {
        kind = wifid::DatasetKind::dout_oe();
    } else if (kind_str == "dout-test") {
        if (interferer_str.empty())
            return fail(kExitUsage, "synth: --kind dout-test requires --interferer");
        wifid::InterfererKind ik;
        if (interferer_str == "dsss") ik = wifid::InterfererKind::Dsss;
        else if (interferer_str == "ofdm") ik = wifid::InterfererKind::Ofdm;
        else return fail(kExitUsage, "synth: --interferer must be dsss or ofdm");
        kind = wifid::DatasetKind::dout_test(ik, channel);
    } else {
        return fail(kExitUsage, "synth: unknown --kind '" + kind_str + "'");
    }

    const wifid::DatasetSpec spec = dataset_spec_from(cfg, seed);
    wifid::Dataset ds = wifid::generate(spec, kind);
    if (out.empty()) out = kind.name() + ".wds";
    wifid::write_dataset(ds, out);
    if (manifest.empty())
        manifest = (std::filesystem::path(out).parent_path() / "manifest.tsv").string();
    wifid::append_manifest(manifest, out, ds);

    double power = 0.0;
    for (const auto& ex : ds.examples) power += wifid::avg_power(ex.iq);
    power /= double(ds.examples.size());
    std::cout << "wrote " << out << ": " << kind.name() << " dims [" << spec.n_mod << ","
              << spec.n_sir_bins << "," << spec.n_batches << "," << spec.batch_size
              << "]x[" << spec.block_size() << ",2], seed=" << seed << "\n";
    std::cout << "  sir_grid_db:";
    for (double v : spec.sir_grid_db) std::cout << " " << v;
    std::cout << "\n  snr_db:";
    for (double v : spec.snr_db) std::cout << " " << v;
    std::cout << "\n  mean example power: " << power << "\n";
    return 0;
}

// ---- train ----

int cmd_train(const CommonOpts& common, const std::string& model_str, bool oe,
              const std::string& din_path, const std::string& dout_oe_path,
              std::string out, const std::string& resume_path,
              const std::string& log_path) {
    wifid::Config cfg = load_config(common);
    wifid::ModelKind kind;
    try {
        kind = wifid::model_kind_from_name(model_str);
    } catch (const std::exception& e) {
        return fail(kExitUsage, e.what());
    }

    if (oe && dout_oe_path.empty())
        return fail(kExitUsage, "train: --oe requires --dout-oe");

    wifid::Dataset din;
    wifid::Dataset dout_oe;
    wifid::Checkpoint resume_ck;
    try {
        din = wifid::read_dataset(din_path);
        if (oe) dout_oe = wifid::read_dataset(dout_oe_path);
        if (!resume_path.empty()) resume_ck = wifid::read_checkpoint(resume_path);
    } catch (const std::exception& e) {
        return fail(kExitData, e.what());
    }

    wifid::TrainConfig tc;
    tc.seed = common.seed_set ? common.seed : cfg.u64("train.seed", 1);
    tc.epochs = int(cfg.integer("train.epochs", tc.epochs));
    tc.batch_size = int(cfg.integer("train.batch_size", tc.batch_size));
    tc.lr = float(cfg.real("train.lr", tc.lr));
    tc.beta = float(cfg.real("train.beta", tc.beta));
    tc.alpha = float(cfg.real("train.alpha", tc.alpha));
    tc.margin = float(cfg.real("train.margin", tc.margin));
    tc.max_examples_per_epoch =
        int(cfg.integer("train.max_examples_per_epoch", tc.max_examples_per_epoch));
    tc.oe.enabled = oe;
    tc.oe.lambda = float(cfg.real("train.oe_lambda", tc.oe.lambda));
    tc.oe.oe_batch_fraction =
        float(cfg.real("train.oe_batch_fraction", tc.oe.oe_batch_fraction));
    if (!resume_path.empty()) tc.resume = &resume_ck;

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log) return fail(kExitData, "train: cannot open log " + log_path);
        tc.log = &log;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        auto det = wifid::train_detector(kind, din, oe ? &dout_oe : nullptr,
                                         arch_from(cfg), tc);
        const double secs = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0).count();
        if (out.empty())
            out = model_str + (oe ? "-oe" : "") + ".ckpt";
        wifid::save_detector(out, *det, tc);
        if (tc.log)
            (*tc.log) << model_str << " done steps=" << det->train_steps
                      << " wall_s=" << secs << "\n";
        std::cout << "wrote " << out << ": " << model_str << (oe ? " (OE)" : "")
                  << ", " << det->param_count() << " params, " << det->train_steps
                  << " steps, " << secs << " s\n";
    } catch (const std::exception& e) {
        return fail(kExitTrain, e.what());
    }
    return 0;
}

// ---- score ----

int cmd_score(const std::string& ckpt_path, const std::string& ds_path, std::string out) {
    try {
        auto det = wifid::load_detector(ckpt_path);
        wifid::Dataset ds = wifid::read_dataset(ds_path);
        wifid::ScoreTable table = wifid::score_dataset(*det, ds);
        if (out.empty()) out = ds.kind.name() + "." + table.model + ".scores";
        wifid::write_score_table(table, out);
        std::cout << "wrote " << out << ": " << table.total() << " scores, model="
                  << table.model << " oe=" << (table.oe ? 1 : 0) << " dataset="
                  << table.dataset << "\n";
    } catch (const std::exception& e) {
        return fail(kExitData, e.what());
    }
    return 0;
}

// ---- eval ----

int cmd_eval(const std::string& din_scores, const std::string& dout_scores,
             std::string out) {
    try {
        wifid::ScoreTable din = wifid::read_score_table(din_scores);
        wifid::ScoreTable dout = wifid::read_score_table(dout_scores);
        wifid::AurocGrid grid = wifid::evaluate_experiment(din, dout);
        if (out.empty()) out = dout.dataset + "." + dout.model + ".grid.csv";
        wifid::write_grid_csv(grid, out);
        double acc = 0.0;
        for (double v : grid.values) acc += v;
        std::cout << "wrote " << out << ": " << grid.n_mod << "x" << grid.n_sir_bins
                  << " grid, mean AUROC " << acc / double(grid.values.size()) << "\n";
    } catch (const std::exception& e) {
        return fail(kExitData, e.what());
    }
    return 0;
}

// ---- report ----

int cmd_report(const std::vector<std::string>& grid_paths, const std::string& out) {
    try {
        std::ostringstream rep;
        rep.precision(4);
        rep << std::fixed;
        for (const auto& path : grid_paths) {
            wifid::AurocGrid g = wifid::read_grid_csv(path);
            double total = 0.0;
            rep << path << " (" << g.n_mod << "x" << g.n_sir_bins << ")\n";
            for (int m = 0; m < g.n_mod; ++m) {
                rep << "  mod " << m << ":";
                for (int s = 0; s < g.n_sir_bins; ++s) {
                    rep << " " << g.at(m, s);
                    total += g.at(m, s);
                }
                rep << "\n";
            }
            rep << "  mean AUROC: " << total / double(g.values.size()) << "\n";
        }
        if (out.empty()) {
            std::cout << rep.str();
        } else {
            std::ofstream f(out, std::ios::trunc);
            if (!f) throw std::runtime_error("report: cannot open " + out);
            f << rep.str();
            std::cout << "wrote " << out << "\n";
        }
    } catch (const std::exception& e) {
        return fail(kExitData, e.what());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDM interference detection workbench"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "key=value config file");
    app.add_flag_callback("--version", [] { std::cout << "wifid 1.0\n"; std::exit(0); });
    auto add_seed = [&common](CLI::App* sub) {
        sub->add_option_function<std::uint64_t>("--seed", [&common](std::uint64_t s) {
            common.seed = s;
            common.seed_set = true;
        }, "base RNG seed (overrides config)");
    };

    auto* synth = app.add_subcommand("synth", "synthesize a dataset file");
    std::string kind_str, interferer_str, out, manifest;
    bool channel = false;
    synth->add_option("--kind", kind_str, "din | dout-oe | dout-test")->required();
    synth->add_option("--interferer", interferer_str, "dsss | ofdm (dout-test only)");
    synth->add_flag("--channel", channel, "pass interferer through the multipath channel");
    synth->add_option("--out", out, "output dataset path");
    synth->add_option("--manifest", manifest, "manifest file (appended)");
    add_seed(synth);

    auto* train = app.add_subcommand("train", "train a detector");
    std::string model_str, din_path, dout_oe_path, train_out, resume_path, log_path;
    bool oe = false;
    train->add_option("--model", model_str, "msp | dml | vae | ar")->required();
    train->add_flag("--oe", oe, "enable outlier exposure");
    train->add_option("--din", din_path, "in-distribution training dataset")->required();
    train->add_option("--dout-oe", dout_oe_path, "outlier-exposure dataset");
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--resume", resume_path, "checkpoint to continue from");
    train->add_option("--log", log_path, "append-only training log");
    add_seed(train);

    auto* score = app.add_subcommand("score", "score a dataset with a checkpoint");
    std::string ckpt_path, score_ds, score_out;
    score->add_option("--ckpt", ckpt_path, "detector checkpoint")->required();
    score->add_option("--dataset", score_ds, "dataset to score")->required();
    score->add_option("--out", score_out, "score table output path");

    auto* eval = app.add_subcommand("eval", "ROC/AUROC grid from two score tables");
    std::string eval_din, eval_dout, eval_out;
    eval->add_option("--din", eval_din, "ID score table")->required();
    eval->add_option("--dout", eval_dout, "OOD score table")->required();
    eval->add_option("--out", eval_out, "grid CSV output path");

    auto* report = app.add_subcommand("report", "pretty-print AUROC grids");
    std::vector<std::string> grid_paths;
    std::string report_out;
    report->add_option("grids", grid_paths, "grid CSV files")->required();
    report->add_option("--out", report_out, "write report to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth->parsed())
            return cmd_synth(common, kind_str, interferer_str, channel, out, manifest);
        if (train->parsed())
            return cmd_train(common, model_str, oe, din_path, dout_oe_path, train_out,
                             resume_path, log_path);
        if (score->parsed()) return cmd_score(ckpt_path, score_ds, score_out);
        if (eval->parsed()) return cmd_eval(eval_din, eval_dout, eval_out);
        if (report->parsed()) return cmd_report(grid_paths, report_out);
    } catch (const std::exception& e) {
        return fail(kExitData, e.what());
    }
    return kExitUsage;
}
