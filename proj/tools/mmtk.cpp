// mmtk command-line tool: dataset generation, training, tracking, evaluation,
// ablation, gradient checking, and a throughput probe.
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "mmtk/mmtk.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "run configuration file (key=value lines)");
    cmd->add_option("--set", o.sets, "override a config key, e.g. --set steps=200")
        ->type_name("KEY=VALUE");
    cmd->add_option("--seed", o.seed, "override the run seed");
}

mmtk::RunConfig build_config(const CommonOpts& o) {
    mmtk::RunConfig cfg;
    if (!o.config_path.empty()) mmtk::load_config_file(cfg, o.config_path);
    for (const std::string& kv : o.sets) mmtk::apply_config_line(cfg, kv, "--set");
    if (o.seed) cfg.seed = *o.seed;
    mmtk::validate_config(cfg);
    return cfg;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

std::string ablation_table(const std::vector<mmtk::AblationRow>& rows) {
    std::string out = "bins,box_format,query_mode,success_auc,normalized_precision,precision\n";
    for (const mmtk::AblationRow& r : rows) {
        out += std::to_string(r.bins) + "," + mmtk::to_string(r.box_format) + "," +
               mmtk::to_string(r.query_mode) + "," + mmtk::format_double(r.auc) + "," +
               mmtk::format_double(r.norm_precision) + "," + mmtk::format_double(r.precision) + "\n";
    }
    return out;
}

void print_scores(const mmtk::MetricsReport& rep) {
    std::cout << "success_auc=" << mmtk::format_double(rep.auc) << "\n"
              << "precision=" << mmtk::format_double(rep.precision) << "\n"
              << "normalized_precision=" << mmtk::format_double(rep.norm_precision) << "\n";
}

struct GenOpts {
    std::string out;
    std::optional<int> num;
    std::optional<std::string> difficulty;
    std::optional<int> frame_size;
    std::optional<int> length;
};

int run_gen_data(const CommonOpts& common, const GenOpts& g) {
    mmtk::RunConfig cfg = build_config(common);
    if (g.num) cfg.num_sequences = *g.num;
    if (g.difficulty) cfg.difficulty = *g.difficulty;
    if (g.frame_size) cfg.frame_size = *g.frame_size;
    if (g.length) cfg.seq_length = *g.length;
    mmtk::validate_config(cfg);
    auto seqs = mmtk::generate_dataset(cfg.num_sequences, cfg.seed, cfg.difficulty, cfg.frame_size,
                                       cfg.seq_length);
    mmtk::write_dataset(g.out, seqs);
    std::cout << "wrote " << seqs.size() << " sequences to " << g.out << "\n";
    return 0;
}

int run_train(const CommonOpts& common, const std::string& data_dir, const std::string& out_path,
              int log_every) {
    mmtk::RunConfig cfg = build_config(common);
    const std::string data = data_dir.empty() ? cfg.data_dir : data_dir;
    const std::string out = out_path.empty() ? cfg.out : out_path;
    mmtk::require(!data.empty(), "train: --data (or config data_dir) is required");
    mmtk::require(!out.empty(), "train: --out (or config out) is required");

    auto seqs = mmtk::load_dataset(data);
    std::vector<std::string> corpus;
    for (const auto& s : seqs) corpus.push_back(s.caption);
    mmtk::TextVocab vocab = mmtk::build_vocab(corpus);

    mmtk::ParamStore ps;
    mmtk::init_model_params(ps, vocab, cfg);
    mmtk::AdamW opt(mmtk::optim_hyper(cfg));
    std::cout << "training on " << seqs.size() << " sequences, " << ps.scalar_count()
              << " parameters, " << cfg.steps << " steps\n";
    mmtk::train_loop(ps, opt, seqs, cfg, vocab, [&](int step, double loss) {
        if (log_every > 0 && (step % log_every == 0 || step + 1 == cfg.steps))
            std::cout << "step " << step << " loss " << mmtk::format_double(loss) << "\n";
    });
    mmtk::save_checkpoint(ps, vocab, cfg, out);
    std::cout << "saved checkpoint to " << out << "\n";
    return 0;
}

int run_track(const CommonOpts& common, const std::string& ckpt_path, const std::string& seq_dir,
              const std::string& out_path) {
    mmtk::CheckpointData ckpt = mmtk::load_checkpoint(ckpt_path);
    mmtk::RunConfig cfg = ckpt.config;
    for (const std::string& kv : common.sets) mmtk::apply_config_line(cfg, kv, "--set");
    if (common.seed) cfg.seed = *common.seed;
    mmtk::validate_config(cfg);
    mmtk::check_param_shapes(ckpt.params, ckpt.vocab, cfg);

    mmtk::SyntheticSequence seq = mmtk::load_sequence_dir(seq_dir);
    auto boxes = mmtk::track_video(ckpt.params, cfg, ckpt.vocab, seq.frames, seq.caption,
                                   seq.gt.front());
    mmtk::write_boxes(out_path, boxes);
    std::cout << "wrote " << boxes.size() << " boxes to " << out_path << "\n";
    return 0;
}

int run_eval(const CommonOpts& common, const std::string& pred, const std::string& gt,
             const std::string& preds_dir, const std::string& data_dir,
             const std::string& report_path, const std::string& curves_path) {
    mmtk::RunConfig cfg = build_config(common);
    std::vector<mmtk::EvalSequence> evals;
    if (!pred.empty() || !gt.empty()) {
        mmtk::require(!pred.empty() && !gt.empty(), "eval: --pred and --gt go together");
        mmtk::EvalSequence e;
        e.name = "sequence";
        e.pred = mmtk::read_boxes(pred);
        e.gt = mmtk::read_boxes(gt);
        evals.push_back(std::move(e));
    } else {
        mmtk::require(!preds_dir.empty() && !data_dir.empty(),
                      "eval: use --pred/--gt or --preds/--data");
        for (const std::string& dir : mmtk::list_sequence_dirs(data_dir)) {
            mmtk::SyntheticSequence seq = mmtk::load_sequence_dir(dir);
            mmtk::EvalSequence e;
            e.name = seq.name;
            e.attributes = seq.attributes;
            e.gt = seq.gt;
            e.pred = mmtk::read_boxes(preds_dir + "/" + seq.name + ".txt");
            evals.push_back(std::move(e));
        }
    }
    mmtk::MetricsReport rep = mmtk::evaluate_predictions(evals, cfg.precision_px);
    print_scores(rep);
    if (!report_path.empty()) mmtk::write_report(report_path, rep);
    if (!curves_path.empty()) mmtk::write_curves(curves_path, mmtk::success_curve(evals));
    return 0;
}

int run_ablate(const CommonOpts& common, const std::string& data_dir, const std::string& out_path,
               const std::string& bins_csv, const std::string& formats_csv,
               const std::string& modes_csv) {
    mmtk::RunConfig cfg = build_config(common);
    const std::string data = data_dir.empty() ? cfg.data_dir : data_dir;
    mmtk::require(!data.empty(), "ablate: --data (or config data_dir) is required");
    auto seqs = mmtk::load_dataset(data);

    mmtk::AblationAxes axes;
    for (const std::string& b : split_csv(bins_csv))
        axes.bins.push_back(static_cast<int>(mmtk::parse_long(b, "--bins")));
    for (const std::string& f : split_csv(formats_csv))
        axes.formats.push_back(mmtk::box_format_from_string(f));
    for (const std::string& m : split_csv(modes_csv))
        axes.modes.push_back(mmtk::query_mode_from_string(m));

    auto rows = mmtk::run_ablation(cfg, axes, seqs);
    const std::string table = ablation_table(rows);
    if (out_path.empty()) {
        std::cout << table;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        mmtk::require(out.good(), "cannot open '" + out_path + "' for writing");
        out << table;
    }
    return 0;
}

int run_gradcheck(const CommonOpts& common, int samples) {
    mmtk::RunConfig cfg = build_config(common);
    mmtk::GradCheckReport report = mmtk::model_gradient_check(cfg, samples);
    std::string worst;
    for (const auto& e : report.entries)
        if (e.max_rel_err == report.max_rel_err) worst = e.name;
    std::cout << "checked " << report.entries.size() << " parameter groups\n"
              << "max relative error " << mmtk::format_double(report.max_rel_err) << " (" << worst
              << ")\n";
    return report.ok(1e-4) ? 0 : 1;
}

int run_bench_speed(const CommonOpts& common, const std::string& ckpt_path, int num_frames) {
    mmtk::RunConfig cfg;
    mmtk::ParamStore ps;
    mmtk::TextVocab vocab;
    if (!ckpt_path.empty()) {
        mmtk::CheckpointData ckpt = mmtk::load_checkpoint(ckpt_path);
        cfg = ckpt.config;
        ps = std::move(ckpt.params);
        vocab = std::move(ckpt.vocab);
    } else {
        cfg = build_config(common);
        auto seqs = mmtk::generate_dataset(1, cfg.seed, "easy", cfg.frame_size, 1);
        vocab = mmtk::build_vocab({seqs[0].caption});
        mmtk::init_model_params(ps, vocab, cfg);
    }
    mmtk::RunConfig gen = cfg;
    gen.seq_length = std::max(2, num_frames);
    auto seqs = mmtk::generate_dataset(1, cfg.seed + 1, "easy", gen.frame_size, gen.seq_length);
    const auto& seq = seqs[0];

    const auto start = std::chrono::steady_clock::now();
    auto boxes = mmtk::track_video(ps, cfg, vocab, seq.frames, seq.caption, seq.gt.front());
    const auto stop = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(stop - start).count();
    const double tracked = static_cast<double>(boxes.size() - 1);
    std::cout << "tracked " << tracked << " frames in " << mmtk::format_double(secs) << " s\n"
              << "fps=" << mmtk::format_double(tracked / secs) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vision-language tracker with auto-regressive coordinate tokens"};
    app.require_subcommand(1);

    CommonOpts gen_common;
    GenOpts gen_opts;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, gen_common);
    gen->add_option("--out", gen_opts.out, "output dataset directory")->required();
    gen->add_option("--num", gen_opts.num, "number of sequences");
    gen->add_option("--difficulty", gen_opts.difficulty, "easy or hard");
    gen->add_option("--frame-size", gen_opts.frame_size, "square frame size in pixels");
    gen->add_option("--length", gen_opts.length, "frames per sequence");

    CommonOpts train_common;
    std::string train_data, train_out;
    int train_log_every = 50;
    CLI::App* train = app.add_subcommand("train", "train a tracker");
    add_common(train, train_common);
    train->add_option("--data", train_data, "dataset directory");
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--log-every", train_log_every, "status print interval in steps");

    CommonOpts track_common;
    std::string track_ckpt, track_seq, track_out;
    CLI::App* track = app.add_subcommand("track", "track one sequence with a checkpoint");
    add_common(track, track_common);
    track->add_option("--checkpoint", track_ckpt, "checkpoint path")->required();
    track->add_option("--seq", track_seq, "sequence directory")->required();
    track->add_option("--out", track_out, "prediction output file")->required();

    CommonOpts eval_common;
    std::string eval_pred, eval_gt, eval_preds, eval_data, eval_report, eval_curves;
    CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
    add_common(eval, eval_common);
    eval->add_option("--pred", eval_pred, "prediction box file");
    eval->add_option("--gt", eval_gt, "ground-truth box file");
    eval->add_option("--preds", eval_preds, "directory of per-sequence prediction files");
    eval->add_option("--data", eval_data, "dataset directory");
    eval->add_option("--report", eval_report, "write report.json here");
    eval->add_option("--curves", eval_curves, "write curves.csv here");

    CommonOpts ablate_common;
    std::string ablate_data, ablate_out;
    std::string ablate_bins = "50,100,500,1000";
    std::string ablate_formats = "corner,center";
    std::string ablate_modes = "multi-cues,single-cue";
    CLI::App* ablate = app.add_subcommand("ablate", "sweep query/format/bins axes");
    add_common(ablate, ablate_common);
    ablate->add_option("--data", ablate_data, "dataset directory");
    ablate->add_option("--out", ablate_out, "table output file (stdout if omitted)");
    ablate->add_option("--bins", ablate_bins, "comma-separated bin counts");
    ablate->add_option("--formats", ablate_formats, "comma-separated box formats");
    ablate->add_option("--modes", ablate_modes, "comma-separated query modes");

    CommonOpts gc_common;
    int gc_samples = 4;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    add_common(gradcheck, gc_common);
    gradcheck->add_option("--samples", gc_samples, "entries checked per parameter group");

    CommonOpts speed_common;
    std::string speed_ckpt;
    int speed_frames = 100;
    CLI::App* speed = app.add_subcommand("bench-speed", "measure tracking throughput");
    add_common(speed, speed_common);
    speed->add_option("--checkpoint", speed_ckpt, "checkpoint path (fresh init if omitted)");
    speed->add_option("--num-frames", speed_frames, "frames to track");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen_data(gen_common, gen_opts);
        if (train->parsed()) return run_train(train_common, train_data, train_out, train_log_every);
        if (track->parsed()) return run_track(track_common, track_ckpt, track_seq, track_out);
        if (eval->parsed())
            return run_eval(eval_common, eval_pred, eval_gt, eval_preds, eval_data, eval_report,
                            eval_curves);
        if (ablate->parsed())
            return run_ablate(ablate_common, ablate_data, ablate_out, ablate_bins, ablate_formats,
                              ablate_modes);
        if (gradcheck->parsed()) return run_gradcheck(gc_common, gc_samples);
        if (speed->parsed()) return run_bench_speed(speed_common, speed_ckpt, speed_frames);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}
