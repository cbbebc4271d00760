// Experiment driver: dataset generation, training, sampling, evaluation,
// and ablation sweeps, all steered by one JSON config. Every artifact lands
// under the config's output directory and carries the config hash.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tacs/config.hpp"
#include "tacs/errors.hpp"
#include "tacs/eval.hpp"
#include "tacs/io.hpp"
#include "tacs/parse.hpp"
#include "tacs/tasks.hpp"
#include "tacs/version.hpp"

using nlohmann::json;

namespace tacs {
namespace {

struct Layout {
    std::string root;

    std::string dataset_dir() const { return root + "/dataset"; }
    std::string points() const { return dataset_dir() + "/points.csv"; }
    std::string raw_points() const { return dataset_dir() + "/raw_points.csv"; }
    std::string labels() const { return dataset_dir() + "/labels.csv"; }
    std::string manifest() const { return dataset_dir() + "/manifest.json"; }

    std::string train_dir() const { return root + "/train"; }
    std::string score_ckpt() const { return train_dir() + "/score.ckpt"; }
    std::string score_loss() const { return train_dir() + "/score_loss.csv"; }
    std::string timepred_ckpt() const { return train_dir() + "/timepred.ckpt"; }
    std::string timepred_loss() const { return train_dir() + "/timepred_loss.csv"; }
    std::string timepred_accuracy() const { return train_dir() + "/timepred_accuracy.csv"; }

    std::string samples_dir() const { return root + "/samples"; }
    std::string samples_csv() const { return samples_dir() + "/samples.csv"; }
    std::string samples_bin() const { return samples_dir() + "/samples.bin"; }
    std::string targets_csv() const { return samples_dir() + "/targets.csv"; }
    std::string trajectory_csv() const { return samples_dir() + "/trajectory.csv"; }
    std::string snapshots_bin() const { return samples_dir() + "/trajectory_snapshots.bin"; }
    std::string run_json() const { return samples_dir() + "/run.json"; }

    std::string eval_dir() const { return root + "/eval"; }
    std::string report_json() const { return eval_dir() + "/report.json"; }
    std::string per_sample_csv() const { return eval_dir() + "/per_sample.csv"; }

    std::string sweep_dir() const { return root + "/sweep"; }
};

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed_data, seed_train, seed_sample;
    int jobs = 1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config JSON");
    cmd->add_option("--out", flags.out, "output directory (overrides config and env)");
    cmd->add_option("--seed-data", flags.seed_data, "dataset generation seed");
    cmd->add_option("--seed-train", flags.seed_train, "training seed");
    cmd->add_option("--seed-sample", flags.seed_sample, "sampling seed");
    cmd->add_option("--jobs", flags.jobs, "worker threads for sampling")
        ->check(CLI::PositiveNumber);
}

// Precedence: config file < environment < command line.
ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig cfg = flags.config_path.empty()
                               ? default_experiment_config()
                               : load_experiment_config(flags.config_path);
    apply_env_overrides(cfg);
    if (flags.seed_data) cfg.seeds.data = *flags.seed_data;
    if (flags.seed_train) cfg.seeds.train = *flags.seed_train;
    if (flags.seed_sample) cfg.seeds.sample = *flags.seed_sample;
    if (!flags.out.empty()) cfg.out = flags.out;
    return cfg;
}

// Prerequisite check with the command that produces the artifact, so the
// error tells the user what to run.
void require_artifact(const std::string& path, const std::string& producer) {
    if (!file_exists(path))
        throw MissingPrerequisiteError(path + " does not exist; run `tacs " + producer +
                                       "` first");
}

LabeledDataset load_dataset(const Layout& lay, const TaskSpec& task) {
    require_artifact(lay.points(), "generate-data");
    LabeledDataset ds;
    ds.task = task.name;
    ds.points = read_points_csv(lay.points());
    ds.raw_points = read_points_csv(lay.raw_points());
    Eigen::VectorXd labels = read_labels_csv(lay.labels());
    if (ds.points.size() != ds.raw_points.size() ||
        static_cast<Eigen::Index>(ds.points.size()) != labels.size())
        throw ConfigError(lay.dataset_dir() + " files disagree on the sample count");
    ds.labels = labels;
    return ds;
}

int cmd_generate_data(const ExperimentConfig& cfg) {
    TaskSpec task = make_task(cfg.task.name);
    std::string hash = config_hash(cfg);
    Layout lay{cfg.out};
    Rng rng(cfg.seeds.data);
    LabeledDataset ds = task.generate(cfg.task.n_train, rng);
    write_points_csv(lay.points(), ds.points, hash);
    write_points_csv(lay.raw_points(), ds.raw_points, hash);
    write_labels_csv(lay.labels(), ds.labels, hash);
    json manifest = {{"task", task.name},
                     {"n", cfg.task.n_train},
                     {"seed", cfg.seeds.data},
                     {"tool_version", kToolVersion},
                     {"config_hash", hash}};
    atomic_write_text(lay.manifest(), manifest.dump(2) + "\n");
    std::cout << "wrote " << cfg.task.n_train << " " << task.name << " samples to "
              << lay.dataset_dir() << "\n";
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& which) {
    TaskSpec task = make_task(cfg.task.name);
    std::string hash = config_hash(cfg);
    Layout lay{cfg.out};
    NoiseSchedule sched = build_schedule(cfg.schedule);
    LabeledDataset ds = load_dataset(lay, task);
    Eigen::MatrixXd conditions = ds.labels;

    if (which == "score") {
        const ScoreModelConfig& mc = cfg.score_model;
        Rng master(cfg.seeds.train);
        Rng init_rng(master.next_u64());
        ScoreModel model =
            make_score_model(task.atom_count, task.dim, mc.hidden, mc.activation,
                             mc.conditional, task.property.condition_dim, init_rng);
        TrainConfig tc;
        tc.epochs = mc.epochs;
        tc.batch_size = mc.batch_size;
        tc.lr = mc.lr;
        tc.p_drop = mc.p_drop;
        tc.seed = master.next_u64();
        TrainResult res = train_score(model, ds.points,
                                      mc.conditional ? &conditions : nullptr, sched, tc);
        save_score_checkpoint(lay.score_ckpt(), model, sched.T, hash);
        write_loss_csv(lay.score_loss(), res.loss_curve, hash);
        std::cout << "score model: " << res.loss_curve.size() << " epochs, final loss "
                  << (res.loss_curve.empty() ? 0.0 : res.loss_curve.back()) << "\n";
        if (res.aborted) {
            std::cerr << "training aborted on a non-finite loss; checkpoint holds the "
                         "last finite epoch\n";
            return kExitNumericalFailure;
        }
        return kExitOk;
    }
    if (which == "timepred") {
        const TimePredictorConfig& tc = cfg.time_predictor;
        // Offset master seed: the predictor must not replay the score
        // model's initialization and batch draws.
        Rng master(cfg.seeds.train + 1);
        Rng init_rng(master.next_u64());
        TimePredictor tp = make_time_predictor(sched.T, task.atom_count, task.dim,
                                               tc.hidden, tc.activation, tc.feature_mode,
                                               tc.conditional,
                                               task.property.condition_dim, init_rng);
        TimePredictorTrainConfig cfg_tp;
        cfg_tp.epochs = tc.epochs;
        cfg_tp.batch_size = tc.batch_size;
        cfg_tp.lr = tc.lr;
        cfg_tp.holdout_fraction = tc.holdout_fraction;
        cfg_tp.seed = master.next_u64();
        TimePredictorTrainResult res = train_time_predictor(
            tp, ds.points, tc.conditional ? &conditions : nullptr, sched, cfg_tp);
        save_time_predictor_checkpoint(lay.timepred_ckpt(), tp, hash);
        write_loss_csv(lay.timepred_loss(), res.loss_curve, hash);
        write_accuracy_csv(lay.timepred_accuracy(), res.holdout_profile, hash);
        double top1 = 0.0, within = 0.0;
        long count = 0;
        for (const BandAccuracy& b : res.holdout_profile) {
            top1 += b.top1 * b.count;
            within += b.within_delta * b.count;
            count += b.count;
        }
        std::cout << "time predictor: holdout top-1 " << (count ? top1 / count : 0.0)
                  << ", within-5 " << (count ? within / count : 0.0) << "\n";
        if (res.aborted) {
            std::cerr << "training aborted on a non-finite loss; checkpoint holds the "
                         "last finite epoch\n";
            return kExitNumericalFailure;
        }
        return kExitOk;
    }
    throw ConfigError("train expects 'score' or 'timepred', got '" + which + "'");
}

RunContext make_run_context(const ExperimentConfig& cfg, const TaskSpec& task,
                            const ScoreModel& model, const TimePredictor* tp,
                            const NoiseSchedule& sched, const Eigen::VectorXd* labels,
                            int jobs, const std::string& hash) {
    RunContext ctx;
    ctx.model = &model;
    ctx.tp = tp;
    ctx.sched = &sched;
    ctx.task = &task;
    ctx.n_chains = cfg.eval.n_samples;
    ctx.seed_sample = cfg.seeds.sample;
    ctx.jobs = jobs;
    ctx.fixed_target = cfg.eval.target;
    ctx.label_pool = labels;
    ctx.config_hash = hash;
    return ctx;
}

int cmd_sample(const ExperimentConfig& cfg, int jobs) {
    TaskSpec task = make_task(cfg.task.name);
    std::string hash = config_hash(cfg);
    Layout lay{cfg.out};
    NoiseSchedule sched = build_schedule(cfg.schedule);

    require_artifact(lay.score_ckpt(), "train score");
    int ckpt_T = 0;
    ScoreModel model = load_score_checkpoint(lay.score_ckpt(), &ckpt_T);
    if (ckpt_T != sched.T)
        throw ConfigError("score checkpoint was trained for T = " +
                          std::to_string(ckpt_T) + ", config says " +
                          std::to_string(sched.T));
    TimePredictor tp;
    bool needs_tp =
        cfg.sampler.method == Method::Tcs || cfg.sampler.method == Method::Tacs;
    if (needs_tp) {
        require_artifact(lay.timepred_ckpt(), "train timepred");
        tp = load_time_predictor_checkpoint(lay.timepred_ckpt());
    }

    Eigen::VectorXd labels;
    if (!cfg.eval.target.has_value()) {
        require_artifact(lay.labels(), "generate-data");
        labels = read_labels_csv(lay.labels());
    }

    RunContext ctx = make_run_context(cfg, task, model, needs_tp ? &tp : nullptr, sched,
                                      cfg.eval.target ? nullptr : &labels, jobs, hash);
    Eigen::MatrixXd targets = draw_targets(ctx);
    std::vector<ChainResult> chains = run_chains(ctx, cfg.sampler, targets);

    std::vector<PointSet> samples;
    samples.reserve(chains.size());
    for (const ChainResult& c : chains) samples.push_back(c.sample);
    write_points_csv(lay.samples_csv(), samples, hash);
    write_snapshots(lay.samples_bin(), samples);
    write_labels_csv(lay.targets_csv(), targets.col(0), hash);
    write_trajectory_csv(lay.trajectory_csv(), chains, hash);
    if (cfg.sampler.snapshot_stride > 0) {
        std::vector<PointSet> snaps; // chain-major, steps in sampling order
        for (const ChainResult& c : chains)
            for (const TrajectoryStep& s : c.trajectory.steps)
                if (s.snapshot.has_value()) snaps.push_back(*s.snapshot);
        write_snapshots(lay.snapshots_bin(), snaps);
    }
    long fallback_steps = 0, total_steps = 0;
    for (const ChainResult& c : chains) {
        fallback_steps += c.trajectory.fallback_count;
        total_steps += static_cast<long>(c.trajectory.steps.size());
    }
    json run = {{"config_hash", hash},
                {"tool_version", kToolVersion},
                {"method", method_name(cfg.sampler.method)},
                {"n", static_cast<int>(chains.size())},
                {"seed_sample", cfg.seeds.sample},
                {"fallback_rate",
                 total_steps ? static_cast<double>(fallback_steps) / total_steps : 0.0}};
    atomic_write_text(lay.run_json(), run.dump(2) + "\n");
    std::cout << "sampled " << chains.size() << " chains with "
              << method_name(cfg.sampler.method) << " into " << lay.samples_dir() << "\n";
    return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg) {
    TaskSpec task = make_task(cfg.task.name);
    std::string hash = config_hash(cfg);
    Layout lay{cfg.out};

    require_artifact(lay.samples_csv(), "sample");
    require_artifact(lay.run_json(), "sample");
    std::vector<PointSet> samples = read_points_csv(lay.samples_csv());
    Eigen::VectorXd target_vec = read_labels_csv(lay.targets_csv());
    json run = json::parse(read_text_file(lay.run_json()), nullptr, false);
    if (run.is_discarded()) throw ConfigError(lay.run_json() + " is not valid JSON");
    if (target_vec.size() != static_cast<Eigen::Index>(samples.size()))
        throw ConfigError("samples and targets disagree on the sample count");
    Eigen::MatrixXd targets = target_vec;

    MaeResult mr = mae_to_target(samples, targets, task.property);
    double manifold = 0.0;
    for (const PointSet& x : samples) manifold += task.manifold_distance(x);
    manifold /= static_cast<double>(samples.size());

    std::vector<PerSampleRow> rows = per_sample_table(task, samples, targets);
    write_per_sample_csv(lay.per_sample_csv(), rows, hash);

    json report = {{"method", run.value("method", std::string("unknown"))},
                   {"config_hash", hash},
                   {"n", mr.n_total},
                   {"mae", mr.mae},
                   {"manifold_l2", manifold},
                   {"invalid_rate", mr.invalid_rate},
                   {"fallback_rate", run.value("fallback_rate", 0.0)},
                   {"per_sample_path", lay.per_sample_csv()}};
    atomic_write_text(lay.report_json(), report.dump(2) + "\n");
    std::cout << "mae " << mr.mae << ", manifold_l2 " << manifold << ", invalid_rate "
              << mr.invalid_rate << "\n";
    return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& axis_name,
              const std::string& values_csv, int jobs) {
    TaskSpec task = make_task(cfg.task.name);
    std::string hash = config_hash(cfg);
    Layout lay{cfg.out};
    NoiseSchedule sched = build_schedule(cfg.schedule);
    SweepAxis axis = parse_sweep_axis(axis_name);
    std::vector<std::string> values = split_list(values_csv);

    require_artifact(lay.score_ckpt(), "train score");
    int ckpt_T = 0;
    ScoreModel model = load_score_checkpoint(lay.score_ckpt(), &ckpt_T);
    if (ckpt_T != sched.T)
        throw ConfigError("score checkpoint was trained for T = " +
                          std::to_string(ckpt_T) + ", config says " +
                          std::to_string(sched.T));
    TimePredictor tp;
    bool needs_tp =
        cfg.sampler.method == Method::Tcs || cfg.sampler.method == Method::Tacs;
    if (needs_tp) {
        require_artifact(lay.timepred_ckpt(), "train timepred");
        tp = load_time_predictor_checkpoint(lay.timepred_ckpt());
    }

    Eigen::VectorXd labels;
    bool needs_labels = !cfg.eval.target.has_value() && axis != SweepAxis::Target;
    if (needs_labels) {
        require_artifact(lay.labels(), "generate-data");
        labels = read_labels_csv(lay.labels());
    }
    RunContext ctx = make_run_context(cfg, task, model, needs_tp ? &tp : nullptr, sched,
                                      needs_labels ? &labels : nullptr, jobs, hash);
    if (axis == SweepAxis::Target && !ctx.fixed_target.has_value())
        ctx.fixed_target = 0.0; // placeholder; every cell overrides it

    SweepResult sweep = run_sweep(ctx, cfg.sampler, axis, values);

    ensure_directory(lay.sweep_dir());
    std::string base = lay.sweep_dir() + "/sweep_" + sweep_axis_name(axis);
    write_sweep_csv(base + ".csv", sweep, cfg.seeds.sample, hash);

    json cells = json::array();
    PlotSeries mae_series{std::string(method_name(cfg.sampler.method)) + "_mae", {}, {}};
    PlotSeries l2_series{std::string(method_name(cfg.sampler.method)) + "_manifold_l2",
                         {}, {}};
    for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
        const SweepCell& cell = sweep.cells[i];
        json c = {{"axis_value", cell.axis_value}};
        double x;
        try {
            x = parse_double(cell.axis_value);
        } catch (const ConfigError&) {
            x = static_cast<double>(i); // categorical axis, plot by position
        }
        if (cell.report) {
            c["mae"] = cell.report->mae;
            c["manifold_l2"] = cell.report->manifold_l2;
            c["invalid_rate"] = cell.report->invalid_rate;
            c["fallback_rate"] = cell.report->fallback_rate;
            c["n"] = cell.report->n;
            mae_series.x.push_back(x);
            mae_series.y.push_back(cell.report->mae);
            l2_series.x.push_back(x);
            l2_series.y.push_back(cell.report->manifold_l2);
        } else {
            c["error"] = cell.error;
        }
        cells.push_back(c);
    }
    json out = {{"axis", sweep_axis_name(axis)},
                {"config_hash", hash},
                {"tool_version", kToolVersion},
                {"seed_sample", cfg.seeds.sample},
                {"method", method_name(cfg.sampler.method)},
                {"cells", cells}};
    atomic_write_text(base + ".json", out.dump(2) + "\n");
    write_plot_data_csv(base + "_plot.csv", {mae_series, l2_series}, hash);
    write_svg_lines(base + ".svg",
                    std::string(method_name(cfg.sampler.method)) + " over " +
                        sweep_axis_name(axis),
                    sweep_axis_name(axis), "metric", {mae_series, l2_series});
    std::cout << "swept " << sweep_axis_name(axis) << " over " << values.size()
              << " values into " << base << ".{csv,json,svg}\n";
    for (const SweepCell& cell : sweep.cells)
        if (!cell.error.empty())
            std::cerr << "cell " << cell.axis_value << " failed: " << cell.error << "\n";
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"time-aware conditional sampling toolbox"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    CommonFlags flags;
    std::string train_which;
    std::string sweep_axis;
    std::string sweep_values;

    CLI::App* gen = app.add_subcommand("generate-data", "draw and label a dataset");
    add_common_flags(gen, flags);
    CLI::App* train = app.add_subcommand("train", "fit the score model or time predictor");
    train->add_option("which", train_which, "score | timepred")->required();
    add_common_flags(train, flags);
    CLI::App* sample = app.add_subcommand("sample", "run the configured sampler");
    add_common_flags(sample, flags);
    CLI::App* eval_cmd = app.add_subcommand("eval", "score the sampled batch");
    add_common_flags(eval_cmd, flags);
    CLI::App* sweep = app.add_subcommand("sweep", "evaluate along one config axis");
    sweep->add_option("--axis", sweep_axis, "z | delta | m | sigma | mode | target")
        ->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    add_common_flags(sweep, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitConfigError;
    }

    ExperimentConfig cfg = resolve_config(flags);
    if (gen->parsed()) return cmd_generate_data(cfg);
    if (train->parsed()) return cmd_train(cfg, train_which);
    if (sample->parsed()) return cmd_sample(cfg, flags.jobs);
    if (eval_cmd->parsed()) return cmd_eval(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg, sweep_axis, sweep_values, flags.jobs);
    throw ConfigError("no subcommand given");
}

} // namespace
} // namespace tacs

int main(int argc, char** argv) {
    try {
        return tacs::dispatch(argc, argv);
    } catch (const tacs::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return tacs::kExitConfigError;
    } catch (const tacs::MissingPrerequisiteError& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return tacs::kExitMissingPrerequisite;
    } catch (const tacs::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return tacs::kExitNumericalFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tacs::kExitFailure;
    }
}
