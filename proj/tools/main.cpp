// segpipe: post-processing, ensembling and lesion-wise evaluation for
// volumetric three-channel tumor segmentations. One binary, seven
// subcommands; every run writes a manifest next to its primary output.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "segpipe/ensemble.hpp"
#include "segpipe/errors.hpp"
#include "segpipe/io_json.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/npy.hpp"
#include "segpipe/phantom.hpp"
#include "segpipe/postprocess.hpp"
#include "segpipe/predictor.hpp"
#include "segpipe/preprocess.hpp"
#include "segpipe/tuner.hpp"
#include "segpipe/version.hpp"
#include "segpipe/volume.hpp"
#include "segpipe/window.hpp"

namespace fs = std::filesystem;
using namespace segpipe;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// For file outputs the manifest sits beside them as <stem>.manifest.json; for
// directory outputs it is <dir>/manifest.json.
fs::path manifest_path_for(const fs::path& primary, bool is_dir) {
    if (is_dir) return primary / "manifest.json";
    fs::path p = primary;
    p.replace_extension(".manifest.json");
    return p;
}

void emit_manifest(const fs::path& primary, bool is_dir, RunManifest manifest,
                   Clock::time_point start) {
    manifest.timestamp_utc = utc_timestamp();
    manifest.wall_ms = elapsed_ms(start);
    save_manifest(manifest_path_for(primary, is_dir), manifest);
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    if (jobs < 1) throw ValidationError("jobs must be at least 1, got " + std::to_string(jobs));
    const size_t n_threads = std::min(static_cast<size_t>(jobs), n);
    if (n_threads <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string case_name(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case_%04zu", index);
    return buf;
}

// ---------------------------------------------------------------- preprocess

struct PreprocessOpts {
    std::vector<std::string> inputs;
    std::string out_stack;
    std::string out_meta;
};

void run_preprocess(const PreprocessOpts& opts) {
    const auto start = Clock::now();
    std::vector<FloatVolume> modalities;
    modalities.reserve(opts.inputs.size());
    for (const std::string& path : opts.inputs)
        modalities.push_back(read_float_volume(path));

    CropResult cropped = crop_foreground(modalities);
    for (int64_t c = 0; c < cropped.stack.channels; ++c) {
        const FloatVolume vol = normalize_nonzero(cropped.stack.channel_volume(c));
        std::copy(vol.data.begin(), vol.data.end(), cropped.stack.channel(c).begin());
    }

    const fs::path out_stack(opts.out_stack);
    fs::path out_meta(opts.out_meta);
    if (out_meta.empty()) {
        out_meta = out_stack;
        out_meta.replace_extension(".meta.json");
    }
    write_npy(out_stack, cropped.stack);
    CropMeta meta;
    meta.original_shape = cropped.original_shape;
    meta.box = cropped.box;
    save_json_file(out_meta, crop_meta_to_json(meta));

    RunManifest manifest;
    manifest.subcommand = "preprocess";
    manifest.inputs = opts.inputs;
    manifest.outputs = {out_stack.string(), out_meta.string()};
    manifest.config = {{"n_modalities", opts.inputs.size()}};
    emit_manifest(out_stack, false, std::move(manifest), start);
}

// --------------------------------------------------------------------- infer

struct InferOpts {
    std::string input;
    std::string out;
    std::string field;
    double const_prob = 0.5;
    int64_t window = 128;
    double overlap = 0.5;
    bool tta = false;
};

void run_infer(const InferOpts& opts) {
    const auto start = Clock::now();
    const FloatStack input = read_float_stack(opts.input);

    std::unique_ptr<Predictor> predictor;
    if (!opts.field.empty()) {
        predictor = std::make_unique<FieldPredictor>(read_prob_map(opts.field));
    } else {
        predictor = std::make_unique<ConstantPredictor>(opts.const_prob);
    }

    const WindowGrid grid =
        make_window_grid(input.shape, {opts.window, opts.window, opts.window}, opts.overlap);
    const ChannelProbMap probs = opts.tta ? tta_predict(input, *predictor, grid)
                                          : sliding_window_predict(input, *predictor, grid);
    write_npy(opts.out, probs);

    RunManifest manifest;
    manifest.subcommand = "infer";
    manifest.inputs = {opts.input};
    if (!opts.field.empty()) manifest.inputs.push_back(opts.field);
    manifest.outputs = {opts.out};
    manifest.config = {{"mode", opts.field.empty() ? "constant" : "field"},
                       {"const_prob", opts.const_prob},
                       {"window", opts.window},
                       {"overlap", opts.overlap},
                       {"tta", opts.tta}};
    emit_manifest(opts.out, false, std::move(manifest), start);
}

// ------------------------------------------------------------------ ensemble

struct EnsembleOpts {
    std::vector<std::string> inputs;
    std::string weights;
    std::string out;
};

void run_ensemble(const EnsembleOpts& opts) {
    const auto start = Clock::now();
    const std::vector<ModelWeights> weights = load_weights(opts.weights);
    std::vector<ChannelProbMap> maps;
    maps.reserve(opts.inputs.size());
    for (const std::string& path : opts.inputs) maps.push_back(read_prob_map(path));

    const ChannelProbMap blended = ensemble(maps, weights);
    write_npy(opts.out, blended);

    RunManifest manifest;
    manifest.subcommand = "ensemble";
    manifest.inputs = opts.inputs;
    manifest.inputs.push_back(opts.weights);
    manifest.outputs = {opts.out};
    manifest.config = {{"weights", weights_to_json(weights)}};
    emit_manifest(opts.out, false, std::move(manifest), start);
}

// ---------------------------------------------------------------- postprocess

struct PostprocessOpts {
    std::string probs;
    std::string out;
    std::string config;
    std::string meta;
};

void run_postprocess(const PostprocessOpts& opts) {
    const auto start = Clock::now();
    const PostprocessConfig config =
        opts.config.empty() ? PostprocessConfig{} : load_postprocess_config(opts.config);
    config.validate();
    const ChannelProbMap probs = read_prob_map(opts.probs);
    LabelMap labels = postprocess_pipeline(probs, config).labels;
    if (!opts.meta.empty()) {
        const CropMeta meta = load_crop_meta(opts.meta);
        labels = uncrop(labels, meta.box, meta.original_shape);
    }
    write_npy(opts.out, labels);

    RunManifest manifest;
    manifest.subcommand = "postprocess";
    manifest.inputs = {opts.probs};
    if (!opts.config.empty()) manifest.inputs.push_back(opts.config);
    if (!opts.meta.empty()) manifest.inputs.push_back(opts.meta);
    manifest.outputs = {opts.out};
    manifest.config = {{"postprocess", postprocess_to_json(config)}};
    emit_manifest(opts.out, false, std::move(manifest), start);
}

// ------------------------------------------------------------------ evaluate

struct EvaluateOpts {
    std::string pred_dir;
    std::string gt_dir;
    std::string out;
    std::string csv;
    std::string metrics;
    int jobs = 1;
};

struct PairedCase {
    std::string id;
    fs::path pred;
    fs::path gt;
};

std::vector<fs::path> list_npy(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".npy")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<PairedCase> pair_cases(const fs::path& pred_dir, const fs::path& gt_dir) {
    std::vector<fs::path> gt_files;
    for (const fs::path& p : list_npy(gt_dir))
        if (ends_with(p.filename().string(), "_gt.npy")) gt_files.push_back(p);
    bool suffixed = true;
    if (gt_files.empty()) {
        gt_files = list_npy(gt_dir); // any layout: every volume is a reference
        suffixed = false;
    }
    if (gt_files.empty()) throw IoError("no .npy reference volumes found in " + gt_dir.string());

    std::vector<PairedCase> cases;
    for (const fs::path& gt : gt_files) {
        const std::string file = gt.filename().string();
        const std::string id =
            suffixed ? file.substr(0, file.size() - std::string("_gt.npy").size())
                     : gt.stem().string();
        const std::vector<std::string> candidates = {id + "_seg.npy", id + "_pred.npy",
                                                     id + ".npy", file};
        fs::path pred;
        for (const std::string& name : candidates)
            if (fs::is_regular_file(pred_dir / name)) {
                pred = pred_dir / name;
                break;
            }
        if (pred.empty())
            throw IoError("no prediction for case '" + id + "' in " + pred_dir.string() +
                          " (tried " + candidates[0] + ", " + candidates[1] + ", " + candidates[2] +
                          ", " + candidates[3] + ")");
        cases.push_back({id, pred, gt});
    }
    return cases;
}

void run_evaluate(const EvaluateOpts& opts) {
    const auto start = Clock::now();
    const MetricsConfig config =
        opts.metrics.empty() ? MetricsConfig{} : load_metrics_config(opts.metrics);
    config.validate();
    const std::vector<PairedCase> cases = pair_cases(opts.pred_dir, opts.gt_dir);

    std::vector<CaseReport> reports(cases.size());
    parallel_for(cases.size(), opts.jobs, [&](size_t i) {
        const LabelMap pred = read_labelmap(cases[i].pred);
        const LabelMap gt = read_labelmap(cases[i].gt);
        reports[i] = evaluate_case(pred, gt, config);
        reports[i].case_id = cases[i].id;
    });

    const CorpusReport corpus = aggregate_reports(std::move(reports));
    save_json_file(opts.out, corpus_report_to_json(corpus));
    if (!opts.csv.empty()) write_report_csv(opts.csv, corpus);

    RunManifest manifest;
    manifest.subcommand = "evaluate";
    manifest.inputs = {opts.pred_dir, opts.gt_dir};
    if (!opts.metrics.empty()) manifest.inputs.push_back(opts.metrics);
    manifest.outputs = {opts.out};
    if (!opts.csv.empty()) manifest.outputs.push_back(opts.csv);
    manifest.config = {{"metrics", metrics_to_json(config)}, {"n_cases", cases.size()}};
    emit_manifest(opts.out, false, std::move(manifest), start);
}

// ---------------------------------------------------------------------- tune

struct TuneOpts {
    std::string corpus;
    std::string grid;
    std::string out;
    std::string post;
    std::string metrics;
    std::string objective = "lesion_dice";
    int jobs = 1;
};

void run_tune(const TuneOpts& opts) {
    const auto start = Clock::now();
    const SearchGrid grid = load_search_grid(opts.grid);
    const PostprocessConfig base =
        opts.post.empty() ? PostprocessConfig{} : load_postprocess_config(opts.post);
    const MetricsConfig metrics_cfg =
        opts.metrics.empty() ? MetricsConfig{} : load_metrics_config(opts.metrics);
    const TuneObjective objective = tune_objective_from_string(opts.objective);

    std::vector<TuneCase> cases;
    for (const fs::path& probs_path : list_npy(opts.corpus)) {
        const std::string file = probs_path.filename().string();
        if (!ends_with(file, "_probs.npy")) continue;
        const std::string id = file.substr(0, file.size() - std::string("_probs.npy").size());
        const fs::path gt_path = fs::path(opts.corpus) / (id + "_gt.npy");
        if (!fs::is_regular_file(gt_path))
            throw IoError("missing reference labels " + gt_path.string());
        cases.push_back({id, read_prob_map(probs_path), read_labelmap(gt_path)});
    }
    if (cases.empty())
        throw IoError("no '*_probs.npy' cases found in " + opts.corpus);

    const TuneResult result = tune(cases, grid, base, metrics_cfg, objective, opts.jobs);
    save_json_file(opts.out, tune_result_to_json(result));

    RunManifest manifest;
    manifest.subcommand = "tune";
    manifest.inputs = {opts.corpus, opts.grid};
    if (!opts.post.empty()) manifest.inputs.push_back(opts.post);
    if (!opts.metrics.empty()) manifest.inputs.push_back(opts.metrics);
    manifest.outputs = {opts.out};
    manifest.config = {{"objective", to_string(objective)},
                       {"n_candidates", result.n_candidates},
                       {"base", postprocess_to_json(base)},
                       {"metrics", metrics_to_json(metrics_cfg)}};
    emit_manifest(opts.out, false, std::move(manifest), start);
}

// ------------------------------------------------------------------- phantom

struct PhantomOpts {
    std::string spec;
    std::string corpus;
    std::string out_dir;
    bool emit_mri = false;
    uint64_t seed = 0;
    bool seed_given = false;
};

void run_phantom(const PhantomOpts& opts) {
    const auto start = Clock::now();
    if (opts.spec.empty() == opts.corpus.empty())
        throw ValidationError("phantom requires exactly one of --spec or --corpus");

    std::vector<PhantomSpec> cases;
    json config_snapshot;
    if (!opts.spec.empty()) {
        PhantomSpec spec = load_phantom_spec(opts.spec);
        if (opts.seed_given) spec.seed = opts.seed;
        config_snapshot = phantom_to_json(spec);
        cases.push_back(std::move(spec));
    } else {
        CorpusSpec corpus = load_corpus_spec(opts.corpus);
        if (opts.seed_given) {
            if (!corpus.cases.empty())
                throw ValidationError("--seed cannot override an explicit case list");
            corpus.seed = opts.seed;
        }
        config_snapshot = {{"corpus", opts.corpus}, {"seed", corpus.seed}};
        cases = expand_corpus(corpus);
    }

    const fs::path out_dir(opts.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    RunManifest manifest;
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const std::string name = case_name(ci);
        const fs::path gt_path = out_dir / (name + "_gt.npy");
        const fs::path probs_path = out_dir / (name + "_probs.npy");
        write_npy(gt_path, generate_ground_truth(cases[ci]));
        write_npy(probs_path, generate_prob_map(cases[ci]));
        manifest.outputs.push_back(gt_path.string());
        manifest.outputs.push_back(probs_path.string());
        if (opts.emit_mri) {
            const std::vector<FloatVolume> modalities = synth_modalities(cases[ci]);
            for (size_t m = 0; m < modalities.size(); ++m) {
                const fs::path mod_path =
                    out_dir / (name + "_mod" + std::to_string(m) + ".npy");
                write_npy(mod_path, modalities[m]);
                manifest.outputs.push_back(mod_path.string());
            }
        }
    }

    manifest.subcommand = "phantom";
    manifest.inputs = {opts.spec.empty() ? opts.corpus : opts.spec};
    manifest.config = {{"spec", std::move(config_snapshot)},
                       {"n_cases", cases.size()},
                       {"emit_mri", opts.emit_mri}};
    emit_manifest(out_dir, true, std::move(manifest), start);
}

// ----------------------------------------------------------------------- app

void setup_preprocess(CLI::App& app) {
    auto opts = std::make_shared<PreprocessOpts>();
    CLI::App* sub = app.add_subcommand(
        "preprocess", "Crop modalities to their union foreground and z-normalize each one");
    sub->add_option("--inputs", opts->inputs, "Modality volumes (3D float32 .npy, same shape)")
        ->required()
        ->expected(1, -1);
    sub->add_option("--out-stack", opts->out_stack, "Output stack (4D float32 .npy)")->required();
    sub->add_option("--out-meta", opts->out_meta,
                    "Crop metadata JSON (default: alongside the stack)");
    sub->callback([opts] { run_preprocess(*opts); });
}

void setup_infer(CLI::App& app) {
    auto opts = std::make_shared<InferOpts>();
    CLI::App* sub = app.add_subcommand(
        "infer", "Sliding-window prediction with a stub predictor, optionally flip-averaged");
    sub->add_option("--input", opts->input, "Input stack (4D float32 .npy)")->required();
    sub->add_option("--out", opts->out, "Output probabilities (3xHxWxD float32 .npy)")->required();
    CLI::Option* field =
        sub->add_option("--field", opts->field, "Serve windows from this full-size probability field");
    sub->add_option("--const-prob", opts->const_prob, "Constant probability (default predictor)")
        ->excludes(field);
    sub->add_option("--window", opts->window, "Cubic window edge length (default 128)");
    sub->add_option("--overlap", opts->overlap, "Window overlap fraction in [0, 1) (default 0.5)");
    sub->add_flag("--tta", opts->tta, "Average predictions over all 8 axis-flip combinations");
    sub->callback([opts] { run_infer(*opts); });
}

void setup_ensemble(CLI::App& app) {
    auto opts = std::make_shared<EnsembleOpts>();
    CLI::App* sub =
        app.add_subcommand("ensemble", "Weighted per-channel average of probability maps");
    sub->add_option("--inputs", opts->inputs, "Probability maps, one per model, in weights order")
        ->required()
        ->expected(1, -1);
    sub->add_option("--weights", opts->weights, "Per-model channel weights JSON")->required();
    sub->add_option("--out", opts->out, "Output probability map (.npy)")->required();
    sub->callback([opts] { run_ensemble(*opts); });
}

void setup_postprocess(CLI::App& app) {
    auto opts = std::make_shared<PostprocessOpts>();
    CLI::App* sub = app.add_subcommand(
        "postprocess", "Threshold, filter small low-confidence objects and compose the label map");
    sub->add_option("--probs", opts->probs, "Probability map (3xHxWxD float32 .npy)")->required();
    sub->add_option("--out", opts->out, "Output label map (uint8 .npy)")->required();
    sub->add_option("--config", opts->config, "Post-processing config JSON (default: built-in)");
    sub->add_option("--meta", opts->meta, "Crop metadata JSON: place labels back into the original frame");
    sub->callback([opts] { run_postprocess(*opts); });
}

void setup_evaluate(CLI::App& app) {
    auto opts = std::make_shared<EvaluateOpts>();
    CLI::App* sub = app.add_subcommand(
        "evaluate", "Legacy and lesion-wise Dice/HD95 of predicted label maps against references");
    sub->add_option("--pred-dir", opts->pred_dir, "Directory of predicted label maps")->required();
    sub->add_option("--gt-dir", opts->gt_dir, "Directory of reference label maps")->required();
    sub->add_option("--out", opts->out, "Report JSON path")->required();
    sub->add_option("--csv", opts->csv, "Also write per-case per-channel rows as CSV");
    sub->add_option("--metrics", opts->metrics, "Metrics config JSON (default: built-in)");
    sub->add_option("--jobs", opts->jobs, "Worker threads over cases (default 1)");
    sub->callback([opts] { run_evaluate(*opts); });
}

void setup_tune(CLI::App& app) {
    auto opts = std::make_shared<TuneOpts>();
    CLI::App* sub = app.add_subcommand(
        "tune", "Exhaustive grid search of post-processing parameters against a corpus");
    sub->add_option("--corpus", opts->corpus,
                    "Directory of <case>_probs.npy / <case>_gt.npy pairs")
        ->required();
    sub->add_option("--grid", opts->grid, "Search grid JSON")->required();
    sub->add_option("--out", opts->out, "Result JSON path")->required();
    sub->add_option("--post", opts->post, "Base post-processing config (default: built-in)");
    sub->add_option("--metrics", opts->metrics, "Metrics config JSON (default: built-in)");
    sub->add_option("--objective", opts->objective,
                    "lesion_dice (default), legacy_dice or composite");
    sub->add_option("--jobs", opts->jobs, "Worker threads over candidates (default 1)");
    sub->callback([opts] { run_tune(*opts); });
}

void setup_phantom(CLI::App& app) {
    auto opts = std::make_shared<PhantomOpts>();
    CLI::App* sub = app.add_subcommand(
        "phantom", "Generate synthetic ground truth and probability maps with known lesions");
    sub->add_option("--spec", opts->spec, "Single-case phantom spec JSON");
    sub->add_option("--corpus", opts->corpus, "Corpus spec JSON (explicit cases or sampled)");
    sub->add_option("--out-dir", opts->out_dir, "Output directory")->required();
    sub->add_flag("--emit-mri", opts->emit_mri, "Also write four synthetic modality volumes per case");
    sub->add_option("--seed", opts->seed, "Override the spec/corpus seed")
        ->each([opts](const std::string&) { opts->seed_given = true; });
    sub->callback([opts] { run_phantom(*opts); });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric segmentation post-processing, ensembling and lesion-wise evaluation"};
    app.set_version_flag("--version", SEGPIPE_VERSION);
    app.require_subcommand(1);
    setup_preprocess(app);
    setup_infer(app);
    setup_ensemble(app);
    setup_postprocess(app);
    setup_evaluate(app);
    setup_tune(app);
    setup_phantom(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
