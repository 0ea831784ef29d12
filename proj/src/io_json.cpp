#include "segpipe/io_json.hpp"

#include <fstream>
#include <initializer_list>

#include "segpipe/errors.hpp"
#include "segpipe/version.hpp"

namespace segpipe {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ValidationError(ctx + ": unknown key '" + it.key() + "'");
    }
}

const json& require_object(const json& v, const std::string& ctx) {
    if (!v.is_object()) throw ValidationError(ctx + " must be an object");
    return v;
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& ctx) {
    if (!v.is_number()) throw ValidationError(ctx + " must be a number");
    return v.get<double>();
}

int64_t as_int(const json& v, const std::string& ctx) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ValidationError(ctx + " must be an integer");
    return v.get<int64_t>();
}

uint64_t as_uint(const json& v, const std::string& ctx) {
    if (v.is_number_unsigned()) return v.get<uint64_t>();
    if (v.is_number_integer() && v.get<int64_t>() >= 0)
        return static_cast<uint64_t>(v.get<int64_t>());
    throw ValidationError(ctx + " must be a non-negative integer");
}

std::string as_string(const json& v, const std::string& ctx) {
    if (!v.is_string()) throw ValidationError(ctx + " must be a string");
    return v.get<std::string>();
}

std::array<double, 3> as_vec3(const json& v, const std::string& ctx) {
    if (v.is_number()) {
        const double x = v.get<double>();
        return {x, x, x};
    }
    if (!v.is_array() || v.size() != 3)
        throw ValidationError(ctx + " must be a number or an array of 3 numbers");
    return {as_double(v[0], ctx), as_double(v[1], ctx), as_double(v[2], ctx)};
}

std::array<int64_t, 3> as_ivec3(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.size() != 3)
        throw ValidationError(ctx + " must be an array of 3 integers");
    return {as_int(v[0], ctx), as_int(v[1], ctx), as_int(v[2], ctx)};
}

Shape3 as_shape(const json& v, const std::string& ctx) {
    const auto a = as_ivec3(v, ctx);
    if (a[0] < 1 || a[1] < 1 || a[2] < 1) throw ValidationError(ctx + " must be positive");
    return {a[0], a[1], a[2]};
}

std::array<double, 2> as_range(const json& v, const std::string& ctx) {
    if (!v.is_array() || v.size() != 2)
        throw ValidationError(ctx + " must be an array [lo, hi]");
    return {as_double(v[0], ctx), as_double(v[1], ctx)};
}

std::vector<double> as_double_list(const json& v, const std::string& ctx) {
    if (!v.is_array()) throw ValidationError(ctx + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) out.push_back(as_double(e, ctx));
    return out;
}

std::vector<int64_t> as_int_list(const json& v, const std::string& ctx) {
    if (!v.is_array()) throw ValidationError(ctx + " must be an array of integers");
    std::vector<int64_t> out;
    out.reserve(v.size());
    for (const json& e : v) out.push_back(as_int(e, ctx));
    return out;
}

// Shortest round-trip decimal form, identical to JSON number output.
std::string num(double x) { return json(x).dump(); }

json filter_to_json(const FilterConfig& f) {
    return {{"size_upper", f.size_upper},
            {"size_lower", f.size_lower},
            {"prob_upper", f.prob_upper},
            {"prob_mid", f.prob_mid}};
}

FilterConfig filter_from_json(const json& j, FilterConfig base, const std::string& ctx) {
    require_object(j, ctx);
    check_keys(j, {"size_upper", "size_lower", "prob_upper", "prob_mid"}, ctx);
    if (const json* v = find(j, "size_upper")) base.size_upper = as_int(*v, ctx + ".size_upper");
    if (const json* v = find(j, "size_lower")) base.size_lower = as_int(*v, ctx + ".size_lower");
    if (const json* v = find(j, "prob_upper")) base.prob_upper = as_double(*v, ctx + ".prob_upper");
    if (const json* v = find(j, "prob_mid")) base.prob_mid = as_double(*v, ctx + ".prob_mid");
    return base;
}

json means_to_json(const MetricMeans& m) {
    return {{"legacy_dice", m.legacy_dice},
            {"legacy_hd95", m.legacy_hd95},
            {"lesion_dice", m.lesion_dice},
            {"lesion_hd95", m.lesion_hd95}};
}

json channel_report_to_json(const ChannelReport& ch) {
    json lesions = json::array();
    for (const LesionEntry& e : ch.lesion.entries) {
        json entry;
        entry["gt_id"] = e.gt_id == 0 ? json(nullptr) : json(e.gt_id);
        entry["pred_ids"] = e.pred_ids;
        entry["dice"] = e.dice;
        entry["hd95"] = e.hd95;
        lesions.push_back(std::move(entry));
    }
    return {{"legacy_dice", ch.legacy_dice}, {"legacy_hd95", ch.legacy_hd95},
            {"lesion_dice", ch.lesion.dice}, {"lesion_hd95", ch.lesion.hd95},
            {"n_gt", ch.lesion.n_gt},        {"n_pred", ch.lesion.n_pred},
            {"n_fn", ch.lesion.n_fn},        {"n_fp", ch.lesion.n_fp},
            {"lesions", std::move(lesions)}};
}

json channels_to_json(const std::array<ChannelReport, 3>& channels) {
    json out;
    out["et"] = channel_report_to_json(channels[kET]);
    out["tc"] = channel_report_to_json(channels[kTC]);
    out["wt"] = channel_report_to_json(channels[kWT]);
    return out;
}

json scored_to_json(const ScoredConfig& sc) {
    return {{"score", sc.score}, {"config", postprocess_to_json(sc.config)}};
}

} // namespace

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void save_json_file(const std::filesystem::path& path, const json& value) {
    std::ofstream out(path);
    if (!out.is_open()) throw IoError("cannot open " + path.string() + " for writing");
    out << value.dump(2) << '\n';
    if (!out.good()) throw IoError("failed writing " + path.string());
}

json postprocess_to_json(const PostprocessConfig& config) {
    json j;
    j["thresholds"] = {{"tc", config.thresholds.tc},
                       {"wt", config.thresholds.wt},
                       {"et", config.thresholds.et}};
    j["filters"] = {{"tc", filter_to_json(config.filter_tc)},
                    {"wt", filter_to_json(config.filter_wt)},
                    {"et", filter_to_json(config.filter_et)}};
    j["et_to_tc_min_voxels"] = config.et_to_tc_min_voxels;
    j["connectivity"] = config.connectivity;
    return j;
}

PostprocessConfig postprocess_from_json(const json& j) {
    require_object(j, "postprocess config");
    check_keys(j, {"thresholds", "filters", "et_to_tc_min_voxels", "connectivity"},
               "postprocess config");
    PostprocessConfig config;
    if (const json* t = find(j, "thresholds")) {
        require_object(*t, "thresholds");
        check_keys(*t, {"tc", "wt", "et"}, "thresholds");
        if (const json* v = find(*t, "tc")) config.thresholds.tc = as_double(*v, "thresholds.tc");
        if (const json* v = find(*t, "wt")) config.thresholds.wt = as_double(*v, "thresholds.wt");
        if (const json* v = find(*t, "et")) config.thresholds.et = as_double(*v, "thresholds.et");
    }
    if (const json* f = find(j, "filters")) {
        require_object(*f, "filters");
        check_keys(*f, {"tc", "wt", "et"}, "filters");
        if (const json* v = find(*f, "tc"))
            config.filter_tc = filter_from_json(*v, config.filter_tc, "filters.tc");
        if (const json* v = find(*f, "wt"))
            config.filter_wt = filter_from_json(*v, config.filter_wt, "filters.wt");
        if (const json* v = find(*f, "et"))
            config.filter_et = filter_from_json(*v, config.filter_et, "filters.et");
    }
    if (const json* v = find(j, "et_to_tc_min_voxels"))
        config.et_to_tc_min_voxels = as_int(*v, "et_to_tc_min_voxels");
    if (const json* v = find(j, "connectivity"))
        config.connectivity = static_cast<int>(as_int(*v, "connectivity"));
    config.validate();
    return config;
}

PostprocessConfig load_postprocess_config(const std::filesystem::path& path) {
    return postprocess_from_json(load_json_file(path));
}

json metrics_to_json(const MetricsConfig& config) {
    return {{"connectivity", config.connectivity},
            {"dilation_radius", config.dilation_radius},
            {"percentile", config.percentile},
            {"penalty_dice", config.penalty_dice},
            {"penalty_hd95", config.penalty_hd95}};
}

MetricsConfig metrics_from_json(const json& j) {
    require_object(j, "metrics config");
    check_keys(j, {"connectivity", "dilation_radius", "percentile", "penalty_dice", "penalty_hd95"},
               "metrics config");
    MetricsConfig config;
    if (const json* v = find(j, "connectivity"))
        config.connectivity = static_cast<int>(as_int(*v, "connectivity"));
    if (const json* v = find(j, "dilation_radius"))
        config.dilation_radius = static_cast<int>(as_int(*v, "dilation_radius"));
    if (const json* v = find(j, "percentile")) config.percentile = as_double(*v, "percentile");
    if (const json* v = find(j, "penalty_dice"))
        config.penalty_dice = as_double(*v, "penalty_dice");
    if (const json* v = find(j, "penalty_hd95"))
        config.penalty_hd95 = as_double(*v, "penalty_hd95");
    config.validate();
    return config;
}

MetricsConfig load_metrics_config(const std::filesystem::path& path) {
    return metrics_from_json(load_json_file(path));
}

json weights_to_json(const std::vector<ModelWeights>& weights) {
    json out = json::array();
    for (const ModelWeights& w : weights)
        out.push_back({{"name", w.name}, {"tc", w.tc}, {"wt", w.wt}, {"et", w.et}});
    return out;
}

std::vector<ModelWeights> weights_from_json(const json& j) {
    if (!j.is_array()) throw ValidationError("weights must be an array of model entries");
    std::vector<ModelWeights> out;
    out.reserve(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
        const std::string ctx = "weights[" + std::to_string(i) + "]";
        const json& e = require_object(j[i], ctx);
        check_keys(e, {"name", "tc", "wt", "et"}, ctx);
        ModelWeights w;
        const json* name = find(e, "name");
        if (!name) throw ValidationError(ctx + ": missing 'name'");
        w.name = as_string(*name, ctx + ".name");
        if (const json* v = find(e, "tc")) w.tc = as_double(*v, ctx + ".tc");
        if (const json* v = find(e, "wt")) w.wt = as_double(*v, ctx + ".wt");
        if (const json* v = find(e, "et")) w.et = as_double(*v, ctx + ".et");
        out.push_back(std::move(w));
    }
    validate_weights(out);
    return out;
}

std::vector<ModelWeights> load_weights(const std::filesystem::path& path) {
    return weights_from_json(load_json_file(path));
}

json phantom_to_json(const PhantomSpec& spec) {
    json lesions = json::array();
    for (const LesionSpec& l : spec.lesions)
        lesions.push_back({{"center", l.center}, {"r_wt", l.r_wt}, {"r_tc", l.r_tc}, {"r_et", l.r_et}});
    json blobs = json::array();
    for (const FpBlobSpec& b : spec.fp_blobs)
        blobs.push_back({{"center", b.center},
                         {"radius", b.radius},
                         {"mean_prob", b.mean_prob},
                         {"channel", b.channel}});
    return {{"seed", spec.seed},
            {"shape", std::array<int64_t, 3>{spec.shape.h, spec.shape.w, spec.shape.d}},
            {"noise_sigma", spec.noise_sigma},
            {"lesions", std::move(lesions)},
            {"fp_blobs", std::move(blobs)}};
}

PhantomSpec phantom_from_json(const json& j) {
    require_object(j, "phantom spec");
    check_keys(j, {"seed", "shape", "noise_sigma", "lesions", "fp_blobs"}, "phantom spec");
    PhantomSpec spec;
    const json* shape = find(j, "shape");
    if (!shape) throw ValidationError("phantom spec: missing 'shape'");
    spec.shape = as_shape(*shape, "shape");
    if (const json* v = find(j, "seed")) spec.seed = as_uint(*v, "seed");
    if (const json* v = find(j, "noise_sigma")) spec.noise_sigma = as_double(*v, "noise_sigma");
    if (const json* v = find(j, "lesions")) {
        if (!v->is_array()) throw ValidationError("lesions must be an array");
        for (size_t i = 0; i < v->size(); ++i) {
            const std::string ctx = "lesions[" + std::to_string(i) + "]";
            const json& e = require_object((*v)[i], ctx);
            check_keys(e, {"center", "r_wt", "r_tc", "r_et"}, ctx);
            LesionSpec lesion;
            const json* center = find(e, "center");
            const json* r_wt = find(e, "r_wt");
            const json* r_tc = find(e, "r_tc");
            const json* r_et = find(e, "r_et");
            if (!center || !r_wt || !r_tc || !r_et)
                throw ValidationError(ctx + ": requires center, r_wt, r_tc and r_et");
            lesion.center = as_vec3(*center, ctx + ".center");
            lesion.r_wt = as_vec3(*r_wt, ctx + ".r_wt");
            lesion.r_tc = as_vec3(*r_tc, ctx + ".r_tc");
            lesion.r_et = as_vec3(*r_et, ctx + ".r_et");
            spec.lesions.push_back(lesion);
        }
    }
    if (const json* v = find(j, "fp_blobs")) {
        if (!v->is_array()) throw ValidationError("fp_blobs must be an array");
        for (size_t i = 0; i < v->size(); ++i) {
            const std::string ctx = "fp_blobs[" + std::to_string(i) + "]";
            const json& e = require_object((*v)[i], ctx);
            check_keys(e, {"center", "radius", "mean_prob", "channel"}, ctx);
            FpBlobSpec blob;
            const json* center = find(e, "center");
            const json* radius = find(e, "radius");
            if (!center || !radius) throw ValidationError(ctx + ": requires center and radius");
            blob.center = as_vec3(*center, ctx + ".center");
            blob.radius = as_double(*radius, ctx + ".radius");
            if (const json* p = find(e, "mean_prob")) blob.mean_prob = as_double(*p, ctx + ".mean_prob");
            if (const json* c = find(e, "channel"))
                blob.channel = static_cast<int>(as_int(*c, ctx + ".channel"));
            spec.fp_blobs.push_back(blob);
        }
    }
    spec.validate();
    return spec;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
    return phantom_from_json(load_json_file(path));
}

CorpusSpec corpus_from_json(const json& j) {
    require_object(j, "corpus spec");
    CorpusSpec corpus;
    if (find(j, "cases")) {
        check_keys(j, {"seed", "cases"}, "corpus spec");
        if (const json* v = find(j, "seed")) corpus.seed = as_uint(*v, "seed");
        const json& cases = *find(j, "cases");
        if (!cases.is_array()) throw ValidationError("cases must be an array");
        for (const json& e : cases) corpus.cases.push_back(phantom_from_json(e));
    } else {
        check_keys(j,
                   {"seed", "n_cases", "shape", "noise_sigma", "lesions", "r_wt", "r_tc", "r_et",
                    "fp_blobs", "fp_radius", "fp_mean_prob", "fp_channel"},
                   "corpus spec");
        CorpusSampling& smp = corpus.sampling;
        const json* n_cases = find(j, "n_cases");
        if (!n_cases) throw ValidationError("corpus spec: missing 'n_cases' (or 'cases')");
        smp.n_cases = static_cast<int>(as_int(*n_cases, "n_cases"));
        if (const json* v = find(j, "seed")) corpus.seed = as_uint(*v, "seed");
        if (const json* v = find(j, "shape")) smp.shape = as_shape(*v, "shape");
        if (const json* v = find(j, "noise_sigma")) smp.noise_sigma = as_double(*v, "noise_sigma");
        const auto min_max = [&](const json& v, const std::string& ctx, int& lo, int& hi) {
            require_object(v, ctx);
            check_keys(v, {"min", "max"}, ctx);
            if (const json* m = find(v, "min")) lo = static_cast<int>(as_int(*m, ctx + ".min"));
            if (const json* m = find(v, "max")) hi = static_cast<int>(as_int(*m, ctx + ".max"));
        };
        if (const json* v = find(j, "lesions"))
            min_max(*v, "lesions", smp.lesions_min, smp.lesions_max);
        if (const json* v = find(j, "fp_blobs"))
            min_max(*v, "fp_blobs", smp.fp_blobs_min, smp.fp_blobs_max);
        if (const json* v = find(j, "r_wt")) smp.r_wt_range = as_range(*v, "r_wt");
        if (const json* v = find(j, "r_tc")) smp.r_tc_range = as_range(*v, "r_tc");
        if (const json* v = find(j, "r_et")) smp.r_et_range = as_range(*v, "r_et");
        if (const json* v = find(j, "fp_radius")) smp.fp_radius_range = as_range(*v, "fp_radius");
        if (const json* v = find(j, "fp_mean_prob"))
            smp.fp_mean_prob_range = as_range(*v, "fp_mean_prob");
        if (const json* v = find(j, "fp_channel"))
            smp.fp_channel = static_cast<int>(as_int(*v, "fp_channel"));
    }
    corpus.validate();
    return corpus;
}

CorpusSpec load_corpus_spec(const std::filesystem::path& path) {
    return corpus_from_json(load_json_file(path));
}

SearchGrid grid_from_json(const json& j) {
    require_object(j, "search grid");
    check_keys(j, {"t_tc", "t_wt", "t_et", "tc", "wt", "et", "et_to_tc_min_voxels", "connectivity"},
               "search grid");
    SearchGrid grid;
    if (const json* v = find(j, "t_tc")) grid.t_tc = as_double_list(*v, "t_tc");
    if (const json* v = find(j, "t_wt")) grid.t_wt = as_double_list(*v, "t_wt");
    if (const json* v = find(j, "t_et")) grid.t_et = as_double_list(*v, "t_et");
    const auto filter_grid = [&](const json& v, const std::string& ctx) {
        require_object(v, ctx);
        check_keys(v, {"size_upper", "size_lower", "prob_upper", "prob_mid"}, ctx);
        SearchGrid::FilterGrid g;
        if (const json* e = find(v, "size_upper")) g.size_upper = as_int_list(*e, ctx + ".size_upper");
        if (const json* e = find(v, "size_lower")) g.size_lower = as_int_list(*e, ctx + ".size_lower");
        if (const json* e = find(v, "prob_upper")) g.prob_upper = as_double_list(*e, ctx + ".prob_upper");
        if (const json* e = find(v, "prob_mid")) g.prob_mid = as_double_list(*e, ctx + ".prob_mid");
        return g;
    };
    if (const json* v = find(j, "tc")) grid.tc = filter_grid(*v, "tc");
    if (const json* v = find(j, "wt")) grid.wt = filter_grid(*v, "wt");
    if (const json* v = find(j, "et")) grid.et = filter_grid(*v, "et");
    if (const json* v = find(j, "et_to_tc_min_voxels"))
        grid.et_to_tc_min_voxels = as_int_list(*v, "et_to_tc_min_voxels");
    if (const json* v = find(j, "connectivity")) {
        for (const int64_t c : as_int_list(*v, "connectivity"))
            grid.connectivity.push_back(static_cast<int>(c));
    }
    return grid;
}

SearchGrid load_search_grid(const std::filesystem::path& path) {
    return grid_from_json(load_json_file(path));
}

json crop_meta_to_json(const CropMeta& meta) {
    return {{"original_shape",
             std::array<int64_t, 3>{meta.original_shape.h, meta.original_shape.w,
                                    meta.original_shape.d}},
            {"crop_lo", meta.box.lo},
            {"crop_hi", meta.box.hi}};
}

CropMeta crop_meta_from_json(const json& j) {
    require_object(j, "crop meta");
    check_keys(j, {"original_shape", "crop_lo", "crop_hi"}, "crop meta");
    const json* shape = find(j, "original_shape");
    const json* lo = find(j, "crop_lo");
    const json* hi = find(j, "crop_hi");
    if (!shape || !lo || !hi)
        throw ValidationError("crop meta requires original_shape, crop_lo and crop_hi");
    CropMeta meta;
    meta.original_shape = as_shape(*shape, "original_shape");
    meta.box.lo = as_ivec3(*lo, "crop_lo");
    meta.box.hi = as_ivec3(*hi, "crop_hi");
    for (int a = 0; a < 3; ++a) {
        if (meta.box.lo[a] < 0 || meta.box.hi[a] <= meta.box.lo[a] ||
            meta.box.hi[a] > meta.original_shape.axis(a))
            throw ValidationError("crop meta: box must satisfy 0 <= lo < hi <= original_shape");
    }
    return meta;
}

CropMeta load_crop_meta(const std::filesystem::path& path) {
    return crop_meta_from_json(load_json_file(path));
}

json case_report_to_json(const CaseReport& report) {
    return {{"case_id", report.case_id},
            {"channels", channels_to_json(report.channels)},
            {"mean",
             {{"legacy_dice", report.mean_legacy_dice},
              {"legacy_hd95", report.mean_legacy_hd95},
              {"lesion_dice", report.mean_lesion_dice},
              {"lesion_hd95", report.mean_lesion_hd95}}}};
}

json corpus_report_to_json(const CorpusReport& report) {
    json cases = json::array();
    for (const CaseReport& cr : report.cases) cases.push_back(case_report_to_json(cr));
    json channel_means;
    channel_means["et"] = means_to_json(report.channel_means[kET]);
    channel_means["tc"] = means_to_json(report.channel_means[kTC]);
    channel_means["wt"] = means_to_json(report.channel_means[kWT]);
    return {{"n_cases", report.cases.size()},
            {"channel_means", std::move(channel_means)},
            {"overall", means_to_json(report.overall)},
            {"cases", std::move(cases)}};
}

void write_report_csv(const std::filesystem::path& path, const CorpusReport& report) {
    std::ofstream out(path);
    if (!out.is_open()) throw IoError("cannot open " + path.string() + " for writing");
    out << "case_id,channel,legacy_dice,legacy_hd95,lesion_dice,lesion_hd95,"
           "n_gt,n_pred,n_fn,n_fp\n";
    for (const CaseReport& cr : report.cases)
        for (const int c : {kET, kTC, kWT}) {
            const ChannelReport& ch = cr.channels[static_cast<size_t>(c)];
            out << cr.case_id << ',' << channel_name(c) << ',' << num(ch.legacy_dice) << ','
                << num(ch.legacy_hd95) << ',' << num(ch.lesion.dice) << ',' << num(ch.lesion.hd95)
                << ',' << ch.lesion.n_gt << ',' << ch.lesion.n_pred << ',' << ch.lesion.n_fn << ','
                << ch.lesion.n_fp << '\n';
        }
    if (!out.good()) throw IoError("failed writing " + path.string());
}

json tune_result_to_json(const TuneResult& result) {
    json leaderboard = json::array();
    for (const ScoredConfig& sc : result.leaderboard) leaderboard.push_back(scored_to_json(sc));
    return {{"objective", to_string(result.objective)},
            {"n_candidates", result.n_candidates},
            {"n_cases", result.n_cases},
            {"best", scored_to_json(result.best)},
            {"leaderboard", std::move(leaderboard)}};
}

json manifest_to_json(const RunManifest& manifest) {
    return {{"tool", "segpipe"},
            {"version", SEGPIPE_VERSION},
            {"subcommand", manifest.subcommand},
            {"timestamp_utc", manifest.timestamp_utc},
            {"wall_ms", manifest.wall_ms},
            {"inputs", manifest.inputs},
            {"outputs", manifest.outputs},
            {"config", manifest.config}};
}

void save_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    save_json_file(path, manifest_to_json(manifest));
}

} // namespace segpipe
