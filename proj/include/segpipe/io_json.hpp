#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "segpipe/ensemble.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/phantom.hpp"
#include "segpipe/postprocess.hpp"
#include "segpipe/preprocess.hpp"
#include "segpipe/tuner.hpp"

namespace segpipe {

// File helpers: open/parse problems raise IoError, schema/value problems
// raise ValidationError (unknown keys are rejected to catch typos).
nlohmann::json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const nlohmann::json& value);

nlohmann::json postprocess_to_json(const PostprocessConfig& config);
PostprocessConfig postprocess_from_json(const nlohmann::json& j);
PostprocessConfig load_postprocess_config(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const MetricsConfig& config);
MetricsConfig metrics_from_json(const nlohmann::json& j);
MetricsConfig load_metrics_config(const std::filesystem::path& path);

nlohmann::json weights_to_json(const std::vector<ModelWeights>& weights);
std::vector<ModelWeights> weights_from_json(const nlohmann::json& j);
std::vector<ModelWeights> load_weights(const std::filesystem::path& path);

nlohmann::json phantom_to_json(const PhantomSpec& spec);
PhantomSpec phantom_from_json(const nlohmann::json& j);
PhantomSpec load_phantom_spec(const std::filesystem::path& path);

CorpusSpec corpus_from_json(const nlohmann::json& j);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);

SearchGrid grid_from_json(const nlohmann::json& j);
SearchGrid load_search_grid(const std::filesystem::path& path);

// Foreground crop bookkeeping written by `preprocess` and consumed by
// `postprocess --meta` to place results back into the original frame.
struct CropMeta {
    Shape3 original_shape{1, 1, 1};
    CropBox box;
};

nlohmann::json crop_meta_to_json(const CropMeta& meta);
CropMeta crop_meta_from_json(const nlohmann::json& j);
CropMeta load_crop_meta(const std::filesystem::path& path);

nlohmann::json case_report_to_json(const CaseReport& report);
nlohmann::json corpus_report_to_json(const CorpusReport& report);
void write_report_csv(const std::filesystem::path& path, const CorpusReport& report);

nlohmann::json tune_result_to_json(const TuneResult& result);

// Provenance record written next to every primary output.
struct RunManifest {
    std::string subcommand;
    std::string timestamp_utc;
    double wall_ms = 0.0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::json config = nlohmann::json::object();
};

nlohmann::json manifest_to_json(const RunManifest& manifest);
void save_manifest(const std::filesystem::path& path, const RunManifest& manifest);

} // namespace segpipe
