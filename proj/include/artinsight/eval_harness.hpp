#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artinsight/blob_source.hpp"
#include "artinsight/description_engine.hpp"
#include "artinsight/domain.hpp"
#include "artinsight/rubric_scorer.hpp"

namespace artinsight {

/// Reads a dataset manifest (JSON array of {id, image_path, notes?}; paths
/// relative to the manifest) and stores every image in `blobs`.
/// Throws Error(manifest_error).
std::vector<DatasetItem> load_dataset_manifest(const std::filesystem::path& manifest,
                                               BlobStore& blobs);

/// Mean of totals over scored cells, per model. Throws
/// Error(empty_model_column) when a listed model has no scored cell.
std::map<std::string, double> aggregate(const ComparisonRun& run);

/// Same, but silently skips models without scored cells.
std::map<std::string, double> aggregate_scored(const ComparisonRun& run);

/// Arithmetic mean of scorecard totals. Throws Error(empty_model_column).
double mean_total(std::span<const RubricScorecard> cards);

/// Deterministic id from the run inputs.
std::string derive_run_id(const std::vector<DatasetItem>& dataset,
                          const std::vector<std::string>& models, const RunMetadata& metadata);

struct HarnessOptions {
  int max_concurrency = 4;
  std::optional<std::string> run_id;
  // Called with the finished run, e.g. to persist it.
  std::function<void(const ComparisonRun&)> on_complete;
};

struct ExternalPair {
  std::string id;
  BlobRef image_ref;
  std::string description_text;
};

struct ExternalScore {
  std::string id;
  BlobRef image_ref;
  std::optional<RubricScorecard> scorecard;
  std::optional<std::string> error_code;
  std::optional<std::string> error_message;
};

void to_json(Json& j, const ExternalScore& v);
void from_json(const Json& j, ExternalScore& v);

class EvalHarness {
 public:
  EvalHarness(const DescriptionEngine& engine, const RubricScorer& scorer,
              HarnessOptions options = {});

  /// Describes every image with every model and scores each description.
  /// Failed cells are recorded with their error; throws Error(run_failed) only
  /// when every cell fails, Error(manifest_error) for an empty dataset or
  /// model list.
  ComparisonRun run_comparison(const std::vector<DatasetItem>& dataset,
                               const std::vector<std::string>& models) const;

  /// Scores descriptions produced elsewhere. Results keep input order; item
  /// failures are reported per item.
  std::vector<ExternalScore> score_external_descriptions(
      const std::vector<ExternalPair>& pairs) const;

  RunMetadata metadata() const;

 private:
  const DescriptionEngine& engine_;
  const RubricScorer& scorer_;
  HarnessOptions options_;
};

/// Runs `task(i)` for i in [0, count) on up to `workers` threads and waits.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task);

/// Recomputes cell totals and aggregates after a human override on one cell.
ComparisonRun override_cell(const ComparisonRun& run, const std::string& image_id,
                            const std::string& model_id,
                            const std::map<std::string, int>& corrections,
                            const std::string& note);

struct SpotCheckItem {
  std::string image_id;
  std::string model_id;
  std::string description_text;
  RubricScorecard scorecard;
};

void to_json(Json& j, const SpotCheckItem& v);

/// Uniform random sample (without replacement) of scored cells for human
/// review. Deterministic for a given seed.
std::vector<SpotCheckItem> sample_for_review(const ComparisonRun& run, std::size_t count,
                                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { json, csv, markdown };

ReportFormat parse_report_format(std::string_view name);
std::string render_report(const ComparisonRun& run, ReportFormat format);
/// Throws Error(io_error).
void emit_report(const ComparisonRun& run, ReportFormat format,
                 const std::filesystem::path& path);
ComparisonRun load_run_file(const std::filesystem::path& path);

}  // namespace artinsight
