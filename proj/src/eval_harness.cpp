#include "artinsight/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "artinsight/media.hpp"

namespace artinsight {

namespace fs = std::filesystem;

std::vector<DatasetItem> load_dataset_manifest(const fs::path& manifest, BlobStore& blobs) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error(ErrorCode::manifest_error, fmt::format("cannot read {}", manifest.string()));
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw Error(ErrorCode::manifest_error, "manifest must be a JSON array", manifest.string());
  }
  if (doc.empty()) throw Error(ErrorCode::manifest_error, "manifest lists no images");
  std::vector<DatasetItem> items;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string where = fmt::format("[{}]", i);
    if (!e.is_object() || !e.contains("id") || !e.contains("image_path")) {
      throw Error(ErrorCode::manifest_error, "entry needs id and image_path", where);
    }
    DatasetItem item;
    item.id = e["id"].is_string() ? e["id"].get<std::string>() : e["id"].dump();
    item.image_path = e["image_path"].get<std::string>();
    if (e.contains("notes") && e["notes"].is_string()) item.notes = e["notes"].get<std::string>();
    if (!seen.insert(item.id).second) {
      throw Error(ErrorCode::manifest_error, fmt::format("duplicate id '{}'", item.id), where);
    }
    fs::path path = fs::path(item.image_path).is_absolute()
                        ? fs::path(item.image_path)
                        : manifest.parent_path() / item.image_path;
    std::ifstream img(path, std::ios::binary);
    if (!img) throw Error(ErrorCode::manifest_error, fmt::format("cannot read {}", path.string()), where);
    Bytes bytes((std::istreambuf_iterator<char>(img)), std::istreambuf_iterator<char>());
    auto format = detect_image(bytes);
    item.image_ref = blobs.put_blob(
        bytes, format ? std::string(media_type(*format)) : "application/octet-stream");
    items.push_back(std::move(item));
  }
  return items;
}

std::map<std::string, double> aggregate_scored(const ComparisonRun& run) {
  std::map<std::string, std::pair<long, long>> sums;  // total, count
  for (const auto& cell : run.cells) {
    if (cell.status != CellStatus::scored || !cell.scorecard) continue;
    auto& [total, count] = sums[cell.model_id];
    total += cell.scorecard->total;
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [model, tc] : sums) {
    out[model] = static_cast<double>(tc.first) / static_cast<double>(tc.second);
  }
  return out;
}

std::map<std::string, double> aggregate(const ComparisonRun& run) {
  auto out = aggregate_scored(run);
  for (const auto& model : run.models) {
    if (!out.contains(model)) {
      throw Error(ErrorCode::empty_model_column,
                  fmt::format("model '{}' has no scored cells", model), model);
    }
  }
  return out;
}

double mean_total(std::span<const RubricScorecard> cards) {
  if (cards.empty()) throw Error(ErrorCode::empty_model_column, "no scorecards to average");
  long sum = 0;
  for (const auto& c : cards) sum += c.total;
  return static_cast<double>(sum) / static_cast<double>(cards.size());
}

std::string derive_run_id(const std::vector<DatasetItem>& dataset,
                          const std::vector<std::string>& models, const RunMetadata& metadata) {
  Json key{{"dataset", dataset}, {"models", models}, {"metadata", metadata}};
  return "run-" + sha256_hex(key.dump()).substr(0, 20);
}

void to_json(Json& j, const ExternalScore& v) {
  j = Json{{"id", v.id}, {"image_ref", v.image_ref}};
  if (v.scorecard) j["scorecard"] = *v.scorecard;
  if (v.error_code) j["error_code"] = *v.error_code;
  if (v.error_message) j["error_message"] = *v.error_message;
}

void from_json(const Json& j, ExternalScore& v) {
  v.id = j.at("id").get<std::string>();
  v.image_ref = j.at("image_ref").get<BlobRef>();
  if (j.contains("scorecard")) v.scorecard = j["scorecard"].get<RubricScorecard>();
  if (j.contains("error_code")) v.error_code = j["error_code"].get<std::string>();
  if (j.contains("error_message")) v.error_message = j["error_message"].get<std::string>();
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  std::size_t n = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < count; i = next++) task(i);
  };
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(drain);
  drain();
}

EvalHarness::EvalHarness(const DescriptionEngine& engine, const RubricScorer& scorer,
                         HarnessOptions options)
    : engine_(engine), scorer_(scorer), options_(std::move(options)) {}

RunMetadata EvalHarness::metadata() const {
  RunMetadata m;
  m.prompt_revision = engine_.bundle().revision;
  m.scorer_exemplar_hash = scorer_.exemplar_hash();
  m.judge_model_id = scorer_.config().judge_model_id;
  m.exemplar_count = static_cast<int>(scorer_.exemplar_count());
  m.exemplar_mode = std::string(scorer_.exemplar_mode());
  return m;
}

ComparisonRun EvalHarness::run_comparison(const std::vector<DatasetItem>& dataset,
                                          const std::vector<std::string>& models) const {
  if (dataset.empty()) throw Error(ErrorCode::manifest_error, "dataset is empty", "dataset");
  if (models.empty()) throw Error(ErrorCode::manifest_error, "no models given", "models");

  ComparisonRun run;
  run.dataset = dataset;
  run.models = models;
  run.metadata = metadata();
  run.run_id = options_.run_id.value_or(derive_run_id(dataset, models, run.metadata));
  run.cells.resize(dataset.size() * models.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto& cell = run.cells[i * models.size() + m];
      cell.image_id = dataset[i].id;
      cell.image_ref = dataset[i].image_ref;
      cell.model_id = models[m];
    }
  }

  parallel_for(run.cells.size(), options_.max_concurrency, [&](std::size_t index) {
    auto& cell = run.cells[index];
    try {
      AnalysisResult analysis = engine_.analyze_artwork(cell.image_ref, cell.model_id);
      cell.description_text = analysis.descriptive.text;
      cell.scorecard = scorer_.score_description(cell.image_ref, cell.description_text);
      cell.status = CellStatus::scored;
    } catch (const Error& e) {
      cell.status = CellStatus::failed;
      cell.scorecard.reset();
      cell.error_code = std::string(to_string(e.code()));
      cell.error_message = e.message();
    } catch (const std::exception& e) {
      cell.status = CellStatus::failed;
      cell.scorecard.reset();
      cell.error_code = "internal";
      cell.error_message = e.what();
    }
    if (cell.status == CellStatus::failed) {
      spdlog::warn("cell ({}, {}) failed: {}", cell.image_id, cell.model_id, *cell.error_message);
    }
  });

  bool any_scored = std::any_of(run.cells.begin(), run.cells.end(),
                                [](const ComparisonCell& c) { return c.status == CellStatus::scored; });
  if (!any_scored) {
    throw Error(ErrorCode::run_failed,
                fmt::format("all {} cells failed; first error: {}", run.cells.size(),
                            run.cells.front().error_message.value_or("?")));
  }
  run.aggregates = aggregate_scored(run);
  if (options_.on_complete) options_.on_complete(run);
  return run;
}

std::vector<ExternalScore> EvalHarness::score_external_descriptions(
    const std::vector<ExternalPair>& pairs) const {
  std::vector<ExternalScore> out(pairs.size());
  parallel_for(pairs.size(), options_.max_concurrency, [&](std::size_t i) {
    auto& result = out[i];
    result.id = pairs[i].id;
    result.image_ref = pairs[i].image_ref;
    try {
      result.scorecard = scorer_.score_description(pairs[i].image_ref, pairs[i].description_text);
    } catch (const Error& e) {
      result.error_code = std::string(to_string(e.code()));
      result.error_message = e.message();
    } catch (const std::exception& e) {
      result.error_code = "internal";
      result.error_message = e.what();
    }
  });
  return out;
}

ComparisonRun override_cell(const ComparisonRun& run, const std::string& image_id,
                            const std::string& model_id,
                            const std::map<std::string, int>& corrections,
                            const std::string& note) {
  ComparisonRun next = run;
  ComparisonCell* cell = next.find_cell(image_id, model_id);
  if (cell == nullptr) {
    throw Error(ErrorCode::not_found, fmt::format("no cell ({}, {})", image_id, model_id));
  }
  if (cell->status != CellStatus::scored || !cell->scorecard) {
    throw Error(ErrorCode::invalid_state, "only scored cells can be overridden", "status");
  }
  cell->scorecard = apply_human_override(*cell->scorecard, corrections, note);
  next.aggregates = aggregate_scored(next);
  return next;
}

void to_json(Json& j, const SpotCheckItem& v) {
  j = Json{{"image_id", v.image_id},
           {"model_id", v.model_id},
           {"description_text", v.description_text},
           {"scorecard", v.scorecard}};
}

std::vector<SpotCheckItem> sample_for_review(const ComparisonRun& run, std::size_t count,
                                             std::uint64_t seed) {
  std::vector<const ComparisonCell*> scored;
  for (const auto& c : run.cells) {
    if (c.status == CellStatus::scored && c.scorecard) scored.push_back(&c);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(scored.begin(), scored.end(), rng);
  scored.resize(std::min(count, scored.size()));
  std::vector<SpotCheckItem> out;
  for (const auto* c : scored) {
    out.push_back({c->image_id, c->model_id, c->description_text, *c->scorecard});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string joined_rationale(const RubricScorecard& card) {
  std::string out;
  for (const auto& [key, text] : card.rationale) {
    if (text.empty()) continue;
    if (!out.empty()) out += " | ";
    out += key + ": " + text;
  }
  return out;
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string render_csv(const ComparisonRun& run) {
  std::string out =
      "row_type,image_id,model_id,status,presumptive,reductive,detail,coverage,"
      "misc_subtraction,total,scored_by,rationale,error\n";
  for (const auto& c : run.cells) {
    if (c.scorecard) {
      const auto& s = *c.scorecard;
      out += fmt::format("cell,{},{},{},{},{},{},{},{},{},{},{},\n", csv_field(c.image_id),
                         csv_field(c.model_id), to_string(c.status), s.presumptive, s.reductive,
                         s.detail, s.coverage, s.misc_subtraction, s.total, to_string(s.scored_by),
                         csv_field(joined_rationale(s)));
    } else {
      out += fmt::format("cell,{},{},{},,,,,,,,,{}\n", csv_field(c.image_id),
                         csv_field(c.model_id), to_string(c.status),
                         csv_field(c.error_code.value_or("") + ": " + c.error_message.value_or("")));
    }
  }
  for (const auto& model : run.models) {
    auto it = run.aggregates.find(model);
    if (it == run.aggregates.end()) continue;
    out += fmt::format("aggregate,,{},mean,,,,,,{:.2f},,,\n", csv_field(model), it->second);
  }
  const std::pair<const char*, std::string> meta[] = {
      {"run_id", run.run_id},
      {"prompt_revision", run.metadata.prompt_revision},
      {"scorer_exemplar_hash", run.metadata.scorer_exemplar_hash},
      {"judge_model_id", run.metadata.judge_model_id},
      {"exemplar_mode", run.metadata.exemplar_mode},
  };
  for (const auto& [key, value] : meta) {
    out += fmt::format("meta,{},{},,,,,,,,,,\n", key, csv_field(value));
  }
  return out;
}

std::string render_markdown(const ComparisonRun& run) {
  std::string out = fmt::format("# Model comparison `{}`\n\n", run.run_id);
  out += fmt::format("- Prompt revision: `{}`\n", run.metadata.prompt_revision);
  out += fmt::format("- Scorer exemplars: {} (`{}`, {})\n", run.metadata.exemplar_count,
                     run.metadata.scorer_exemplar_hash, run.metadata.exemplar_mode);
  out += fmt::format("- Judge model: `{}`\n", run.metadata.judge_model_id);
  out += fmt::format("- Images: {}, models: {}\n\n", run.dataset.size(), run.models.size());

  out += "| Image ID |";
  for (const auto& m : run.models) out += fmt::format(" {} |", md_cell(m));
  out += "\n|---|";
  for (std::size_t i = 0; i < run.models.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& item : run.dataset) {
    out += fmt::format("| {} |", md_cell(item.id));
    for (const auto& m : run.models) {
      const auto* c = run.find_cell(item.id, m);
      if (c == nullptr) {
        out += " - |";
      } else if (c->scorecard) {
        out += fmt::format(" {} |", c->scorecard->total);
      } else {
        out += " failed |";
      }
    }
    out += "\n";
  }
  out += "| Average |";
  for (const auto& m : run.models) {
    auto it = run.aggregates.find(m);
    out += it == run.aggregates.end() ? std::string(" - |") : fmt::format(" {:.2f} |", it->second);
  }
  out += "\n";

  bool header = false;
  for (const auto& c : run.cells) {
    if (!c.scorecard || c.scorecard->total == kTotalMax) continue;
    if (!header) {
      out += "\n## Points lost\n\n";
      header = true;
    }
    const auto& s = *c.scorecard;
    out += fmt::format("- **{} / {}**: {}/{} (A {}, B {}, C {}, D {}, misc -{}){}\n",
                       md_cell(c.image_id), md_cell(c.model_id), s.total, kTotalMax,
                       s.presumptive, s.reductive, s.detail, s.coverage, s.misc_subtraction,
                       s.rationale.empty() ? "" : " | " + md_cell(joined_rationale(s)));
  }
  bool failures = false;
  for (const auto& c : run.cells) {
    if (c.status != CellStatus::failed) continue;
    if (!failures) {
      out += "\n## Failed cells\n\n";
      failures = true;
    }
    out += fmt::format("- {} / {}: {}\n", md_cell(c.image_id), md_cell(c.model_id),
                       md_cell(c.error_message.value_or("")));
  }
  return out;
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  throw Error(ErrorCode::invalid_value, fmt::format("unknown report format '{}'", name), "format");
}

std::string render_report(const ComparisonRun& run, ReportFormat format) {
  switch (format) {
    case ReportFormat::json:
      return Json(run).dump(2) + "\n";
    case ReportFormat::csv:
      return render_csv(run);
    case ReportFormat::markdown:
      return render_markdown(run);
  }
  return {};
}

void emit_report(const ComparisonRun& run, ReportFormat format, const fs::path& path) {
  std::string text = render_report(run, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write {}", path.string()));
}

ComparisonRun load_run_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot read {}", path.string()));
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::parse_error, "run file is not JSON", path.string());
  return decode<ComparisonRun>(doc);
}

}  // namespace artinsight
