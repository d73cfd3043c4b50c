// artinsight: serve the API, describe artwork, and run rubric evaluations.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "artinsight/api_service.hpp"
#include "artinsight/config.hpp"
#include "artinsight/eval_harness.hpp"
#include "artinsight/hashing.hpp"
#include "artinsight/media.hpp"
#include "artinsight/prompts.hpp"

namespace fs = std::filesystem;
using namespace artinsight;

namespace {

struct GlobalOptions {
  std::string config_path;
  bool mock = false;
  std::string store_root;
  bool verbose = false;
  std::string record_dir;
  std::string replay_dir;
};

AppConfig resolve_config(const GlobalOptions& g) {
  AppConfig c = g.mock ? mock_config() : default_config();
  if (!g.config_path.empty()) c = load_config(g.config_path);
  c.store_root = SessionStore::default_root(c.store_root);
  if (!g.store_root.empty()) c.store_root = g.store_root;
  return c;
}

Bytes read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot read {}", p.string()));
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  write_file_atomic(path, text);
}

// Owns the long-lived objects every command needs.
struct Context {
  AppConfig config;
  std::unique_ptr<Gateway> gateway;
  PromptBundle bundle;

  explicit Context(const GlobalOptions& g) : config(resolve_config(g)) {
    gateway = std::make_unique<Gateway>();
    register_providers(*gateway, config.providers);
    if (!g.replay_dir.empty()) {
      fs::path dir = g.replay_dir;
      gateway->wrap_providers([dir](const std::string& id, std::shared_ptr<Provider>) {
        return std::make_shared<ReplayProvider>(id, dir);
      });
    } else if (!g.record_dir.empty()) {
      fs::path dir = g.record_dir;
      fs::create_directories(dir);
      gateway->wrap_providers([dir](const std::string& id, std::shared_ptr<Provider> inner) {
        return std::make_shared<RecordingProvider>(id, std::move(inner), dir);
      });
    }
    bundle = config.prompt_dir ? PromptBundle::load(*config.prompt_dir) : PromptBundle::canonical();
    if (!bundle.matches_canonical()) {
      spdlog::warn("prompt bundle {} differs from the canonical prompts", bundle.revision);
    }
  }

  fs::path scorer_bundle(const std::string& override_path) const {
    if (!override_path.empty()) return override_path;
    if (config.scorer_bundle) return *config.scorer_bundle;
    throw Error(ErrorCode::no_exemplars,
                "no scorer exemplar bundle: pass --scorer-bundle or set scorer.exemplar_bundle");
  }
};

std::map<std::string, int> parse_corrections(const std::vector<std::string>& items) {
  std::map<std::string, int> out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::invalid_value, fmt::format("expected key=value, got '{}'", item));
    }
    try {
      out[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_value, fmt::format("bad score in '{}'", item));
    }
  }
  return out;
}

std::vector<std::string> split_models(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

ApiService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ArtInsight: accessible descriptions of children's artwork"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "JSON configuration file");
  app.add_flag("--mock", g.mock, "Route every model to the offline synthetic provider");
  app.add_option("--store", g.store_root, "Session store directory (default $ARTINSIGHT_STORE)");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  auto add_record_replay = [&](CLI::App* cmd) {
    auto* rec = cmd->add_option("--record", g.record_dir, "Record provider exchanges to DIR");
    auto* rep = cmd->add_option("--replay", g.replay_dir, "Answer provider calls from DIR only");
    rec->excludes(rep);
  };

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host;
  int port = -1;
  std::string static_dir;
  serve->add_option("--host", host);
  serve->add_option("--port", port, "0 picks a free port");
  serve->add_option("--static-dir", static_dir, "Directory of web assets to serve at /");

  // describe
  auto* describe = app.add_subcommand("describe", "Describe one image and print the JSON result");
  std::string image_path, model, transcript;
  describe->add_option("image", image_path)->required()->check(CLI::ExistingFile);
  describe->add_option("--model", model);
  describe->add_option("--transcript", transcript, "The artist's own words to integrate");
  add_record_replay(describe);

  // eval
  auto* eval = app.add_subcommand("eval", "Model comparison and rubric scoring");
  eval->require_subcommand(1);
  std::string manifest, models, scorer_bundle, out_path, run_id, format = "json", judge;
  int concurrency = 4;
  bool save_run = false;

  auto* run = eval->add_subcommand("run", "Describe every dataset image with every model and score");
  run->add_option("--manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  run->add_option("--models", models, "Comma-separated model ids")->required();
  run->add_option("--scorer-bundle", scorer_bundle, "Exemplar manifest");
  run->add_option("--judge", judge, "Judge model id");
  run->add_option("--out", out_path, "Write the report here (default stdout)");
  run->add_option("--format", format, "json | csv | markdown");
  run->add_option("--concurrency", concurrency);
  run->add_option("--run-id", run_id);
  run->add_flag("--save", save_run, "Also store the run in the session store");
  add_record_replay(run);

  std::string pairs_path;
  auto* pairs = eval->add_subcommand("score-pairs", "Score externally produced descriptions");
  pairs->add_option("--pairs", pairs_path, "JSON array of {id, image_path, description}")
      ->required()
      ->check(CLI::ExistingFile);
  pairs->add_option("--scorer-bundle", scorer_bundle);
  pairs->add_option("--judge", judge);
  pairs->add_option("--out", out_path);
  pairs->add_option("--concurrency", concurrency);
  add_record_replay(pairs);

  std::string run_path;
  auto* report = eval->add_subcommand("report", "Render a stored run");
  report->add_option("--run", run_path, "Run JSON file")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format);
  report->add_option("--out", out_path);

  std::size_t sample_count = 5;
  std::uint64_t seed = 1;
  auto* spot = eval->add_subcommand("spot-check", "Sample scored cells for human review");
  spot->add_option("--run", run_path)->required()->check(CLI::ExistingFile);
  spot->add_option("--count", sample_count);
  spot->add_option("--seed", seed);

  std::string image_id, note;
  std::vector<std::string> corrections;
  auto* override_cmd = eval->add_subcommand("override", "Apply a human correction to one cell");
  override_cmd->add_option("--run", run_path)->required()->check(CLI::ExistingFile);
  override_cmd->add_option("--image", image_id)->required();
  override_cmd->add_option("--model", model)->required();
  override_cmd->add_option("--set", corrections, "category=score (repeatable)")->required();
  override_cmd->add_option("--note", note)->required();
  override_cmd->add_option("--out", out_path, "Default: overwrite --run");

  // sessions
  auto* sessions = app.add_subcommand("sessions", "Inspect the session store");
  sessions->require_subcommand(1);
  std::size_t page = 0;
  std::string session_id;
  bool erase_blobs = false;
  auto* list = sessions->add_subcommand("list");
  list->add_option("--page", page);
  auto* show = sessions->add_subcommand("show");
  show->add_option("id", session_id)->required();
  auto* purge = sessions->add_subcommand("purge", "Delete a session");
  purge->add_option("id", session_id)->required();
  purge->add_flag("--erase-blobs", erase_blobs, "Also delete its unshared image and audio");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "Print the assembled description prompt");
  prompt->add_option("--transcript", transcript);
  bool revision_only = false;
  prompt->add_flag("--revision", revision_only, "Print only the prompt revision hash");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("artinsight"));
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*prompt) {
      AppConfig c = resolve_config(g);
      PromptBundle b = c.prompt_dir ? PromptBundle::load(*c.prompt_dir) : PromptBundle::canonical();
      if (revision_only) {
        fmt::print("{}\n", b.revision);
      } else {
        std::optional<std::string_view> t;
        if (!transcript.empty()) t = transcript;
        fmt::print("{}\n", assemble_prompt(b, t));
      }
      return 0;
    }

    if (*sessions) {
      AppConfig c = resolve_config(g);
      SessionStore store(c.store_root, c.store);
      if (*list) {
        fmt::print("{}\n", Json(store.list_sessions(page)).dump(2));
      } else if (*show) {
        fmt::print("{}\n", Json(store.load_session(session_id)).dump(2));
      } else if (*purge) {
        store.purge_session(session_id, erase_blobs);
        spdlog::info("purged session {}", session_id);
      }
      return 0;
    }

    if (*report) {
      ComparisonRun r = load_run_file(run_path);
      write_output(render_report(r, parse_report_format(format)), out_path);
      return 0;
    }
    if (*spot) {
      Json items = sample_for_review(load_run_file(run_path), sample_count, seed);
      fmt::print("{}\n", items.dump(2));
      return 0;
    }
    if (*override_cmd) {
      ComparisonRun r = override_cell(load_run_file(run_path), image_id, model,
                                      parse_corrections(corrections), note);
      emit_report(r, ReportFormat::json, out_path.empty() ? run_path : out_path);
      return 0;
    }

    Context ctx(g);

    if (*serve) {
      if (!host.empty()) ctx.config.service.host = host;
      if (port >= 0) ctx.config.service.port = port;
      if (!static_dir.empty()) ctx.config.service.static_dir = fs::path(static_dir);
      SessionStore store(ctx.config.store_root, ctx.config.store);
      DescriptionEngine engine(*ctx.gateway, store, ctx.bundle, ctx.config.engine);
      TranscriptionService transcription(make_transcriber(ctx.config.transcription),
                                         ctx.config.transcription.config);
      ApiService service(store, engine, transcription, ctx.config.service);
      int bound = service.bind();
      spdlog::info("serving on http://{}:{} (store {}); no authentication, keep it local",
                   ctx.config.service.host, bound, ctx.config.store_root.string());
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      g_service = nullptr;
      service.wait_idle();
      return 0;
    }

    MemoryBlobStore blobs;

    if (*describe) {
      Bytes bytes = read_bytes(image_path);
      auto fmt_ = detect_image(bytes);
      if (!fmt_) throw Error(ErrorCode::bad_image, "not a valid PNG or JPEG image", image_path);
      BlobRef ref = blobs.put_blob(bytes, std::string(media_type(*fmt_)));
      DescriptionEngine engine(*ctx.gateway, blobs, ctx.bundle, ctx.config.engine);
      std::optional<std::string> m;
      if (!model.empty()) m = model;
      std::optional<std::string> t;
      if (!transcript.empty()) t = transcript;
      fmt::print("{}\n", Json(engine.analyze_artwork(ref, m, t)).dump(2));
      return 0;
    }

    if (!judge.empty()) ctx.config.scorer.judge_model_id = judge;
    DescriptionEngine engine(*ctx.gateway, blobs, ctx.bundle, ctx.config.engine);
    RubricScorer scorer(*ctx.gateway, blobs, load_exemplar_bundle(ctx.scorer_bundle(scorer_bundle)),
                        ctx.config.scorer);
    HarnessOptions options;
    options.max_concurrency = concurrency;
    if (!run_id.empty()) options.run_id = run_id;
    EvalHarness harness(engine, scorer, options);

    if (*run) {
      auto dataset = load_dataset_manifest(manifest, blobs);
      ComparisonRun result = harness.run_comparison(dataset, split_models(models));
      if (save_run) {
        SessionStore store(ctx.config.store_root, ctx.config.store);
        store.save_run(result);
      }
      write_output(render_report(result, parse_report_format(format)), out_path);
      std::size_t failed = 0;
      for (const auto& cell : result.cells) failed += cell.status == CellStatus::failed;
      if (failed > 0) spdlog::warn("{} of {} cells failed", failed, result.cells.size());
      return failed > 0 ? 3 : 0;
    }

    if (*pairs) {
      std::ifstream in(pairs_path, std::ios::binary);
      Json doc = Json::parse(in, nullptr, false);
      if (doc.is_discarded() || !doc.is_array()) {
        throw Error(ErrorCode::manifest_error, "pairs file must be a JSON array", pairs_path);
      }
      std::vector<ExternalPair> items;
      const fs::path base = fs::path(pairs_path).parent_path();
      for (const auto& e : doc) {
        fs::path img = e.at("image_path").get<std::string>();
        Bytes bytes = read_bytes(img.is_absolute() ? img : base / img);
        auto f = detect_image(bytes);
        BlobRef ref =
            blobs.put_blob(bytes, f ? std::string(media_type(*f)) : "application/octet-stream");
        items.push_back({e.at("id").get<std::string>(), ref, e.at("description").get<std::string>()});
      }
      Json out = harness.score_external_descriptions(items);
      write_output(out.dump(2) + "\n", out_path);
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}{}: {}", to_string(e.code()), e.field().empty() ? "" : " (" + e.field() + ")",
                  e.message());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
