// SPDX-License-Identifier: Apache-2.0
// Command-line front end for the consistency pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sage/config.hpp"
#include "sage/pipeline.hpp"

namespace {

struct Globals {
  std::string config;
  std::string endpoint;
  std::string cache_dir;
  std::optional<std::size_t> concurrency;
  bool offline = false;
  std::string stub_mode;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models;
  std::string metrics;
  std::string target;
};

sage::RunConfig resolve(const Globals& g) {
  sage::RunConfig cfg = g.config.empty() ? sage::RunConfig{} : sage::load_config(g.config);
  if (auto e = sage::env("SAGE_ENDPOINT")) cfg.endpoint = *e;
  if (!g.endpoint.empty()) cfg.endpoint = g.endpoint;
  if (!g.cache_dir.empty()) cfg.cache_dir = g.cache_dir;
  if (g.concurrency) cfg.concurrency = *g.concurrency;
  if (g.offline) cfg.offline = true;
  if (!g.stub_mode.empty()) cfg.stub.mode = sage::parse_stub_mode(g.stub_mode);
  if (g.seed) cfg.stub.seed = *g.seed;
  if (!g.models.empty()) cfg.target_models = g.models;
  if (!g.metrics.empty()) {
    cfg.metrics.clear();
    std::string_view rest = g.metrics;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      cfg.metrics.push_back(sage::parse_metric(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  if (!g.target.empty()) cfg.target = sage::parse_target_selection(g.target);
  cfg.validate();
  return cfg;
}

void report_skips(const std::vector<sage::SkipRow>& skipped) {
  for (const auto& s : skipped) {
    std::cerr << "skipped " << s.question_id;
    if (!s.model.empty()) std::cerr << " [" << s.model << (s.target.empty() ? "" : "/" + s.target) << "]";
    std::cerr << ": " << s.reason << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic consistency scoring for language model answers"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "sage 0.1.0");

  Globals g;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--endpoint", g.endpoint, "OpenAI-compatible base URL (overrides SAGE_ENDPOINT)");
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_option("--concurrency", g.concurrency, "Maximum in-flight provider calls");
  app.add_flag("--offline", g.offline, "Use deterministic stub providers");
  app.add_option("--stub-mode", g.stub_mode, "Stub behaviour: fixed, constant, digest, temperature");
  app.add_option("--seed", g.seed, "Stub seed");
  app.add_option("--model", g.models, "Target model id (repeatable)");
  app.add_option("--metrics", g.metrics, "Comma-separated metrics: bleu, rouge-l, semantic-cosine-cons, sage");
  app.add_option("--target", g.target, "answers, rots or both");

  std::string in, out, rots, embeddings, annotations, aggregation = "entropy", mode = "same-question", sweep_model;
  std::string out_dir = "report";

  auto* para = app.add_subcommand("paraphrase", "Generate and filter paraphrases");
  para->add_option("questions", in, "questions.jsonl")->required()->check(CLI::ExistingFile);
  para->add_option("-o,--out", out, "Output paraphrase groups")->required();

  auto* gen = app.add_subcommand("generate", "Answer every retained paraphrase");
  gen->add_option("paraphrases", in, "paraphrases.jsonl")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out, "Output records")->required();

  auto* rot = app.add_subcommand("rot", "Write a rule of thumb per answer");
  rot->add_option("records", in, "records.jsonl")->required()->check(CLI::ExistingFile);
  rot->add_option("-o,--out", out, "Output records (may equal the input)")->required();

  auto* rota = app.add_subcommand("rot-answer", "Answer with a fixed rule of thumb in the prompt");
  rota->add_option("records", in, "records.jsonl")->required()->check(CLI::ExistingFile);
  rota->add_option("--rots", rots, "rots.jsonl")->required()->check(CLI::ExistingFile);
  rota->add_option("-o,--out", out, "Output records")->required();

  auto* score = app.add_subcommand("score", "Score records and write reports");
  score->add_option("records", in, "records.jsonl")->required()->check(CLI::ExistingFile);
  score->add_option("-o,--out-dir", out_dir, "Report directory");
  score->add_option("--embeddings", embeddings, "Embedding sidecar (default <out-dir>/embeddings.jsonl)");

  auto* sweep = app.add_subcommand("sweep", "Consistency across a temperature grid");
  sweep->add_option("questions", in, "questions.jsonl")->required()->check(CLI::ExistingFile);
  sweep->add_option("--mode", mode, "same-question or paraphrase");
  sweep->add_option("--sweep-model", sweep_model, "Model to sweep (default: first target model)");
  sweep->add_option("-o,--out-dir", out_dir, "Report directory");

  auto* corr = app.add_subcommand("correlate", "Correlate scores with human annotations");
  corr->add_option("scores", in, "scores.csv from the score stage")->required()->check(CLI::ExistingFile);
  corr->add_option("--annotations", annotations, "annotations.jsonl")->required()->check(CLI::ExistingFile);
  corr->add_option("--aggregation", aggregation, "entropy or mean");
  corr->add_option("-o,--out-dir", out_dir, "Report directory");

  auto* val = app.add_subcommand("validate", "Check a records file against the schema");
  val->add_option("records", in, "records.jsonl")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (val->parsed()) {
      const auto problems = sage::cmd_validate(in);
      for (const auto& p : problems) std::cout << p << '\n';
      if (!problems.empty()) return 1;
      std::cout << in << ": ok\n";
      return 0;
    }
    if (corr->parsed()) {
      const auto r = sage::cmd_correlate(in, annotations, sage::parse_aggregation(aggregation), out_dir);
      for (const auto& s : r.skipped) std::cerr << "skipped " << s << '\n';
      const auto anns = sage::load_annotations(annotations);
      std::cerr << "krippendorff alpha (nominal) " << sage::krippendorff_alpha(anns) << " over " << anns.size()
                << " annotated pairs\n";
      std::cout << sage::render(sage::correlations_table(r), sage::ReportFormat::kMarkdown);
      return 0;
    }

    const auto cfg = resolve(g);
    auto gw = sage::make_gateway(cfg);

    if (para->parsed()) {
      const auto s = sage::cmd_paraphrase(cfg, *gw, in, out);
      report_skips(s.skipped);
      std::cerr << s.processed << " questions, " << s.skipped.size() << " flagged\n";
    } else if (gen->parsed()) {
      const auto s = sage::cmd_generate(cfg, *gw, in, out);
      report_skips(s.skipped);
      std::cerr << s.processed << " records written\n";
    } else if (rot->parsed()) {
      const auto s = sage::cmd_rot(cfg, *gw, in, out);
      std::cerr << s.processed << " records written\n";
    } else if (rota->parsed()) {
      const auto s = sage::cmd_rot_answer(cfg, *gw, in, rots, out);
      report_skips(s.skipped);
      std::cerr << s.processed << " records conditioned\n";
    } else if (score->parsed()) {
      sage::ScoreOptions so;
      so.out_dir = out_dir;
      so.embeddings = embeddings;
      const auto r = sage::cmd_score(cfg, *gw, in, so);
      report_skips(r.skipped);
      std::cout << sage::render(sage::aggregates_table(r), sage::ReportFormat::kMarkdown);
    } else if (sweep->parsed()) {
      const auto r = sage::cmd_sweep(cfg, *gw, in, sage::parse_sweep_mode(mode), sweep_model, out_dir);
      report_skips(r.skipped);
      std::cout << sage::render(sage::sweep_table(r), sage::ReportFormat::kMarkdown);
    }
    const auto st = gw->stats();
    std::cerr << "provider calls " << st.provider_calls << ", cache hits " << st.cache_hits << ", retries "
              << st.retries << '\n';
    return 0;
  } catch (const sage::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sage::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const sage::RetryExhaustedError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return 3;
  } catch (const sage::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
