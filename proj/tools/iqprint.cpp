// iqprint command-line front end.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "iqprint/cli/commands.hpp"

namespace {

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "error: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RF device fingerprinting from raw I/Q captures"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override every seed in the configuration");
  app.add_option("--threads", threads, "worker threads for evaluation")->check(CLI::Range(1, 256));

  auto* gen = app.add_subcommand("generate", "synthesize a labeled SigMF dataset");
  auto* pre = app.add_subcommand("preprocess", "build the preprocessed window store");
  auto* tr = app.add_subcommand("train", "train a model and write checkpoint + history");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* fp = app.add_subcommand("fingerprint", "rank device classes for one capture");
  std::string capture;
  fp->add_option("capture", capture, "SigMF capture (base path, .sigmf-meta or .sigmf-data)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    iqprint::RunConfig cfg = config_path.empty() ? iqprint::RunConfig{} : iqprint::load_config(config_path);
    if (seed) iqprint::cli::apply_seed(cfg, *seed);
    if (gen->parsed()) iqprint::cli::cmd_generate(cfg);
    if (pre->parsed()) iqprint::cli::cmd_preprocess(cfg);
    if (tr->parsed()) iqprint::cli::cmd_train(cfg);
    if (ev->parsed()) iqprint::cli::cmd_eval(cfg, threads);
    if (fp->parsed()) iqprint::cli::cmd_fingerprint(cfg, capture);
  } catch (const iqprint::ConfigError& e) {
    return report_error("config", e, 2);
  } catch (const iqprint::IoError& e) {
    return report_error("io", e, 3);
  } catch (const iqprint::FormatError& e) {
    return report_error("format", e, 3);
  } catch (const iqprint::DivergenceError& e) {
    return report_error("divergence", e, 4);
  } catch (const iqprint::Error& e) {
    return report_error("failed", e, 1);
  } catch (const std::exception& e) {
    return report_error("internal", e, 1);
  }
  return 0;
}
