// stitchbench <command> --config <file> [--seed N] [--workers K] [--out DIR] [--format csv|json|md]
//
// Exit codes: 0 ok, 1 unexpected error, 2 config, 3 training, 4 verification,
// 5 malformed input file.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "stitch/bench/experiment.hpp"
#include "stitch/error.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kTraining = 3, kVerification = 4, kFormat = 5 };

int run(int argc, char** argv) {
  using namespace stitch;
  CLI::App app{"stitchbench: suturing subtask benchmark"};
  app.set_version_flag("--version", "stitchbench 1.0");
  std::string command, config, out, format = "md";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("command", command, "train | eval | demo-gen | bench | hier-eval")
      ->required()
      ->check(CLI::IsMember({"train", "eval", "demo-gen", "bench", "hier-eval"}));
  app.add_option("--config", config, "experiment JSON")->required();
  app.add_option("--seed", seed, "training seed (overrides train.seed)");
  app.add_option("--workers", workers, "parallel evaluation workers")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory (overrides 'out')");
  app.add_option("--format", format, "report format printed to stdout")
      ->check(CLI::IsMember({"csv", "json", "md"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const bench::Command cmd = bench::command_from_string(command);
    bench::ExperimentConfig cfg = bench::load_experiment(config);
    if (seed) {
      cfg.train.seed = *seed;
      if (cfg.hier.llp_train) cfg.hier.llp_train->seed = *seed;
    }
    if (workers) cfg.workers = *workers;
    if (!out.empty()) cfg.out = out;
    const bench::ReportFormat fmt = bench::report_format_from_string(format);

    const bench::RunReport report = bench::run_experiment(cfg, cmd, &std::cerr);
    std::ofstream file(cfg.out / ("report." + std::string(bench::extension(fmt))));
    bench::emit_report(file, report, fmt);
    bench::emit_report(std::cout, report, fmt);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    return kTraining;
  } catch (const VerificationError& e) {
    std::cerr << "verification error: " << e.what() << '\n';
    return kVerification;
  } catch (const bench::JobFailure& e) {
    std::cerr << "evaluation error: " << e.what() << '\n';
    return kVerification;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
