#include <iostream>

#include <CLI11.hpp>

#include "napc/cmds.hpp"
#include "napc/common.hpp"
#include "napc/errors.hpp"

// Subcommand exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
// failure (divergence/overflow), 4 quantizer exhaustion.

int main(int argc, char** argv) {
  CLI::App app{"napc - fixed-point LSTM passenger-counting toolkit"};
  app.require_subcommand(1);
  app.set_version_flag(
      "--version",
      std::string("napc ") + napc::cli::kVersion +
          "\nfloat32 forward/backward with fixed reduction order; "
          "deterministic per platform and build, bit-exact across platforms "
          "only in LUT activation mode with embedded tables");

  napc::cli::register_data_commands(app);
  napc::cli::register_train_commands(app);
  napc::cli::register_quantize_commands(app);
  napc::cli::register_infer_commands(app);
  napc::cli::register_metrics_commands(app);
  napc::cli::register_ensemble_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return napc::cli::kExitUsage;
  } catch (const napc::QuantizeExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return napc::cli::kExitQuantizer;
  } catch (const napc::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return napc::cli::kExitNumeric;
  } catch (const napc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return napc::cli::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return napc::cli::kExitData;
  }
  return napc::cli::kExitOk;
}
