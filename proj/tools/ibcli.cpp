#include "CLI11.hpp"

#include "cli_common.hpp"
#include "ib/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Information-bottleneck classifiers under white-box attack"};
  app.require_subcommand(1);
  ibcli::setup_cmd_train(app);
  ibcli::setup_cmd_attack(app);
  ibcli::setup_cmd_diagnose(app);
  ibcli::setup_cmd_landscape(app);
  ibcli::setup_cmd_toy(app);
  ibcli::setup_cmd_report(app);

  int help_exit = -1;
  const int code = ibcli::guarded([&] {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      help_exit = app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      help_exit = app.exit(e);
    } catch (const CLI::ParseError& e) {
      // Unknown flags, bad values, missing subcommand: all config errors.
      throw ib::ConfigError(e.what());
    }
  });
  return help_exit >= 0 ? help_exit : code;
}
