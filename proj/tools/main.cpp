#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

using driftlab::cli::json;

namespace {

// Flag values are read as JSON when they parse, otherwise as plain strings;
// "@path" loads a JSON file.
json flag_value(const std::string& text) {
  if (!text.empty() && text[0] == '@') {
    std::ifstream in(text.substr(1));
    if (!in) throw std::runtime_error("cannot read " + text.substr(1));
    return json::parse(in);
  }
  json v = json::parse(text, nullptr, false);
  return v.is_discarded() ? json(text) : v;
}

int fail(const std::string& tag, const std::string& what, int code) {
  std::cerr << "error " << tag << ": " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftlab: effective diffusion constants for lattice walks with periodic drift"};
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");

  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : driftlab::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration");
    for (const auto& key : driftlab::cli::command_keys(name)) {
      if (key == "command") continue;
      sub->add_option("--" + key, flags[name][key], "config key '" + key + "'");
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("ValidationError", e.what(), 1);
  }

  json config = json::object();
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) return fail("ValidationError", "cannot read config " + config_path, 1);
      config = json::parse(in);
      if (!config.is_object()) return fail("ValidationError", "config must be a JSON object", 1);
    }
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      if (config.contains("command") && config["command"] != name) {
        return fail("ValidationError", "config command does not match subcommand " + name, 1);
      }
      config["command"] = name;
      for (const auto& [key, text] : flags[name]) {
        if (sub->count("--" + key) == 0) continue;
        config[key] = key == "output" ? json(text) : flag_value(text);
      }
    }
  } catch (const std::exception& e) {
    return fail("ValidationError", e.what(), 1);
  }
  if (!config.contains("command")) return fail("ValidationError", "no command given", 1);
  return driftlab::cli::run(config, std::cout, std::cerr);
}
