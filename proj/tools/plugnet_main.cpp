#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "plugnet/analysis.hpp"
#include "plugnet/errors.hpp"
#include "plugnet/scenarios.hpp"

namespace {

using plugnet::Bytes;

constexpr int kExitOk = 0;
constexpr int kExitPostconditionFailed = 1;
constexpr int kExitUsage = 2;

Bytes read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw plugnet::IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string s = buf.str();
  return Bytes(s.begin(), s.end());
}

std::string read_file_text(const std::string& path) {
  Bytes b = read_file_bytes(path);
  return std::string(b.begin(), b.end());
}

plugnet::VendorOui parse_oui(const std::string& text) {
  std::string hex;
  for (char c : text) {
    if (c == ':' || c == '-') continue;
    hex.push_back(c);
  }
  Bytes bytes = plugnet::from_hex(hex);
  if (bytes.size() != 3) {
    throw plugnet::Error("vendor OUI must be three bytes, e.g. EC:1A:59");
  }
  return plugnet::VendorOui{bytes[0], bytes[1], bytes[2]};
}

// Flat key=value config file; '#' starts a comment.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream f(path);
  if (!f) throw plugnet::IoError("cannot open config file: " + path);
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) out[key] = value;
  }
  return out;
}

struct ScenarioCliOptions {
  std::string name;
  std::string seed_text;
  bool patched = false;
  std::string out_dir;
  std::string config_path;
  std::string vendor_oui;
  double entropy_threshold = plugnet::kDefaultEntropyThreshold;
  std::size_t entropy_min_len = plugnet::kDefaultEntropyMinLen;
};

int run_scenario_command(const CLI::App* cmd, const ScenarioCliOptions& opt) {
  std::map<std::string, std::string> file_cfg;
  if (!opt.config_path.empty()) file_cfg = parse_config_file(opt.config_path);

  auto from_file = [&](const char* key) -> const std::string* {
    auto it = file_cfg.find(key);
    return it == file_cfg.end() ? nullptr : &it->second;
  };

  plugnet::ScenarioConfig config;

  // Precedence: flags > config file > defaults.
  if (cmd->count("--name")) {
    config.name = opt.name;
  } else if (const auto* v = from_file("scenario")) {
    config.name = *v;
  }
  if (config.name.empty()) {
    std::cerr << "error: no scenario name given (--name or config)\n";
    return kExitUsage;
  }
  if (!plugnet::is_known_scenario(config.name)) {
    std::cerr << "error: unknown scenario '" << config.name << "'; known: ";
    for (const auto& n : plugnet::scenario_names()) std::cerr << n << " ";
    std::cerr << "\n";
    return kExitUsage;
  }

  std::string seed_text = opt.seed_text;
  if (!cmd->count("--seed")) {
    if (const auto* v = from_file("seed")) seed_text = *v;
  }
  if (seed_text.empty()) {
    // Determinism is the contract: there is no wall-clock default.
    std::cerr << "error: a seed is required (--seed or config)\n";
    return kExitUsage;
  }
  try {
    config.seed = std::stoull(seed_text);
  } catch (const std::exception&) {
    std::cerr << "error: seed must be an unsigned integer\n";
    return kExitUsage;
  }

  if (cmd->count("--patched")) {
    config.patched = opt.patched;
  } else if (const auto* v = from_file("patched")) {
    config.patched = (*v == "1" || *v == "true" || *v == "yes");
  }

  if (cmd->count("--vendor-oui")) {
    config.vendor_oui = parse_oui(opt.vendor_oui);
  } else if (const auto* v = from_file("vendor_oui")) {
    config.vendor_oui = parse_oui(*v);
  }

  if (cmd->count("--entropy-threshold")) {
    config.entropy_threshold = opt.entropy_threshold;
  } else if (const auto* v = from_file("entropy_threshold")) {
    config.entropy_threshold = std::stod(*v);
  }
  if (cmd->count("--entropy-min-len")) {
    config.entropy_min_len = opt.entropy_min_len;
  } else if (const auto* v = from_file("entropy_min_len")) {
    config.entropy_min_len = std::stoul(*v);
  }

  std::string out_dir = opt.out_dir;
  if (!cmd->count("--out")) {
    if (const auto* v = from_file("output_dir")) {
      out_dir = *v;
    } else if (const char* env = std::getenv("PLUGNET_OUTPUT_DIR")) {
      out_dir = env;
    }
  }
  if (out_dir.empty()) out_dir = "plugnet-out";
  config.output_dir = out_dir;

  plugnet::ScenarioRun run = plugnet::run_scenario(config);
  plugnet::write_artifacts(run, out_dir);

  std::cout << "scenario:   " << config.name << "\n"
            << "seed:       " << config.seed << "\n"
            << "outcome:    " << run.outcome << "\n"
            << "artifacts:  " << out_dir << "/{trace.jsonl,report.json,final_states.json}\n";
  if (!run.ok) {
    std::cerr << "postcondition failed: " << run.failure << "\n";
    return kExitPostconditionFailed;
  }
  return kExitOk;
}

struct TraceFilter {
  std::optional<std::string> kind;
  std::optional<std::string> src;
  std::optional<std::string> dst;
};

int inspect_trace(const std::string& path,
                  const std::vector<std::string>& filters) {
  TraceFilter filter;
  for (const std::string& f : filters) {
    auto eq = f.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: filter must look like kind=BindRequest\n";
      return kExitUsage;
    }
    std::string key = f.substr(0, eq);
    std::string value = f.substr(eq + 1);
    if (key == "kind") {
      filter.kind = value;
    } else if (key == "src") {
      filter.src = value;
    } else if (key == "dst") {
      filter.dst = value;
    } else {
      std::cerr << "error: unknown filter key '" << key
                << "' (kind, src, dst)\n";
      return kExitUsage;
    }
  }

  std::istringstream in(read_file_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      std::string kind = j.at("kind").get<std::string>();
      std::string src = j.at("src").at("node").get<std::string>();
      std::string dst = j.at("dst").at("node").get<std::string>();
      if (filter.kind && kind != *filter.kind) continue;
      if (filter.src && src != *filter.src) continue;
      if (filter.dst && dst != *filter.dst) continue;
      Bytes payload =
          plugnet::from_hex(j.at("payload_hex").get<std::string>());
      std::string summary = plugnet::summarize(plugnet::deserialize(payload));
      std::cout << "#" << j.at("seq").get<std::uint64_t>() << " t="
                << j.at("vtime").get<std::uint64_t>() << " "
                << j.at("channel").get<std::string>() << " " << src << " -> "
                << dst << " " << kind;
      if (!summary.empty()) std::cout << " | " << summary;
      if (j.contains("annotations") && !j.at("annotations").empty()) {
        std::cout << " [";
        bool first = true;
        for (auto& [k, v] : j.at("annotations").items()) {
          if (!first) std::cout << ", ";
          first = false;
          std::cout << k << "=" << v.get<std::string>();
        }
        std::cout << "]";
      }
      std::cout << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: malformed trace line " << line_no << ": "
                << e.what() << "\n";
      return kExitUsage;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WeMo-style smart plug protocol emulator and analysis toolkit"};
  app.require_subcommand(1);

  // scenario run ---------------------------------------------------------
  auto* scenario = app.add_subcommand("scenario", "Run emulated scenarios");
  scenario->require_subcommand(1);
  auto* scenario_run = scenario->add_subcommand("run", "Run a named scenario");
  ScenarioCliOptions opt;
  scenario_run->add_option("--name", opt.name, "Scenario name");
  scenario_run->add_option("--seed", opt.seed_text, "Deterministic RNG seed");
  scenario_run->add_flag("--patched", opt.patched,
                         "Run the HTTPS server with the vendor's IP-change patch");
  scenario_run->add_option("--out", opt.out_dir, "Artifact output directory");
  scenario_run->add_option("--config", opt.config_path,
                           "Flat key=value config file");
  scenario_run->add_option("--vendor-oui", opt.vendor_oui,
                           "Vendor OUI for wardriving (e.g. EC:1A:59)");
  scenario_run->add_option("--entropy-threshold", opt.entropy_threshold,
                           "Entropy flag threshold override");
  scenario_run->add_option("--entropy-min-len", opt.entropy_min_len,
                           "Entropy minimum field length override");

  // analyze ---------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Traffic and blob analysis");
  analyze->require_subcommand(1);

  auto* entropy = analyze->add_subcommand(
      "entropy", "Per-field byte entropy of a trace file");
  std::string entropy_trace;
  double entropy_threshold = plugnet::kDefaultEntropyThreshold;
  std::size_t entropy_min_len = plugnet::kDefaultEntropyMinLen;
  entropy->add_option("--trace", entropy_trace, "trace.jsonl path")
      ->required();
  entropy->add_option("--threshold", entropy_threshold,
                      "bits/byte flag threshold");
  entropy->add_option("--min-len", entropy_min_len,
                      "minimum field length for the plain threshold");

  auto* find_cert = analyze->add_subcommand(
      "find-cert", "Locate PEM certificate headers in a blob");
  std::string cert_blob;
  find_cert->add_option("--blob", cert_blob, "blob file")->required();

  auto* fs_magic = analyze->add_subcommand(
      "fs-magic", "Identify filesystem images inside a blob");
  std::string fs_blob;
  fs_magic->add_option("--blob", fs_blob, "blob file")->required();

  // trace inspect ----------------------------------------------------------
  auto* trace = app.add_subcommand("trace", "Trace utilities");
  trace->require_subcommand(1);
  auto* inspect = trace->add_subcommand("inspect", "Human-readable listing");
  std::string inspect_path;
  std::vector<std::string> inspect_filters;
  inspect->add_option("--trace", inspect_path, "trace.jsonl path")->required();
  inspect->add_option("--filter", inspect_filters,
                      "kind=..., src=... or dst=... (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (scenario_run->parsed()) {
      return run_scenario_command(scenario_run, opt);
    }
    if (entropy->parsed()) {
      plugnet::EntropyReport report = plugnet::classify_trace_fields(
          entropy_trace, entropy_threshold, entropy_min_len);
      std::cout << plugnet::entropy_report_json(report);
      return kExitOk;
    }
    if (find_cert->parsed()) {
      Bytes blob = read_file_bytes(cert_blob);
      std::cout << plugnet::findings_json(plugnet::find_pem_certificates(blob));
      return kExitOk;
    }
    if (fs_magic->parsed()) {
      Bytes blob = read_file_bytes(fs_blob);
      std::cout << plugnet::findings_json(plugnet::identify_filesystems(blob));
      return kExitOk;
    }
    if (inspect->parsed()) {
      return inspect_trace(inspect_path, inspect_filters);
    }
  } catch (const plugnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
