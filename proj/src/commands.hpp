#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nvreg::cli {

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;     // overrides the config's seed
  std::optional<std::string> output_dir; // overrides the config's output_dir
};

struct RunResult {
  std::string summary;                 // one line: key metric and main artifact
  std::vector<std::string> artifacts;  // written files
};

const std::vector<std::string>& subcommands();

// Throws nvreg::Error (ConfigParse for config problems, module errors verbatim).
RunResult run_subcommand(const std::string& name, const RunOptions& opt);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Reader for the harness's own CSV artifacts (header row, numeric cells).
CsvTable read_csv(const std::string& path);

}  // namespace nvreg::cli
