#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace napc::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitQuantizer = 4;

// Plain `key = value` config files; '#' starts a comment. Flags override
// file values at the call sites.
class KvConfig {
public:
  static KvConfig from_file(const std::filesystem::path& path);
  static KvConfig empty() { return KvConfig{}; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  std::vector<uint64_t> get_u64_list(const std::string& key,
                                     const std::vector<uint64_t>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  std::map<std::string, std::string> values_;
  std::string path_;
};

/// "lo:hi:step" or a comma list of integers.
std::vector<size_t> parse_n_grid(const std::string& text);

// Every command writes <output>.manifest.json recording the resolved
// configuration, seeds, and input/output digests, so a rerun can be checked
// for provenance and determinism.
class ManifestBuilder {
public:
  explicit ManifestBuilder(std::string command);
  void set_config(nlohmann::ordered_json config);
  void add_seed(const std::string& name, uint64_t value);
  void add_input(const std::filesystem::path& path);
  void add_input_dir(const std::filesystem::path& dir);  // digests index + frames
  void add_output(const std::filesystem::path& path);
  void write(const std::filesystem::path& primary_output) const;

private:
  nlohmann::ordered_json j_;
};

struct CsvWriter {
  explicit CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();

  std::string buffer;
  std::filesystem::path path;
  bool closed = false;
};

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               size_t min_columns);

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::ordered_json& j);

std::string format_double(double v);

}  // namespace napc::cli
