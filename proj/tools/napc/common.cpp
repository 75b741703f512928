#include "napc/common.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "napc/digest.hpp"
#include "napc/errors.hpp"

namespace napc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

KvConfig KvConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  KvConfig cfg;
  cfg.path_ = path.string();
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected key = value");
    cfg.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw DataError("config " + path_ + " is missing required key '" + key + "'");
  return it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw DataError("config key '" + key + "' is not an integer: " + it->second);
  }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (...) {
    throw DataError("config key '" + key + "' is not an unsigned integer: " +
                    it->second);
  }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw DataError("config key '" + key + "' is not a number: " + it->second);
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("config key '" + key + "' is not a boolean: " + it->second);
}

std::vector<std::string> KvConfig::get_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : split_commas(it->second);
}

std::vector<uint64_t> KvConfig::get_u64_list(
    const std::string& key, const std::vector<uint64_t>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<uint64_t> out;
  for (const auto& s : split_commas(it->second)) {
    try {
      out.push_back(std::stoull(s));
    } catch (...) {
      throw DataError("config key '" + key + "' has a non-integer element: " + s);
    }
  }
  return out;
}

std::vector<size_t> parse_n_grid(const std::string& text) {
  std::vector<size_t> out;
  if (text.find(':') != std::string::npos) {
    size_t lo = 0, hi = 0, step = 0;
    char sep1 = 0, sep2 = 0;
    std::istringstream ss(text);
    ss >> lo >> sep1 >> hi >> sep2 >> step;
    if (!ss || sep1 != ':' || sep2 != ':' || step == 0 || lo == 0 || hi < lo)
      throw DataError("bad n-grid '" + text + "', expected lo:hi:step");
    for (size_t n = lo; n <= hi; n += step) out.push_back(n);
  } else {
    for (const auto& s : split_commas(text)) out.push_back(std::stoull(s));
  }
  if (out.empty()) throw DataError("n-grid is empty");
  return out;
}

ManifestBuilder::ManifestBuilder(std::string command) {
  j_["command"] = std::move(command);
  j_["tool_version"] = kVersion;
  j_["config"] = ordered_json::object();
  j_["seeds"] = ordered_json::object();
  j_["inputs"] = ordered_json::object();
  j_["outputs"] = ordered_json::object();
}

void ManifestBuilder::set_config(ordered_json config) {
  j_["config"] = std::move(config);
}

void ManifestBuilder::add_seed(const std::string& name, uint64_t value) {
  j_["seeds"][name] = value;
}

void ManifestBuilder::add_input(const fs::path& path) {
  j_["inputs"][path.string()] = file_digest(path);
}

void ManifestBuilder::add_input_dir(const fs::path& dir) {
  for (const char* name : {"index.json", "frames.bin"}) {
    const fs::path p = dir / name;
    if (fs::exists(p)) j_["inputs"][p.string()] = file_digest(p);
  }
}

void ManifestBuilder::add_output(const fs::path& path) {
  j_["outputs"][path.string()] = file_digest(path);
}

void ManifestBuilder::write(const fs::path& primary_output) const {
  const fs::path path = primary_output.string() + ".manifest.json";
  write_json_file(path, j_);
}

CsvWriter::CsvWriter(const fs::path& p, const std::vector<std::string>& header)
    : path(p) {
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) buffer += ',';
    buffer += header[i];
  }
  buffer += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) buffer += ',';
    buffer += cells[i];
  }
  buffer += '\n';
}

void CsvWriter::close() {
  if (closed) return;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << buffer;
  out.flush();
  if (!out) throw DataError("short write to " + path.string());
  closed = true;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               size_t min_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;  // header row
      continue;
    }
    if (cells.size() < min_columns)
      throw DataError(path.string() + ": row has fewer than " +
                      std::to_string(min_columns) + " columns: " + line);
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_json_file(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  out.flush();
  if (!out) throw DataError("short write to " + path.string());
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace napc::cli
