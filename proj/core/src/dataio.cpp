#include "napc/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "napc/errors.hpp"
#include "napc/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "store layout is little-endian; big-endian hosts need byte swaps");

namespace napc::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kIndexName = "index.json";
constexpr const char* kFramesName = "frames.bin";

json index_to_json(size_t input_dim, const std::vector<std::string>& class_names,
                   const std::vector<std::string>& ids,
                   const std::vector<size_t>& offsets,
                   const std::vector<size_t>& lengths,
                   const std::vector<std::vector<int64_t>>& labels) {
  json j;
  j["format"] = "napc-store";
  j["version"] = 1;
  j["input_dim"] = input_dim;
  j["class_names"] = class_names;
  json entries = json::array();
  for (size_t i = 0; i < ids.size(); ++i) {
    entries.push_back({{"id", ids[i]},
                       {"offset_frames", offsets[i]},
                       {"length_frames", lengths[i]},
                       {"labels", labels[i]}});
  }
  j["sequences"] = std::move(entries);
  return j;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json load_index(const fs::path& dir) {
  std::ifstream in(dir / kIndexName);
  if (!in) throw DataError("no store index at " + (dir / kIndexName).string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("corrupt store index " + (dir / kIndexName).string() + ": " +
                    e.what());
  }
  if (j.value("format", "") != "napc-store")
    throw DataError("not a napc store: " + dir.string());
  return j;
}

void validate_labels(const Sequence& seq, size_t num_classes) {
  if (seq.labels.size() != num_classes)
    throw DataError("sequence '" + seq.id + "' has " +
                    std::to_string(seq.labels.size()) + " labels, store has " +
                    std::to_string(num_classes) + " classes");
  for (int64_t l : seq.labels)
    if (l < 0)
      throw DataError("sequence '" + seq.id + "' has a negative label");
}

}  // namespace

const Sequence* Dataset::find(const std::string& id) const {
  for (const auto& s : sequences)
    if (s.id == id) return &s;
  return nullptr;
}

StoreHandle StoreHandle::create(const fs::path& dir, size_t input_dim,
                                std::vector<std::string> class_names) {
  if (input_dim == 0) throw DataError("store input_dim must be positive");
  if (fs::exists(dir / kIndexName))
    throw DataError("store already exists at " + dir.string());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create store directory " + dir.string());

  StoreHandle h;
  h.dir_ = dir;
  h.input_dim_ = input_dim;
  h.class_names_ = std::move(class_names);
  {
    std::ofstream frames(dir / kFramesName, std::ios::binary | std::ios::trunc);
    if (!frames) throw DataError("cannot create " + (dir / kFramesName).string());
  }
  h.write_index();
  return h;
}

StoreHandle StoreHandle::open(const fs::path& dir) {
  const json j = load_index(dir);
  StoreHandle h;
  h.dir_ = dir;
  h.input_dim_ = j.at("input_dim").get<size_t>();
  h.class_names_ = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& e : j.at("sequences")) {
    h.ids_.push_back(e.at("id").get<std::string>());
    h.offsets_.push_back(e.at("offset_frames").get<size_t>());
    h.lengths_.push_back(e.at("length_frames").get<size_t>());
    h.labels_.push_back(e.at("labels").get<std::vector<int64_t>>());
  }
  if (!h.lengths_.empty())
    h.total_frames_ = h.offsets_.back() + h.lengths_.back();
  return h;
}

void StoreHandle::append(const Sequence& seq) {
  if (seq.input_dim != input_dim_)
    throw DataError("dimension mismatch appending '" + seq.id + "': got " +
                    std::to_string(seq.input_dim) + ", store has " +
                    std::to_string(input_dim_));
  if (seq.frame_count() == 0)
    throw DataError("sequence '" + seq.id + "' has no frames");
  if (std::find(ids_.begin(), ids_.end(), seq.id) != ids_.end())
    throw DataError("duplicate sequence id '" + seq.id + "'");
  validate_labels(seq, class_names_.size());

  {
    std::ofstream frames(dir_ / kFramesName, std::ios::binary | std::ios::app);
    if (!frames) throw DataError("cannot open " + (dir_ / kFramesName).string());
    frames.write(reinterpret_cast<const char*>(seq.frames.data()),
                 static_cast<std::streamsize>(seq.frames.size() * sizeof(float)));
    if (!frames) throw DataError("short write to frames.bin");
  }
  ids_.push_back(seq.id);
  offsets_.push_back(total_frames_);
  lengths_.push_back(seq.frame_count());
  labels_.push_back(seq.labels);
  total_frames_ += seq.frame_count();
  write_index();  // written last so a crash loses at most this sequence
}

void StoreHandle::write_index() const {
  const json j =
      index_to_json(input_dim_, class_names_, ids_, offsets_, lengths_, labels_);
  atomic_write(dir_ / kIndexName, j.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  const json j = load_index(dir);
  Dataset ds;
  ds.input_dim = j.at("input_dim").get<size_t>();
  ds.class_names = j.at("class_names").get<std::vector<std::string>>();

  std::ifstream frames(dir / kFramesName, std::ios::binary);
  if (!frames) throw DataError("missing " + (dir / kFramesName).string());
  frames.seekg(0, std::ios::end);
  const size_t file_frames =
      static_cast<size_t>(frames.tellg()) / (ds.input_dim * sizeof(float));

  std::unordered_set<std::string> seen;
  for (const auto& e : j.at("sequences")) {
    Sequence seq;
    seq.id = e.at("id").get<std::string>();
    seq.input_dim = ds.input_dim;
    const size_t offset = e.at("offset_frames").get<size_t>();
    const size_t length = e.at("length_frames").get<size_t>();
    seq.labels = e.at("labels").get<std::vector<int64_t>>();
    if (!seen.insert(seq.id).second)
      throw DataError("corrupt index: duplicate id '" + seq.id + "'");
    if (offset + length > file_frames)
      throw DataError("frames.bin is shorter than the index claims for sequence '" +
                      seq.id + "'");
    seq.frames.resize(length * ds.input_dim);
    frames.seekg(static_cast<std::streamoff>(offset * ds.input_dim * sizeof(float)));
    frames.read(reinterpret_cast<char*>(seq.frames.data()),
                static_cast<std::streamsize>(seq.frames.size() * sizeof(float)));
    if (!frames) throw DataError("read failed for sequence '" + seq.id + "'");
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  StoreHandle store = StoreHandle::create(dir, ds.input_dim, ds.class_names);
  for (const auto& seq : ds.sequences) store.append(seq);
}

Dataset synth_generate(const SyntheticConfig& cfg) {
  if (cfg.input_dim == 0 || cfg.class_names.empty())
    throw DataError("synthetic config needs input_dim >= 1 and at least one class");
  if (cfg.input_dim < cfg.class_names.size())
    throw DataError("input_dim must be >= number of classes");
  if (cfg.frames_min == 0 || cfg.frames_min > cfg.frames_max)
    throw DataError("invalid frames range");
  if (cfg.events_min < 0 || cfg.events_min > cfg.events_max)
    throw DataError("invalid events range");
  if (cfg.event_duration_min == 0 || cfg.event_duration_min > cfg.event_duration_max)
    throw DataError("invalid event duration range");
  if (cfg.amplitude_min > cfg.amplitude_max)
    throw DataError("invalid amplitude range");
  if (cfg.noise_std < 0) throw DataError("noise_std must be >= 0");

  const size_t C = cfg.class_names.size();
  const size_t band = cfg.input_dim / C;

  Dataset ds;
  ds.input_dim = cfg.input_dim;
  ds.class_names = cfg.class_names;
  ds.sequences.reserve(cfg.num_sequences);

  for (size_t s = 0; s < cfg.num_sequences; ++s) {
    Sequence seq;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06zu", s);
    seq.id = idbuf;
    seq.input_dim = cfg.input_dim;

    const size_t len = static_cast<size_t>(
        Rng::stream("synth.len", cfg.seed, {s})
            .uniform_int(static_cast<int64_t>(cfg.frames_min),
                         static_cast<int64_t>(cfg.frames_max)));
    seq.frames.assign(len * cfg.input_dim, 0.0f);
    seq.labels.assign(C, 0);

    for (size_t c = 0; c < C; ++c) {
      const int64_t n_events = Rng::stream("synth.events", cfg.seed, {s, c})
                                   .uniform_int(cfg.events_min, cfg.events_max);
      seq.labels[c] = n_events;
      const size_t lo = c * band;
      const size_t hi = (c + 1 == C) ? cfg.input_dim : (c + 1) * band;
      for (int64_t e = 0; e < n_events; ++e) {
        Rng rng = Rng::stream("synth.event", cfg.seed, {s, c, static_cast<uint64_t>(e)});
        const size_t start = static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(len) - 1));
        const size_t dur = static_cast<size_t>(
            rng.uniform_int(static_cast<int64_t>(cfg.event_duration_min),
                            static_cast<int64_t>(cfg.event_duration_max)));
        const double amp = rng.uniform(cfg.amplitude_min, cfg.amplitude_max);
        for (size_t t = start; t < start + dur && t < len; ++t) {
          const double phase = (static_cast<double>(t - start) + 0.5) /
                               static_cast<double>(dur);
          const double w = 0.5 * (1.0 - std::cos(6.283185307179586477 * phase));
          const float add = static_cast<float>(amp * w);
          float* row = seq.frames.data() + t * cfg.input_dim;
          for (size_t d = lo; d < hi; ++d) row[d] += add;
        }
      }
    }

    if (cfg.noise_std > 0) {
      Rng noise = Rng::stream("synth.noise", cfg.seed, {s});
      for (float& v : seq.frames)
        v += static_cast<float>(cfg.noise_std * noise.next_normal());
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Sequence loop_sequence(const Sequence& seq, size_t k) {
  if (k < 1) throw DataError("loop count must be >= 1");
  Sequence out;
  out.id = seq.id + "_x" + std::to_string(k);
  out.input_dim = seq.input_dim;
  out.frames.reserve(seq.frames.size() * k);
  for (size_t i = 0; i < k; ++i)
    out.frames.insert(out.frames.end(), seq.frames.begin(), seq.frames.end());
  out.labels.reserve(seq.labels.size());
  for (int64_t l : seq.labels) out.labels.push_back(l * static_cast<int64_t>(k));
  return out;
}

std::vector<Dataset> split_groups(const Dataset& dataset, size_t num_groups,
                                  uint64_t seed) {
  const size_t n = dataset.sequences.size();
  if (num_groups < 1 || num_groups > n)
    throw DataError("num_groups must be in [1, sequence count]");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream("split", seed);
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }

  std::vector<Dataset> groups(num_groups);
  const size_t base = n / num_groups;
  const size_t extra = n % num_groups;
  size_t pos = 0;
  for (size_t g = 0; g < num_groups; ++g) {
    Dataset& grp = groups[g];
    grp.input_dim = dataset.input_dim;
    grp.class_names = dataset.class_names;
    const size_t size = base + (g < extra ? 1 : 0);
    for (size_t i = 0; i < size; ++i)
      grp.sequences.push_back(dataset.sequences[order[pos++]]);
  }
  return groups;
}

}  // namespace napc::data
