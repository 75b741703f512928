#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace napc::data {

// One labeled frame sequence (a door opening phase). Frames are stored as a
// flat row-major T x D float buffer; labels are end-of-sequence totals, one
// non-negative integer per class.
struct Sequence {
  std::string id;
  size_t input_dim = 0;
  std::vector<float> frames;   // frame_count() * input_dim values
  std::vector<int64_t> labels; // one per class

  size_t frame_count() const { return input_dim ? frames.size() / input_dim : 0; }
  std::span<const float> frame(size_t t) const {
    return {frames.data() + t * input_dim, input_dim};
  }
};

struct Dataset {
  size_t input_dim = 0;
  std::vector<std::string> class_names;
  std::vector<Sequence> sequences;

  size_t num_classes() const { return class_names.size(); }
  const Sequence* find(const std::string& id) const;
};

struct SyntheticConfig {
  size_t input_dim = 20;
  size_t num_sequences = 100;
  size_t frames_min = 20, frames_max = 40;
  int64_t events_min = 0, events_max = 3;   // per class
  size_t event_duration_min = 4, event_duration_max = 8; // frames
  double amplitude_min = 0.8, amplitude_max = 1.2;
  double noise_std = 0.05;
  uint64_t seed = 0;
  std::vector<std::string> class_names = {"board", "alight"};
};

// Appendable on-disk store: <dir>/frames.bin holds raw little-endian 32-bit
// floats, <dir>/index.json holds input_dim, class_names and ordered entries
// {id, offset_frames, length_frames, labels}. Frame bytes are appended first
// and the index is replaced atomically (temp file + rename), so a crash
// between the two writes loses at most the last sequence.
class StoreHandle {
public:
  static StoreHandle create(const std::filesystem::path& dir, size_t input_dim,
                            std::vector<std::string> class_names);
  static StoreHandle open(const std::filesystem::path& dir);

  void append(const Sequence& seq);

  size_t input_dim() const { return input_dim_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  size_t sequence_count() const { return ids_.size(); }
  const std::filesystem::path& dir() const { return dir_; }

private:
  StoreHandle() = default;
  void write_index() const;

  std::filesystem::path dir_;
  size_t input_dim_ = 0;
  std::vector<std::string> class_names_;
  std::vector<std::string> ids_;
  std::vector<size_t> offsets_;  // in frames
  std::vector<size_t> lengths_;  // in frames
  std::vector<std::vector<int64_t>> labels_;
  size_t total_frames_ = 0;
};

/// Load a whole store into memory, in append order. Verifies that frames.bin
/// is long enough for every index entry.
Dataset load_dataset(const std::filesystem::path& dir);

/// Write a dataset as a fresh store at `dir`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

// Deterministic synthetic corpus. Each event of class c adds a raised-cosine
// temporal envelope times a random amplitude to the class band
// [c*D/C, (c+1)*D/C) of the input vector; Gaussian background noise is added
// everywhere. Labels count generated events per class.
//
// Draw order (all streams keyed by config.seed, s = sequence index):
//   "synth.len"    {s}       -> frame count
//   "synth.events" {s, c}    -> event count of class c
//   "synth.event"  {s, c, e} -> start, duration, amplitude
//   "synth.noise"  {s}       -> one normal per (frame, dim), frame-major
Dataset synth_generate(const SyntheticConfig& config);

/// k concatenated copies of `seq`; labels multiplied by k, id suffixed.
Sequence loop_sequence(const Sequence& seq, size_t k);

/// Uniform shuffle by seed, then contiguous partition into num_groups
/// mutually exclusive, jointly exhaustive datasets (sizes differ by <= 1).
std::vector<Dataset> split_groups(const Dataset& dataset, size_t num_groups,
                                  uint64_t seed);

}  // namespace napc::data
