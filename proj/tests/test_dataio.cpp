#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "napc/dataio.hpp"
#include "napc/errors.hpp"
#include "napc/rng.hpp"
#include "support/test_support.hpp"

using namespace napc;
namespace fs = std::filesystem;
using testsup::TempDir;
using testsup::make_sequence;

TEST_CASE("create, append, load round-trips exactly") {
  TempDir tmp;
  const fs::path dir = tmp / "store";
  auto store = data::StoreHandle::create(dir, 20, {"board", "alight"});

  SUBCASE("empty store loads as empty dataset") {
    const data::Dataset ds = data::load_dataset(dir);
    CHECK(ds.sequences.empty());
    CHECK(ds.input_dim == 20);
    CHECK(fs::file_size(dir / "frames.bin") == 0);
  }

  SUBCASE("create twice at the same path fails") {
    CHECK_THROWS_AS(data::StoreHandle::create(dir, 20, {"board", "alight"}),
                    DataError);
  }

  SUBCASE("offsets are cumulative and content is byte-equal") {
    const auto s1 = make_sequence("a", 20, 10, {1, 0}, 1);
    const auto s2 = make_sequence("b", 20, 5, {0, 2}, 2);
    store.append(s1);
    store.append(s2);

    const data::Dataset ds = data::load_dataset(dir);
    REQUIRE(ds.sequences.size() == 2);
    CHECK(ds.sequences[0].frame_count() == 10);
    CHECK(ds.sequences[1].frame_count() == 5);
    CHECK(ds.sequences[0].frames == s1.frames);
    CHECK(ds.sequences[1].frames == s2.frames);
    CHECK(ds.sequences[0].labels == s1.labels);
    CHECK(ds.sequences[1].labels == s2.labels);

    // index offsets recorded as the running sum of prior lengths
    std::ifstream idx(dir / "index.json");
    std::string text((std::istreambuf_iterator<char>(idx)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("\"offset_frames\": 0") != std::string::npos);
    CHECK(text.find("\"offset_frames\": 10") != std::string::npos);
  }

  SUBCASE("dimension mismatch and duplicate ids are rejected") {
    CHECK_THROWS_AS(store.append(make_sequence("bad", 7, 3, {0, 0})), DataError);
    store.append(make_sequence("dup", 20, 3, {0, 0}));
    CHECK_THROWS_AS(store.append(make_sequence("dup", 20, 3, {0, 0})), DataError);
  }

  SUBCASE("fractional or negative labels are rejected") {
    CHECK_THROWS_AS(store.append(make_sequence("neg", 20, 3, {-1, 0})), DataError);
  }

  SUBCASE("truncated frame file names the offending sequence") {
    store.append(make_sequence("ok", 20, 4, {0, 0}, 3));
    store.append(make_sequence("victim", 20, 6, {0, 0}, 4));
    fs::resize_file(dir / "frames.bin", 20 * 4 * 4 + 8);  // cut into 'victim'
    try {
      data::load_dataset(dir);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("victim") != std::string::npos);
    }
  }
}

TEST_CASE("reopening a store continues appends") {
  TempDir tmp;
  const fs::path dir = tmp / "store";
  {
    auto store = data::StoreHandle::create(dir, 4, {"b", "a"});
    store.append(make_sequence("one", 4, 3, {1, 0}, 1));
  }
  {
    auto store = data::StoreHandle::open(dir);
    store.append(make_sequence("two", 4, 2, {0, 1}, 2));
  }
  const data::Dataset ds = data::load_dataset(dir);
  REQUIRE(ds.sequences.size() == 2);
  CHECK(ds.sequences[1].id == "two");
}

TEST_CASE("synth_generate is a pure function of its config") {
  data::SyntheticConfig cfg;
  cfg.num_sequences = 20;
  cfg.seed = 1;
  const data::Dataset a = data::synth_generate(cfg);
  const data::Dataset b = data::synth_generate(cfg);
  REQUIRE(a.sequences.size() == b.sequences.size());
  for (size_t i = 0; i < a.sequences.size(); ++i) {
    CHECK(a.sequences[i].frames == b.sequences[i].frames);  // bit-identical
    CHECK(a.sequences[i].labels == b.sequences[i].labels);
  }
}

TEST_CASE("synth_generate with zero events yields all-zero labels") {
  data::SyntheticConfig cfg;
  cfg.num_sequences = 10;
  cfg.events_min = cfg.events_max = 0;
  const data::Dataset ds = data::synth_generate(cfg);
  for (const auto& seq : ds.sequences)
    for (int64_t l : seq.labels) CHECK(l == 0);
}

TEST_CASE("synth labels match an independent replay of the event-count draws") {
  data::SyntheticConfig cfg;
  cfg.input_dim = 20;
  cfg.num_sequences = 50;
  cfg.events_min = 1;
  cfg.events_max = 3;
  cfg.seed = 7;
  const data::Dataset ds = data::synth_generate(cfg);
  REQUIRE(ds.sequences.size() == 50);
  for (size_t s = 0; s < 50; ++s) {
    for (size_t c = 0; c < 2; ++c) {
      const int64_t expect =
          Rng::stream("synth.events", 7, {s, c}).uniform_int(1, 3);
      CHECK(ds.sequences[s].labels[c] == expect);
    }
  }
}

TEST_CASE("loop_sequence concatenates frames and multiplies labels") {
  const auto seq = make_sequence("s", 6, 10, {1, 0}, 5);

  const auto x3 = data::loop_sequence(seq, 3);
  CHECK(x3.frame_count() == 30);
  CHECK(x3.labels == std::vector<int64_t>{3, 0});
  for (size_t k = 0; k < 3; ++k)
    for (size_t i = 0; i < seq.frames.size(); ++i)
      CHECK(x3.frames[k * seq.frames.size() + i] == seq.frames[i]);

  const auto x1 = data::loop_sequence(seq, 1);
  CHECK(x1.frames == seq.frames);
  CHECK(x1.labels == seq.labels);

  const auto x200 = data::loop_sequence(seq, 200);
  CHECK(x200.labels == std::vector<int64_t>{200, 0});
  CHECK(x200.frame_count() == 2000);

  CHECK_THROWS_AS(data::loop_sequence(seq, 0), DataError);
}

TEST_CASE("split_groups partitions exhaustively and deterministically") {
  data::Dataset ds;
  ds.input_dim = 4;
  ds.class_names = {"b", "a"};
  for (int i = 0; i < 8; ++i)
    ds.sequences.push_back(make_sequence("s" + std::to_string(i), 4, 2, {0, 0}, i));

  const auto groups = data::split_groups(ds, 4, 9);
  REQUIRE(groups.size() == 4);
  std::set<std::string> seen;
  for (const auto& g : groups) {
    CHECK(g.sequences.size() == 2);
    for (const auto& s : g.sequences) CHECK(seen.insert(s.id).second);
  }
  CHECK(seen.size() == 8);

  const auto again = data::split_groups(ds, 4, 9);
  for (size_t g = 0; g < 4; ++g)
    for (size_t i = 0; i < 2; ++i)
      CHECK(again[g].sequences[i].id == groups[g].sequences[i].id);

  CHECK_THROWS_AS(data::split_groups(ds, 0, 1), DataError);
  CHECK_THROWS_AS(data::split_groups(ds, 9, 1), DataError);
}

TEST_CASE("split_groups at the grid-search scale gives equal group sizes") {
  data::Dataset ds;
  ds.input_dim = 2;
  ds.class_names = {"b", "a"};
  ds.sequences.reserve(8000);
  for (int i = 0; i < 8000; ++i) {
    data::Sequence s;
    s.id = "v" + std::to_string(i);
    s.input_dim = 2;
    s.frames = {0.0f, 0.0f};
    s.labels = {0, 0};
    ds.sequences.push_back(std::move(s));
  }
  const auto groups = data::split_groups(ds, 4, 1);
  for (const auto& g : groups) CHECK(g.sequences.size() == 2000);
}
