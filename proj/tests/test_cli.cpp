#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support/test_support.hpp"

// End-to-end checks of the `napc` binary: pipeline smoke, determinism of
// randomized commands, exit codes, and manifest emission.

namespace {

namespace fs = std::filesystem;

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const std::string tool = NAPC_TOOL_PATH;

}  // namespace

TEST_CASE("full pipeline: synth, train, quantize, infer, eval, simulate") {
  testsup::TempDir tmp;
  const fs::path dir = tmp.path();

  write_file(dir / "synth.cfg",
             "input_dim = 12\n"
             "num_sequences = 40\n"
             "frames_min = 10\nframes_max = 16\n"
             "events_min = 0\nevents_max = 2\n"
             "event_duration_min = 3\nevent_duration_max = 5\n"
             "noise_std = 0.05\n"
             "seed = 3\n");
  write_file(dir / "model.spec", "lstm_layers = 1\nlstm_units = 8\n");
  write_file(dir / "train.cfg",
             "epochs = 8\nbatch_size = 8\nlr0 = 0.3\nlr_decay = 0.9\n"
             "weights_seed = 1\ntraining_seed = 1\n");

  REQUIRE(run(tool + " synth --config " + (dir / "synth.cfg").string() +
              " --out " + (dir / "data").string()) == 0);
  REQUIRE(fs::exists(dir / "data" / "index.json"));
  REQUIRE(fs::exists(dir / "data" / "store.manifest.json"));

  REQUIRE(run(tool + " train --data " + (dir / "data").string() + " --spec " +
              (dir / "model.spec").string() + " --config " +
              (dir / "train.cfg").string() + " --out " +
              (dir / "model.napc").string() + " --quiet") == 0);
  REQUIRE(fs::exists(dir / "model.napc"));
  REQUIRE(fs::exists(dir / "model.napc.manifest.json"));

  REQUIRE(run(tool + " quantize --model " + (dir / "model.napc").string() +
              " --calib " + (dir / "data").string() + " --eps 0.45 --bits 32" +
              " --seed 5 --out " + (dir / "model.napcq").string()) == 0);

  REQUIRE(run(tool + " infer --model " + (dir / "model.napcq").string() +
              " --data " + (dir / "data").string() + " --out " +
              (dir / "pred.csv").string()) == 0);
  const std::string pred = slurp(dir / "pred.csv");
  CHECK(pred.rfind("seq_id,class,final_count,float_final", 0) == 0);

  REQUIRE(run(tool + " eval --pred " + (dir / "pred.csv").string() +
              " --truth " + (dir / "data").string() + " --out " +
              (dir / "metrics.json").string() + " --pop-out " +
              (dir / "pop.csv").string()) == 0);
  CHECK(slurp(dir / "metrics.json").find("relative_bias") != std::string::npos);

  REQUIRE(run(tool + " simulate --pop " + (dir / "pop.csv").string() +
              " --n 30 --reps 200 --delta 0.05 --seed 1 --out " +
              (dir / "sim.json").string()) == 0);

  SUBCASE("simulate is byte-identical across reruns") {
    REQUIRE(run(tool + " simulate --pop " + (dir / "pop.csv").string() +
                " --n 30 --reps 200 --delta 0.05 --seed 1 --out " +
                (dir / "sim2.json").string()) == 0);
    CHECK(slurp(dir / "sim.json") == slurp(dir / "sim2.json"));
  }

  SUBCASE("curve, bench, loop, split run on the same artifacts") {
    CHECK(run(tool + " curve --pop " + (dir / "pop.csv").string() +
              " --n-grid 10,20 --reps 100 --seed 2 --out " +
              (dir / "curve.csv").string()) == 0);
    CHECK(slurp(dir / "curve.csv").rfind("n,success_chance", 0) == 0);

    CHECK(run(tool + " bench --model " + (dir / "model.napcq").string() +
              " --data " + (dir / "data").string() + " --reps 3 --out " +
              (dir / "bench.json").string()) == 0);
    CHECK(slurp(dir / "bench.json").find("realtime_instances") !=
          std::string::npos);

    CHECK(run(tool + " split --data " + (dir / "data").string() +
              " --groups 4 --seed 9 --out " + (dir / "groups").string()) == 0);
    CHECK(fs::exists(dir / "groups" / "group_3" / "index.json"));

    // loop needs a concrete id from the store
    CHECK(run(tool + " loop --model " + (dir / "model.napc").string() +
              " --data " + (dir / "data").string() +
              " --seq synth-000001 --k 5 --out " +
              (dir / "loop.csv").string()) == 0);
    CHECK(slurp(dir / "loop.csv").rfind("iteration,class,value,count", 0) == 0);
  }

  SUBCASE("ensemble and rank consume models and populations") {
    CHECK(run(tool + " ensemble --models " + (dir / "model.napc").string() +
              "," + (dir / "model.napcq").string() + " --tau 0.667 --data " +
              (dir / "data").string() + " --out " +
              (dir / "ens.csv").string()) == 0);
    CHECK(slurp(dir / "ens.csv").rfind("seq_id,class,count", 0) == 0);

    fs::create_directories(dir / "pops");
    fs::copy_file(dir / "pop.csv", dir / "pops" / "model.csv");
    CHECK(run(tool + " rank --models " + (dir / "model.napc").string() +
              " --pop-dir " + (dir / "pops").string() +
              " --n 30 --reps 100 --seed 4 --out " +
              (dir / "rank.json").string()) == 0);
    CHECK(slurp(dir / "rank.json").find("ranking") != std::string::npos);
  }
}

TEST_CASE("exit codes map the error taxonomy") {
  testsup::TempDir tmp;
  const fs::path dir = tmp.path();

  SUBCASE("unknown flags are usage errors (exit 1)") {
    CHECK(run(tool + " simulate --bogus-flag 1") == 1);
    CHECK(run(tool + " no-such-command") == 1);
  }

  SUBCASE("missing inputs are data errors (exit 2)") {
    CHECK(run(tool + " infer --model /nonexistent.napc --data /nonexistent" +
              " --out " + (dir / "x.csv").string()) == 2);
  }

  SUBCASE("quantizer exhaustion exits 4 naming the layer") {
    write_file(dir / "synth.cfg",
               "input_dim = 8\nnum_sequences = 6\nframes_min = 8\n"
               "frames_max = 10\nseed = 2\n");
    write_file(dir / "model.spec", "lstm_layers = 1\nlstm_units = 4\n");
    write_file(dir / "train.cfg",
               "epochs = 2\nbatch_size = 4\nlr0 = 0.05\n");
    REQUIRE(run(tool + " synth --config " + (dir / "synth.cfg").string() +
                " --out " + (dir / "d").string()) == 0);
    REQUIRE(run(tool + " train --data " + (dir / "d").string() + " --spec " +
                (dir / "model.spec").string() + " --config " +
                (dir / "train.cfg").string() + " --out " +
                (dir / "m.napc").string() + " --quiet") == 0);
    const int rc = std::system((tool + " quantize --model " +
                                (dir / "m.napc").string() + " --calib " +
                                (dir / "d").string() +
                                " --eps 0.0000001 --exp-min 0 --exp-max 0" +
                                " --max-iters 3 --seed 1 --out " +
                                (dir / "m.napcq").string() + " 2> " +
                                (dir / "err.txt").string() + " > /dev/null")
                                   .c_str());
    CHECK(WEXITSTATUS(rc) == 4);
    CHECK(slurp(dir / "err.txt").find("fc_in") != std::string::npos);
  }

  SUBCASE("version flag prints and exits 0") {
    CHECK(run(tool + " --version") == 0);
  }
}

TEST_CASE("train runs are reproducible at the file level") {
  testsup::TempDir tmp;
  const fs::path dir = tmp.path();
  write_file(dir / "synth.cfg",
             "input_dim = 10\nnum_sequences = 16\nframes_min = 8\n"
             "frames_max = 12\nseed = 6\n");
  write_file(dir / "model.spec", "lstm_layers = 1\nlstm_units = 6\n");
  write_file(dir / "train.cfg",
             "epochs = 4\nbatch_size = 4\nlr0 = 0.1\ndropout_rate = 0.1\n");
  REQUIRE(run(tool + " synth --config " + (dir / "synth.cfg").string() +
              " --out " + (dir / "d").string()) == 0);

  const std::string train_cmd = tool + " train --data " + (dir / "d").string() +
                                " --spec " + (dir / "model.spec").string() +
                                " --config " + (dir / "train.cfg").string() +
                                " --quiet --out ";
  REQUIRE(run(train_cmd + (dir / "a.napc").string()) == 0);
  REQUIRE(run(train_cmd + (dir / "b.napc").string()) == 0);
  CHECK(slurp(dir / "a.napc") == slurp(dir / "b.napc"));

  REQUIRE(run(train_cmd + (dir / "c.napc").string() + " --training-seed 77") ==
          0);
  CHECK(slurp(dir / "a.napc") != slurp(dir / "c.napc"));
}
