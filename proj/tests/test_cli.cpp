#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "support/corpus.hpp"
#include "support/tempdir.hpp"

using crtest::TempDir;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CARTOON_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  TempDir dir{"cli"};
  Workspace() {
    crtest::write_corpus(dir.path() / "photos", "p", 2, 40, 40, 1, crtest::synth_photo);
    crtest::write_corpus(dir.path() / "cartoons", "c", 2, 40, 40, 5, crtest::synth_cartoon);
    std::ofstream(dir.str("train.cfg")) << "crop = 32\nmode = reconstruction\nmax_steps = 2\ncheckpoint_every = 0\n";
  }
  std::string train_args() const {
    return "train --config " + dir.str("train.cfg") + " --photo-dir " + dir.str("photos") + " --cartoon-dir " +
           dir.str("cartoons") + " --out " + dir.str("run");
  }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("train, render and reconstruct end to end") {
  Workspace ws;
  REQUIRE(run(ws.train_args()) == 0);
  const std::string ckpt = ws.dir.str("run/last.crw");
  REQUIRE(std::filesystem::exists(ckpt));
  const std::string photo = ws.dir.str("photos/p_0.png"), style = ws.dir.str("cartoons/c_1.png");

  CHECK(run("render --photo " + photo + " --style " + style + " --ckpt " + ckpt + " --out " + ws.dir.str("a.png")) == 0);
  CHECK(run("render --photo " + photo + " --style " + style + " --ckpt " + ckpt + " --out " + ws.dir.str("b.png")) == 0);
  CHECK(read_text(ws.dir.str("a.png")) == read_text(ws.dir.str("b.png")));
  const cr::Tensor<float> out = cr::load_image(ws.dir.str("a.png"));
  CHECK(out.h() == 40);
  CHECK(out.w() == 40);

  CHECK(run("render --photo " + photo + " --style " + style + " --ckpt " + ckpt + " --out " + ws.dir.str("t.png") +
            " --tile 16 --overlap 48") == 0);
  CHECK(run("reconstruct --input " + photo + " --ckpt " + ckpt + " --out " + ws.dir.str("r.png")) == 0);
  CHECK(cr::load_image(ws.dir.str("r.png")).shape() == cr::load_image(photo).shape());

  SUBCASE("resume continues the run") {
    std::ofstream(ws.dir.str("more.cfg")) << "crop = 32\n";
    CHECK(run("train --config " + ws.dir.str("more.cfg") + " --resume " + ckpt) == 0);
  }
}

TEST_CASE("exit codes") {
  Workspace ws;
  const std::string photo = ws.dir.str("photos/p_0.png"), style = ws.dir.str("cartoons/c_0.png");
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("render --photo " + photo) == 1);
  CHECK(run("--help") == 0);
  CHECK(run("render --photo " + photo + " --style " + style + " --ckpt " + ws.dir.str("none.crw") + " --out x.png") == 2);

  std::ofstream(ws.dir.str("bad.cfg")) << "crop = 32\nwhat = 1\n";
  CHECK(run("train --config " + ws.dir.str("bad.cfg")) == 2);
  CHECK(run(ws.train_args() + " --mode sideways") == 1);
  CHECK(run("train --config " + ws.dir.str("train.cfg") + " --photo-dir " + ws.dir.str("nowhere") + " --cartoon-dir " +
            ws.dir.str("cartoons") + " --out " + ws.dir.str("run")) == 2);

  REQUIRE(run(ws.train_args()) == 0);
  const std::string ckpt = ws.dir.str("run/last.crw");
  const std::string base = "render --photo " + photo + " --style " + style + " --ckpt " + ckpt + " --out " + ws.dir.str("o.png");
  CHECK(run(base + " --tile 20") == 1);
  CHECK(run(base + " --tile 16 --overlap 8") == 1);
  CHECK(run(base + " --mem-limit-mb 1") == 4);

  std::ofstream(ws.dir.str("blowup.cfg")) << "crop = 32\nmode = reconstruction\nmax_steps = 3\nlr_g = 1e30\n";
  CHECK(run("train --config " + ws.dir.str("blowup.cfg") + " --photo-dir " + ws.dir.str("photos") + " --cartoon-dir " +
            ws.dir.str("cartoons") + " --out " + ws.dir.str("blow")) == 3);
}

TEST_CASE("check subcommand passes") { CHECK(run("check") == 0); }

TEST_SUITE_END();
