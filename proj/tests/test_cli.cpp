// Drives the built command-line binary end to end at a tiny scale.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "causarm/transition.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() { return std::string(CAUSARM_CLI_PATH); }

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "causarm_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli: gen is deterministic and row counts match the flags") {
  TempDir dir;
  const std::string kin = (dir.path / "kin.csv").string();
  const std::string kin2 = (dir.path / "kin2.csv").string();

  REQUIRE(run("gen --mode kinematics --steps 500 --seed 7 --out " + kin) == 0);
  REQUIRE(run("gen --mode kinematics --steps 500 --seed 7 --out " + kin2) == 0);
  CHECK(slurp(kin) == slurp(kin2));  // byte-identical CSV

  causarm::TransitionSet set = causarm::read_transition_set(kin);
  CHECK(set.records.size() == 500);
  CHECK(set.manifest.seed == 7);

  const std::string phys = (dir.path / "phys.csv").string();
  REQUIRE(run("gen --mode physics --episodes 2 --iterations 100 --seed 3 --out " +
              phys) == 0);
  CHECK(causarm::read_transition_set(phys).records.size() == 200);

  CHECK(run("gen --mode warp --steps 10 --out " + kin) == 2);  // config error
}

TEST_CASE("cli: train, rollout, explain produce their artifacts") {
  TempDir dir;
  const std::string kin = (dir.path / "kin.csv").string();
  REQUIRE(run("gen --mode kinematics --steps 600 --seed 5 --out " + kin) == 0);

  const std::string model = (dir.path / "fm.json").string();
  const std::string cv = (dir.path / "cv.csv").string();
  const std::string loss = (dir.path / "loss.csv").string();
  REQUIRE(run("train --role fm --data " + kin + " --out " + model + " --cv-out " + cv +
              " --loss-out " + loss +
              " --epochs 3 --kfold 2 --hidden 12,12 --seed 9") == 0);
  CHECK(fs::exists(model));
  CHECK(slurp(cv).find("fold,head,mae") == 0);
  CHECK(slurp(loss).find("epoch,total_loss,joints_loss,effector_position_loss") == 0);

  CHECK(run("train --role fm --data " + kin + " --kfold 1 --out " + model) == 2);

  const std::string rolldir = (dir.path / "roll").string();
  REQUIRE(run("rollout --fm " + model + " --data " + kin +
              " --horizon 4 --trajectories 10 --out-dir " + rolldir) == 0);
  CHECK(fs::exists(fs::path(rolldir) / "rollout.csv"));
  CHECK(fs::exists(fs::path(rolldir) / "rollout.svg"));

  const std::string expdir = (dir.path / "exp").string();
  REQUIRE(run("explain --fm " + model + " --data " + kin +
              " --sample 6 --background 8 --method deep --out-dir " + expdir) == 0);
  for (const char* artifact : {"phi.csv", "global.csv", "relevance.csv", "heatmap.svg"})
    CHECK(fs::exists(fs::path(expdir) / artifact));

  // missing file maps to the data exit code
  CHECK(run("rollout --fm " + model + " --data " + (dir.path / "nope.csv").string()) ==
        3);
}
