#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "causarm/schema.hpp"
#include "causarm/transition.hpp"

using namespace causarm;

TEST_CASE("slice: layout, reconstruction, unknown name") {
  StateSchema kin = kin_state_schema();
  CHECK(kin.total_dim() == 10);

  std::vector<double> state(10);
  for (std::size_t i = 0; i < 10; ++i) state[i] = static_cast<double>(i);

  auto joints = slice(state, kin, "joints");
  REQUIRE(joints.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) CHECK(joints[i] == state[i]);

  auto ef = slice(state, kin, "effector");
  CHECK(ef == std::vector<double>{7.0, 8.0, 9.0});

  // slicing then re-concatenating reproduces the state
  std::vector<double> rebuilt;
  for (const auto& f : kin.fields) {
    auto part = slice(state, kin, f.name);
    rebuilt.insert(rebuilt.end(), part.begin(), part.end());
  }
  CHECK(rebuilt == state);

  CHECK_THROWS_AS(slice(state, kin, "gripper"), InvalidInput);
}

TEST_CASE("strip_theta_next: widths and double application") {
  StateSchema kin = kin_state_schema();
  std::vector<double> s(10, 1.0);
  auto stripped = strip_theta_next(s, kin);
  CHECK(stripped.size() == 3);

  StateSchema phys = phys_state_schema();
  CHECK(phys.total_dim() == 23);
  std::vector<double> sp(23, 0.5);
  CHECK(strip_theta_next(sp, phys).size() == 16);

  // applying twice: the stripped layout no longer has a joints field
  StateSchema once = stripped_schema(phys);
  CHECK(once.total_dim() == 16);
  CHECK_THROWS_AS(strip_theta_next(strip_theta_next(sp, phys), once), InvalidInput);
}

TEST_CASE("schema labels name the paper-style components") {
  auto labels = phys_state_schema().component_labels();
  REQUIRE(labels.size() == 23);
  CHECK(labels[0] == "o_x");
  CHECK(labels[8] == "o_B");
  CHECK(labels[9] == "th0");
  CHECK(labels[16] == "ef_x");
  CHECK(labels[22] == "mgt");
  auto actions = phys_action_schema().component_labels();
  CHECK(actions[0] == "a0");
  CHECK(actions[7] == "a_mgt");
}

namespace {

TransitionSet random_set(std::size_t n, std::uint64_t seed) {
  TransitionSet set;
  set.manifest.schema_version = "kin-v1";
  set.manifest.state = kin_state_schema();
  set.manifest.action = kin_action_schema();
  set.manifest.seed = seed;
  Rng rng(seed);
  for (std::size_t r = 0; r < n; ++r) {
    Transition t;
    t.episode = 0;
    t.step = r;
    for (int i = 0; i < 10; ++i) t.s.push_back(rng.uniform(-3, 3));
    for (int i = 0; i < 7; ++i) t.a.push_back(rng.uniform(-1, 1));
    t.s_next.resize(10);
    for (int i = 0; i < 7; ++i) t.s_next[i] = t.s[i] + t.a[i];  // identity holds
    for (int i = 7; i < 10; ++i) t.s_next[i] = rng.uniform(-3, 3);
    set.records.push_back(std::move(t));
  }
  set.manifest.count = n;
  return set;
}

}  // namespace

TEST_CASE("transition set round trip is value-exact") {
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "causarm_set_test.csv";
  TransitionSet set = random_set(1000, 9001);
  write_transition_set(set, path);
  TransitionSet back = read_transition_set(path);
  CHECK(back.manifest.count == 1000);
  CHECK(back.manifest.schema_version == "kin-v1");
  REQUIRE(back.records.size() == set.records.size());
  for (std::size_t i = 0; i < set.records.size(); ++i)
    CHECK(back.records[i] == set.records[i]);
  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path_for(path));
}

TEST_CASE("empty set writes header plus manifest and reads back empty") {
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "causarm_set_empty.csv";
  TransitionSet set = random_set(0, 1);
  write_transition_set(set, path);
  TransitionSet back = read_transition_set(path);
  CHECK(back.records.empty());
  CHECK(back.manifest.count == 0);
  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path_for(path));
}

TEST_CASE("malformed files are rejected with a row index") {
  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / "causarm_set_bad.csv";
  TransitionSet set = random_set(5, 7);
  write_transition_set(set, path);

  // truncate a cell on data row 3
  std::string body = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto nl = body.find('\n', pos);
    lines.push_back(body.substr(pos, nl - pos));
    pos = nl + 1;
  }
  auto cut = lines[3].rfind(',');
  lines[3] = lines[3].substr(0, cut);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  write_text_file(path, out);

  try {
    read_transition_set(path);
    FAIL("expected MalformedFile");
  } catch (const MalformedFile& e) {
    CHECK(e.row() == 3);
  }

  // non-numeric cell
  write_transition_set(set, path);
  body = read_text_file(path);
  auto spot = body.find("\n", body.find("\n") + 1);  // start of row 2
  body.replace(body.find(",", spot) + 1, 1, "x");
  write_text_file(path, body);
  CHECK_THROWS_AS(read_transition_set(path), MalformedFile);

  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path_for(path));
}

TEST_CASE("joints identity violations are reported, not accepted") {
  TransitionSet set = random_set(3, 11);
  set.records[1].s_next[2] += 1e-9;
  CHECK_THROWS_AS(set.validate(), MalformedFile);
}

TEST_CASE("split and kfold wrappers partition the set") {
  TransitionSet set = random_set(100, 5);
  auto [train, test] = split(set, 0.8, 13);
  CHECK(train.records.size() == 80);
  CHECK(test.records.size() == 20);
  CHECK(train.manifest.count == 80);

  auto folds = kfold(set, 5, 3);
  REQUIRE(folds.size() == 5);
  std::size_t total = 0;
  for (const auto& f : folds) total += f.size();
  CHECK(total == 100);

  CHECK_THROWS_AS(split(set, 1.5, 0), InvalidInput);
  CHECK_THROWS_AS(kfold(set, 1, 0), InvalidInput);
}
