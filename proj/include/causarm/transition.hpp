#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causarm/csv.hpp"
#include "causarm/schema.hpp"

namespace causarm {

// One (s, a, s') record, the universal training sample.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  std::size_t episode = 0;
  std::size_t step = 0;

  bool operator==(const Transition&) const = default;
};

struct WorldConstants {
  double table_z = 0.0;
  double grasp_radius = 0.05;
  double half_extent = 0.025;
  std::string chain_hash;
};

struct Manifest {
  std::string schema_version;  // kin-v1 | phys-v1
  StateSchema state;
  ActionSchema action;
  nlohmann::json generator;  // config echo
  std::uint64_t seed = 0;
  std::size_t count = 0;
  WorldConstants world;
};

struct TransitionSet {
  Manifest manifest;
  std::vector<Transition> records;

  void validate() const {
    manifest.state.validate();
    manifest.action.validate();
    if (manifest.count != records.size())
      throw DataError("TransitionSet: manifest count disagrees with records");
    const std::size_t sd = manifest.state.total_dim();
    const std::size_t ad = manifest.action.total_dim();
    const bool with_joints =
        manifest.state.has("joints") && manifest.action.has("joint_delta");
    SliceDef js{}, as{};
    if (with_joints) {
      js = manifest.state.slice_def("joints");
      as = manifest.action.slice_def("joint_delta");
      if (js.dims != as.dims)
        throw DataError("TransitionSet: joint_delta dims do not match joints");
    }
    for (std::size_t r = 0; r < records.size(); ++r) {
      const auto& t = records[r];
      if (t.s.size() != sd || t.s_next.size() != sd || t.a.size() != ad)
        throw MalformedFile("TransitionSet: record length mismatch",
                            static_cast<long>(r));
      for (double v : t.s)
        if (!std::isfinite(v))
          throw MalformedFile("TransitionSet: non-finite state", static_cast<long>(r));
      // realized-action identity: theta(t) + a = theta(t+1), bit-exact
      if (with_joints) {
        for (std::size_t j = 0; j < js.dims; ++j) {
          const double lhs = t.s[js.offset + j] + t.a[as.offset + j];
          if (lhs != t.s_next[js.offset + j])
            throw MalformedFile("TransitionSet: joints identity violated",
                                static_cast<long>(r));
        }
      }
    }
  }
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
  return nlohmann::json{
      {"schema_version", m.schema_version},
      {"state_schema", fields_to_json(m.state.fields)},
      {"action_schema", fields_to_json(m.action.fields)},
      {"generator", m.generator},
      {"seed", m.seed},
      {"count", m.count},
      {"world_constants",
       {{"table_z", m.world.table_z},
        {"grasp_radius", m.world.grasp_radius},
        {"half_extent", m.world.half_extent},
        {"chain_hash", m.world.chain_hash}}}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  m.schema_version = j.at("schema_version").get<std::string>();
  m.state.fields = fields_from_json(j.at("state_schema"));
  m.action.fields = fields_from_json(j.at("action_schema"));
  m.generator = j.value("generator", nlohmann::json::object());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.count = j.at("count").get<std::size_t>();
  const auto& w = j.at("world_constants");
  m.world.table_z = w.at("table_z").get<double>();
  m.world.grasp_radius = w.at("grasp_radius").get<double>();
  m.world.half_extent = w.at("half_extent").get<double>();
  m.world.chain_hash = w.value("chain_hash", "");
  return m;
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".manifest.json";
  return p;
}

// CSV with header episode,step,s_0..,a_0..,sn_0.. plus a sidecar manifest.
// Serialization keeps 17 significant digits so the round trip is value-exact.
inline void write_transition_set(const TransitionSet& set,
                                 const std::filesystem::path& csv_path) {
  set.validate();
  const std::size_t sd = set.manifest.state.total_dim();
  const std::size_t ad = set.manifest.action.total_dim();

  std::ofstream f(csv_path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + csv_path.string());
  std::string header = "episode,step";
  for (std::size_t i = 0; i < sd; ++i) header += ",s_" + std::to_string(i);
  for (std::size_t i = 0; i < ad; ++i) header += ",a_" + std::to_string(i);
  for (std::size_t i = 0; i < sd; ++i) header += ",sn_" + std::to_string(i);
  f << header << "\n";
  for (const auto& t : set.records) {
    std::string line = std::to_string(t.episode) + "," + std::to_string(t.step);
    for (double v : t.s) line += "," + fmt_double(v);
    for (double v : t.a) line += "," + fmt_double(v);
    for (double v : t.s_next) line += "," + fmt_double(v);
    f << line << "\n";
  }
  if (!f) throw DataError("write failed: " + csv_path.string());
  f.close();
  write_text_file(manifest_path_for(csv_path),
                  manifest_to_json(set.manifest).dump(1) + "\n");
}

inline TransitionSet read_transition_set(const std::filesystem::path& csv_path) {
  TransitionSet set;
  try {
    set.manifest = manifest_from_json(
        nlohmann::json::parse(read_text_file(manifest_path_for(csv_path))));
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile("manifest: " + std::string(e.what()));
  }
  const std::size_t sd = set.manifest.state.total_dim();
  const std::size_t ad = set.manifest.action.total_dim();
  const std::size_t expected_cols = 2 + 2 * sd + ad;

  std::ifstream f(csv_path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + csv_path.string());
  std::string line;
  if (!std::getline(f, line)) throw MalformedFile("empty transition file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    auto cols = split_csv_line(line);
    if (cols.size() != expected_cols || cols[0] != "episode" || cols[1] != "step")
      throw MalformedFile("header does not match manifest layout", 0);
  }
  long row = 0;
  while (std::getline(f, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != expected_cols)
      throw MalformedFile("wrong column count", row);
    Transition t;
    t.episode = static_cast<std::size_t>(parse_double(cols[0], row));
    t.step = static_cast<std::size_t>(parse_double(cols[1], row));
    t.s.reserve(sd);
    t.a.reserve(ad);
    t.s_next.reserve(sd);
    std::size_t c = 2;
    for (std::size_t i = 0; i < sd; ++i) t.s.push_back(parse_double(cols[c++], row));
    for (std::size_t i = 0; i < ad; ++i) t.a.push_back(parse_double(cols[c++], row));
    for (std::size_t i = 0; i < sd; ++i) t.s_next.push_back(parse_double(cols[c++], row));
    set.records.push_back(std::move(t));
  }
  set.validate();  // includes count and the joints identity
  return set;
}

// Seeded random train/test split (delegates index math to kfold logic).
inline std::pair<TransitionSet, TransitionSet> split(const TransitionSet& set,
                                                     double fraction,
                                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidInput("split: fraction must be in (0,1)");
  const std::size_t n = set.records.size();
  const std::size_t n_train = static_cast<std::size_t>(fraction * static_cast<double>(n));
  if (n_train == 0 || n_train == n) throw InvalidInput("split: degenerate sizes");
  Rng rng(seed);
  auto perm = rng.permutation(n);
  TransitionSet train, test;
  train.manifest = set.manifest;
  test.manifest = set.manifest;
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? train : test).records.push_back(set.records[perm[i]]);
  train.manifest.count = train.records.size();
  test.manifest.count = test.records.size();
  return {std::move(train), std::move(test)};
}

inline std::vector<std::vector<std::size_t>> kfold(const TransitionSet& set,
                                                   std::size_t k, std::uint64_t seed) {
  return kfold_split(set.records.size(), k, seed);
}

}  // namespace causarm
