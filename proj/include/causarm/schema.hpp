#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "causarm/csv.hpp"
#include "causarm/errors.hpp"
#include "causarm/train.hpp"

namespace causarm {

struct SchemaField {
  std::string name;
  std::size_t dims = 0;
  std::string unit;
};

namespace detail {

inline void validate_fields(const std::vector<SchemaField>& fields,
                            const char* what) {
  if (fields.empty()) throw InvalidInput(std::string(what) + ": no fields");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].dims == 0)
      throw InvalidInput(std::string(what) + ": field dims must be >= 1");
    if (fields[i].name.empty())
      throw InvalidInput(std::string(what) + ": empty field name");
    for (std::size_t j = i + 1; j < fields.size(); ++j)
      if (fields[i].name == fields[j].name)
        throw InvalidInput(std::string(what) + ": duplicate field '" +
                           fields[i].name + "'");
  }
}

inline std::size_t total_dims(const std::vector<SchemaField>& fields) {
  std::size_t d = 0;
  for (const auto& f : fields) d += f.dims;
  return d;
}

// Per-component labels for reports and figure axes.
inline std::vector<std::string> component_labels(const SchemaField& f) {
  std::vector<std::string> out;
  if (f.name == "object" && f.dims == 9) {
    out = {"o_x", "o_y", "o_z", "o_rx", "o_ry", "o_rz", "o_R", "o_G", "o_B"};
  } else if (f.name == "joints") {
    for (std::size_t i = 0; i < f.dims; ++i) out.push_back("th" + std::to_string(i));
  } else if (f.name == "effector" && f.dims == 3) {
    out = {"ef_x", "ef_y", "ef_z"};
  } else if (f.name == "effector" && f.dims == 6) {
    out = {"ef_x", "ef_y", "ef_z", "ef_rx", "ef_ry", "ef_rz"};
  } else if (f.name == "magnet" && f.dims == 1) {
    out = {"mgt"};
  } else if (f.name == "joint_delta") {
    for (std::size_t i = 0; i < f.dims; ++i) out.push_back("a" + std::to_string(i));
  } else if (f.name == "magnet_cmd" && f.dims == 1) {
    out = {"a_mgt"};
  } else {
    for (std::size_t i = 0; i < f.dims; ++i)
      out.push_back(f.name + "_" + std::to_string(i));
  }
  return out;
}

}  // namespace detail

// Ordered, named subvectors composing a state vector.
struct StateSchema {
  std::vector<SchemaField> fields;

  std::size_t total_dim() const { return detail::total_dims(fields); }
  void validate() const { detail::validate_fields(fields, "StateSchema"); }

  bool has(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return true;
    return false;
  }

  SliceDef slice_def(const std::string& name) const {
    std::size_t off = 0;
    for (const auto& f : fields) {
      if (f.name == name) return {name, off, f.dims};
      off += f.dims;
    }
    throw InvalidInput("StateSchema: unknown subvector '" + name + "'");
  }

  std::vector<SliceDef> all_slices() const {
    std::vector<SliceDef> out;
    std::size_t off = 0;
    for (const auto& f : fields) {
      out.push_back({f.name, off, f.dims});
      off += f.dims;
    }
    return out;
  }

  std::vector<std::string> component_labels() const {
    std::vector<std::string> out;
    for (const auto& f : fields)
      for (auto& l : detail::component_labels(f)) out.push_back(std::move(l));
    return out;
  }

  bool operator==(const StateSchema& o) const {
    if (fields.size() != o.fields.size()) return false;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i].name != o.fields[i].name || fields[i].dims != o.fields[i].dims)
        return false;
    return true;
  }
};

struct ActionSchema {
  std::vector<SchemaField> fields;

  std::size_t total_dim() const { return detail::total_dims(fields); }
  void validate() const { detail::validate_fields(fields, "ActionSchema"); }

  bool has(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return true;
    return false;
  }

  SliceDef slice_def(const std::string& name) const {
    std::size_t off = 0;
    for (const auto& f : fields) {
      if (f.name == name) return {name, off, f.dims};
      off += f.dims;
    }
    throw InvalidInput("ActionSchema: unknown subvector '" + name + "'");
  }

  std::vector<SliceDef> all_slices() const {
    std::vector<SliceDef> out;
    std::size_t off = 0;
    for (const auto& f : fields) {
      out.push_back({f.name, off, f.dims});
      off += f.dims;
    }
    return out;
  }

  std::vector<std::string> component_labels() const {
    std::vector<std::string> out;
    for (const auto& f : fields)
      for (auto& l : detail::component_labels(f)) out.push_back(std::move(l));
    return out;
  }

  bool operator==(const ActionSchema& o) const {
    if (fields.size() != o.fields.size()) return false;
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i].name != o.fields[i].name || fields[i].dims != o.fields[i].dims)
        return false;
    return true;
  }
};

// kin-v1: s = [theta(7), ef position(3)], a = [joint_delta(7)]
inline StateSchema kin_state_schema() {
  return {{{"joints", 7, "rad"}, {"effector", 3, "m"}}};
}
inline ActionSchema kin_action_schema() { return {{{"joint_delta", 7, "rad"}}}; }

// phys-v1: s = [object(9), theta(7), ef pose(6), magnet(1)],
//          a = [joint_delta(7), magnet_cmd(1)]
inline StateSchema phys_state_schema() {
  return {{{"object", 9, "m|rad|rgb"},
           {"joints", 7, "rad"},
           {"effector", 6, "m|rad"},
           {"magnet", 1, "flag"}}};
}
inline ActionSchema phys_action_schema() {
  return {{{"joint_delta", 7, "rad"}, {"magnet_cmd", 1, "switch"}}};
}

inline std::vector<double> slice(std::span<const double> state,
                                 const StateSchema& schema,
                                 const std::string& name) {
  if (state.size() != schema.total_dim())
    throw InvalidInput("slice: state length does not match schema");
  const SliceDef d = schema.slice_def(name);
  return {state.begin() + d.offset, state.begin() + d.offset + d.dims};
}

// s'(t+1): the state vector with the joints subvector removed.
inline std::vector<double> strip_theta_next(std::span<const double> s_next,
                                            const StateSchema& schema) {
  if (!schema.has("joints"))
    throw InvalidInput("strip_theta_next: schema has no joints subvector");
  if (s_next.size() != schema.total_dim())
    throw InvalidInput("strip_theta_next: state length does not match schema");
  const SliceDef d = schema.slice_def("joints");
  std::vector<double> out;
  out.reserve(s_next.size() - d.dims);
  out.insert(out.end(), s_next.begin(), s_next.begin() + d.offset);
  out.insert(out.end(), s_next.begin() + d.offset + d.dims, s_next.end());
  return out;
}

// Layout of the stripped vector, for manifests and model inputs.
inline StateSchema stripped_schema(const StateSchema& schema) {
  if (!schema.has("joints"))
    throw InvalidInput("stripped_schema: schema has no joints subvector");
  StateSchema out;
  for (const auto& f : schema.fields)
    if (f.name != "joints") out.fields.push_back(f);
  return out;
}

inline nlohmann::json fields_to_json(const std::vector<SchemaField>& fields) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : fields)
    j.push_back({{"name", f.name}, {"dims", f.dims}, {"unit", f.unit}});
  return j;
}

inline std::vector<SchemaField> fields_from_json(const nlohmann::json& j) {
  std::vector<SchemaField> out;
  for (const auto& f : j)
    out.push_back({f.at("name").get<std::string>(), f.at("dims").get<std::size_t>(),
                   f.value("unit", "")});
  return out;
}

// Stable identity for (state, action) schema pairs, recorded in model files.
inline std::string schema_pair_hash(const StateSchema& s, const ActionSchema& a) {
  std::string repr;
  for (const auto& f : s.fields) repr += f.name + ":" + std::to_string(f.dims) + ";";
  repr += "|";
  for (const auto& f : a.fields) repr += f.name + ":" + std::to_string(f.dims) + ";";
  return fnv1a_hex(repr);
}

}  // namespace causarm
