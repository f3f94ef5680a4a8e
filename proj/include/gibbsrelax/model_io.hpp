#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gibbsrelax/model.hpp"
#include "json.hpp"

namespace gibbsrelax {

// Parsed model file. The Ising member is present only when the file used the
// {"n","J","h"} shortcut form; `mrf` is always usable.
struct LoadedModel {
  Mrf mrf;
  std::optional<IsingModel> ising;
};

inline nlohmann::ordered_json mrf_to_json(const Mrf& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["q"] = m.q;
  j["k"] = m.k;
  j["edges"] = nlohmann::ordered_json::array();
  for (const MrfEdge& e : m.edges) {
    nlohmann::ordered_json je;
    je["vertices"] = e.vertices;
    je["table"] = e.table;
    j["edges"].push_back(std::move(je));
  }
  j["fields"] = m.fields;
  return j;
}

inline nlohmann::ordered_json ising_to_json(const IsingModel& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["J"] = m.J;
  j["h"] = m.h;
  return j;
}

namespace detail {

template <typename T>
T json_get(const nlohmann::json& j, const char* key) {
  if (!j.contains(key))
    throw invalid_input_error(std::string("model json: missing key \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& ex) {
    throw invalid_input_error(std::string("model json: bad value for \"") + key +
                              "\": " + ex.what());
  }
}

}  // namespace detail

inline IsingModel ising_from_json(const nlohmann::json& j) {
  IsingModel m;
  m.n = detail::json_get<int>(j, "n");
  m.J = detail::json_get<std::vector<std::vector<double>>>(j, "J");
  m.h = detail::json_get<std::vector<double>>(j, "h");
  validate_ising(m);
  return m;
}

inline Mrf mrf_from_json(const nlohmann::json& j) {
  Mrf m;
  m.n = detail::json_get<int>(j, "n");
  m.q = detail::json_get<int>(j, "q");
  m.k = detail::json_get<int>(j, "k");
  if (!j.contains("edges") || !j.at("edges").is_array())
    throw invalid_input_error("model json: \"edges\" must be an array");
  for (const auto& je : j.at("edges")) {
    MrfEdge e;
    e.vertices = detail::json_get<std::vector<int>>(je, "vertices");
    e.table = detail::json_get<std::vector<double>>(je, "table");
    m.edges.push_back(std::move(e));
  }
  m.fields = detail::json_get<std::vector<std::vector<double>>>(j, "fields");
  validate_mrf(m);
  return m;
}

inline LoadedModel load_model_json(const nlohmann::json& j) {
  if (!j.is_object()) throw invalid_input_error("model json: top level must be an object");
  LoadedModel out;
  if (j.contains("J")) {
    out.ising = ising_from_json(j);
    out.mrf = ising_to_mrf(*out.ising);
  } else {
    out.mrf = mrf_from_json(j);
  }
  return out;
}

inline LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw invalid_input_error(std::string("model json parse error: ") + ex.what());
  }
  return load_model_json(j);
}

inline void save_model_file(const Mrf& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw invalid_input_error("cannot write model file: " + path);
  out << mrf_to_json(m).dump(2) << "\n";
}

inline void save_model_file(const IsingModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw invalid_input_error("cannot write model file: " + path);
  out << ising_to_json(m).dump(2) << "\n";
}

}  // namespace gibbsrelax
