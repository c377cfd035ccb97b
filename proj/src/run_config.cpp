#include "hgnas/run_config.hpp"

#include "hgnas/dataset_io.hpp"
#include "hgnas/error.hpp"

#include <fstream>

namespace hgnas {

using nlohmann::json;

SynthConfig SynthOptions::to_synth_config() const {
  SynthConfig c = acm_like_config(seed, authors, papers, subjects);
  c.noise = noise;
  c.signal = signal;
  return c;
}

namespace {

template <typename F>
void each_key(const json& j, const std::string& section, F&& assign) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (!assign(key, v)) throw ConfigError("unknown key '" + section + "." + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError(section + "." + key + ": " + e.what());
    }
  }
}

json to_json(const SynthOptions& s) {
  return {{"seed", s.seed},         {"authors", s.authors}, {"papers", s.papers},
          {"subjects", s.subjects}, {"noise", s.noise},     {"signal", s.signal}};
}

json to_json(const SpaceOptions& s) {
  return {{"layers", s.layers}, {"kind", to_string(s.kind)}, {"prune", s.prune}, {"self_relations", s.self_relations}};
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"dataset",
           {{"path", c.dataset.path}, {"synthetic", to_json(c.dataset.synthetic)}, {"meta_path", c.dataset.meta_path.steps}}},
          {"space", to_json(c.space)},
          {"search", to_json(c.search)},
          {"controller", c.controller},
          {"fixture", c.fixture},
          {"gateway", to_json(c.gateway)},
          {"evaluator", c.evaluator},
          {"oracle", {{"path", c.oracle.path}, {"repeats", c.oracle.repeats}, {"workers", c.oracle.workers}}},
          {"output", c.output}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  each_key(j, "config", [&](const std::string& key, const json& v) {
    if (key == "dataset") {
      each_key(v, "dataset", [&](const std::string& k, const json& x) {
        if (k == "path") c.dataset.path = x.get<std::string>();
        else if (k == "meta_path") c.dataset.meta_path.steps = x.get<std::vector<std::string>>();
        else if (k == "synthetic")
          each_key(x, "dataset.synthetic", [&](const std::string& s, const json& y) {
            SynthOptions& o = c.dataset.synthetic;
            if (s == "seed") o.seed = y.get<std::uint64_t>();
            else if (s == "authors") o.authors = y.get<Index>();
            else if (s == "papers") o.papers = y.get<Index>();
            else if (s == "subjects") o.subjects = y.get<Index>();
            else if (s == "noise") o.noise = y.get<double>();
            else if (s == "signal") o.signal = y.get<double>();
            else return false;
            return true;
          });
        else return false;
        return true;
      });
    } else if (key == "space") {
      each_key(v, "space", [&](const std::string& k, const json& x) {
        if (k == "layers") c.space.layers = x.get<int>();
        else if (k == "kind") c.space.kind = space_kind_from_string(x.get<std::string>());
        else if (k == "prune") c.space.prune = x.get<bool>();
        else if (k == "self_relations") c.space.self_relations = x.get<bool>();
        else return false;
        return true;
      });
    } else if (key == "search") {
      c.search = search_config_from_json(v);
    } else if (key == "controller") {
      c.controller = v.get<std::string>();
    } else if (key == "fixture") {
      c.fixture = v.get<std::string>();
    } else if (key == "gateway") {
      c.gateway = gateway_config_from_json(v);
    } else if (key == "evaluator") {
      c.evaluator = v.get<std::string>();
    } else if (key == "oracle") {
      each_key(v, "oracle", [&](const std::string& k, const json& x) {
        if (k == "path") c.oracle.path = x.get<std::string>();
        else if (k == "repeats") c.oracle.repeats = x.get<int>();
        else if (k == "workers") c.oracle.workers = x.get<int>();
        else return false;
        return true;
      });
    } else if (key == "output") {
      c.output = v.get<std::string>();
    } else {
      return false;
    }
    return true;
  });
  if (c.controller != "llm" && c.controller != "random" && c.controller != "scripted")
    throw ConfigError("controller must be llm, random or scripted");
  if (c.evaluator != "train" && c.evaluator != "oracle") throw ConfigError("evaluator must be train or oracle");
  if (c.oracle.repeats < 1) throw ConfigError("oracle.repeats must be at least 1");
  if (c.oracle.workers < 0) throw ConfigError("oracle.workers must be non-negative");
  if (c.space.layers < 1) throw ConfigError("space.layers must be at least 1");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

HeteroGraph load_graph(const DatasetSource& source) {
  if (source.path.empty()) return synth_graph(source.synthetic.to_synth_config());
  std::vector<std::string> warnings;
  HeteroGraph g = load_dataset(DatasetPaths::in_directory(source.path), &warnings);
  validate(g);
  return g;
}

}  // namespace hgnas
