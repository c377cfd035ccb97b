#pragma once

#include "hgnas/graph.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

struct DescriptorRelation {
  std::string name;
  std::string src;
  std::string dst;
  Index edges = 0;
};

// Dataset summary consumed by prompt rendering and by the loader as the schema.
struct DatasetDescriptor {
  std::string name;
  std::vector<std::string> node_types;
  std::vector<Index> node_counts;  // may be empty before loading
  std::vector<DescriptorRelation> relations;
  Task task = Task::node_classification;
  std::string target;  // node type (nc) or relation name (lp)
  int num_classes = 0;
};

DatasetDescriptor describe(const HeteroGraph& g);

nlohmann::json to_json(const DatasetDescriptor& d);
DatasetDescriptor descriptor_from_json(const nlohmann::json& j);
DatasetDescriptor read_descriptor(const std::filesystem::path& path);

struct DatasetPaths {
  std::filesystem::path descriptor;
  std::filesystem::path nodes;
  std::filesystem::path edges;
  std::filesystem::path labels;
  std::filesystem::path splits;

  // Conventional layout: dataset.json, nodes.tsv, edges.tsv, labels.tsv, splits.tsv.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

// Reads the TSV files against the descriptor's declared schema and derives reverse
// relations. Non-fatal findings (e.g. a declared relation with no edges) go to `warnings`.
HeteroGraph load_dataset(const DatasetPaths& paths, std::vector<std::string>* warnings = nullptr);

HeteroGraph load_dataset(const DatasetDescriptor& schema, const std::filesystem::path& node_file,
                         const std::filesystem::path& edge_file, const std::filesystem::path& label_file,
                         const std::filesystem::path& split_file,
                         std::vector<std::string>* warnings = nullptr);

// Writes descriptor + TSV files into `dir` (created if needed).
void write_dataset(const HeteroGraph& g, const std::filesystem::path& dir);

// One row per relation: "Relation(A-B) #A #B #A-B".
std::string relation_summary(const HeteroGraph& g);

}  // namespace hgnas
