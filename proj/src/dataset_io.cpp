#include "hgnas/dataset_io.hpp"

#include "hgnas/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hgnas {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetDescriptor describe(const HeteroGraph& g) {
  DatasetDescriptor d;
  d.name = g.name;
  d.node_types = g.node_types;
  d.node_counts = g.num_nodes;
  for (std::size_t r = 0; r < g.relations.size(); ++r)
    d.relations.push_back({g.relations[r].name, g.relations[r].src, g.relations[r].dst,
                           static_cast<Index>(g.edges[r].size())});
  d.task = g.task;
  d.target = g.task == Task::node_classification ? g.target_type : g.target_relation;
  d.num_classes = g.num_classes;
  return d;
}

json to_json(const DatasetDescriptor& d) {
  json rels = json::array();
  for (const auto& r : d.relations)
    rels.push_back({{"name", r.name}, {"src", r.src}, {"dst", r.dst}, {"edges", r.edges}});
  json j = {{"name", d.name},   {"node_types", d.node_types}, {"relations", rels},
            {"task", to_string(d.task)}, {"target", d.target}, {"num_classes", d.num_classes}};
  if (!d.node_counts.empty()) j["node_counts"] = d.node_counts;
  return j;
}

DatasetDescriptor descriptor_from_json(const json& j) {
  DatasetDescriptor d;
  try {
    d.name = j.value("name", std::string("dataset"));
    d.node_types = j.at("node_types").get<std::vector<std::string>>();
    if (j.contains("node_counts")) d.node_counts = j.at("node_counts").get<std::vector<Index>>();
    for (const auto& r : j.at("relations"))
      d.relations.push_back({r.at("name").get<std::string>(), r.at("src").get<std::string>(),
                             r.at("dst").get<std::string>(), r.value("edges", Index{0})});
    d.task = task_from_string(j.value("task", std::string("nc")));
    d.target = j.at("target").get<std::string>();
    d.num_classes = j.value("num_classes", 0);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad dataset descriptor: ") + e.what());
  }
  std::set<std::string> types(d.node_types.begin(), d.node_types.end());
  for (const auto& r : d.relations)
    if (!types.count(r.src) || !types.count(r.dst))
      throw SchemaError("relation " + r.name + " references an undeclared node type");
  return d;
}

DatasetDescriptor read_descriptor(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset descriptor " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("cannot parse " + path.string() + ": " + e.what());
  }
  return descriptor_from_json(j);
}

DatasetPaths DatasetPaths::in_directory(const fs::path& dir) {
  return {dir / "dataset.json", dir / "nodes.tsv", dir / "edges.tsv", dir / "labels.tsv",
          dir / "splits.tsv"};
}

namespace {

struct Row {
  std::size_t line;
  std::vector<std::string> cols;
};

std::vector<Row> read_tsv(const fs::path& path, bool required) {
  std::vector<Row> rows;
  std::ifstream in(path);
  if (!in) {
    if (required) throw SchemaError("cannot open " + path.string());
    return rows;
  }
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    Row row{n, {}};
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      row.cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& file, std::size_t line, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(file, line, "not a number: '" + text + "'");
  return v;
}

long parse_int(const std::string& file, std::size_t line, const std::string& text) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(file, line, "not an integer: '" + text + "'");
  return v;
}

struct NodeRef {
  std::size_t type;
  Index local;
};

}  // namespace

HeteroGraph load_dataset(const DatasetPaths& paths, std::vector<std::string>* warnings) {
  return load_dataset(read_descriptor(paths.descriptor), paths.nodes, paths.edges, paths.labels,
                      paths.splits, warnings);
}

HeteroGraph load_dataset(const DatasetDescriptor& schema, const fs::path& node_file,
                         const fs::path& edge_file, const fs::path& label_file,
                         const fs::path& split_file, std::vector<std::string>* warnings) {
  HeteroGraph g;
  g.name = schema.name;
  g.node_types = schema.node_types;
  g.num_nodes.assign(g.node_types.size(), 0);
  g.task = schema.task;
  g.num_classes = schema.num_classes;
  for (const auto& r : schema.relations) g.relations.push_back({r.name, r.src, r.dst});
  g.edges.assign(g.relations.size(), {});
  if (g.task == Task::node_classification) {
    g.target_type = schema.target;
    g.require_type(g.target_type);
  } else {
    g.target_relation = schema.target;
    g.require_relation(g.target_relation);
  }

  const std::string nf = node_file.string();
  std::unordered_map<std::string, NodeRef> ids;
  std::vector<std::vector<std::vector<double>>> feats(g.node_types.size());
  for (const Row& row : read_tsv(node_file, true)) {
    if (row.cols.size() < 2 || row.cols.size() > 3)
      throw ParseError(nf, row.line, "expected 'id<TAB>type[<TAB>features]'");
    auto t = g.type_index(row.cols[1]);
    if (!t) throw SchemaError(nf + ":" + std::to_string(row.line) + ": unknown node type '" + row.cols[1] + "'");
    if (ids.count(row.cols[0])) throw ParseError(nf, row.line, "duplicate node id '" + row.cols[0] + "'");
    ids[row.cols[0]] = {*t, g.num_nodes[*t]++};
    std::vector<double> f;
    if (row.cols.size() == 3 && !row.cols[2].empty()) {
      std::stringstream ss(row.cols[2]);
      std::string item;
      while (std::getline(ss, item, ',')) f.push_back(parse_double(nf, row.line, item));
    }
    feats[*t].push_back(std::move(f));
  }

  g.features.resize(g.node_types.size());
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    Index n = g.num_nodes[t];
    bool any = false;
    std::size_t dim = 0;
    for (const auto& f : feats[t])
      if (!f.empty()) {
        any = true;
        dim = f.size();
      }
    if (!any) {
      g.features[t] = MatrixXd::Identity(n, n);
      continue;
    }
    g.features[t] = MatrixXd::Zero(n, static_cast<Index>(dim));
    for (Index i = 0; i < n; ++i) {
      if (feats[t][i].size() != dim)
        throw SchemaError("node features of type " + g.node_types[t] + " have inconsistent widths");
      for (std::size_t k = 0; k < dim; ++k) g.features[t](i, static_cast<Index>(k)) = feats[t][i][k];
    }
  }

  auto lookup = [&](const std::string& file, std::size_t line, const std::string& id) {
    auto it = ids.find(id);
    if (it == ids.end())
      throw SchemaError(file + ":" + std::to_string(line) + ": node '" + id +
                        "' is not declared in the node file");
    return it->second;
  };

  const std::string ef = edge_file.string();
  for (const Row& row : read_tsv(edge_file, true)) {
    if (row.cols.size() != 3) throw ParseError(ef, row.line, "expected 'src<TAB>dst<TAB>relation'");
    auto r = g.relation_index(row.cols[2]);
    if (!r) throw SchemaError(ef + ":" + std::to_string(row.line) + ": unknown relation '" + row.cols[2] + "'");
    NodeRef s = lookup(ef, row.line, row.cols[0]);
    NodeRef d = lookup(ef, row.line, row.cols[1]);
    const Relation& rel = g.relations[*r];
    if (g.node_types[s.type] != rel.src || g.node_types[d.type] != rel.dst)
      throw SchemaError(ef + ":" + std::to_string(row.line) + ": edge " + row.cols[0] + " -> " +
                        row.cols[1] + " does not match relation " + rel.name + " (" + rel.src +
                        " -> " + rel.dst + ")");
    g.edges[*r].emplace_back(s.local, d.local);
  }
  for (std::size_t r = 0; r < g.relations.size(); ++r)
    if (g.edges[r].empty() && warnings)
      warnings->push_back("relation " + g.relations[r].name + " has no edges");

  if (g.task == Task::node_classification) {
    std::size_t target = g.require_type(g.target_type);
    g.labels.assign(static_cast<std::size_t>(g.num_nodes[target]), -1);
    const std::string lf = label_file.string();
    int max_label = -1;
    for (const Row& row : read_tsv(label_file, true)) {
      if (row.cols.size() != 2) throw ParseError(lf, row.line, "expected 'id<TAB>class'");
      NodeRef n = lookup(lf, row.line, row.cols[0]);
      if (n.type != target)
        throw SchemaError(lf + ":" + std::to_string(row.line) + ": node '" + row.cols[0] +
                          "' is not of target type " + g.target_type);
      long y = parse_int(lf, row.line, row.cols[1]);
      if (y < 0) throw ParseError(lf, row.line, "negative class");
      g.labels[static_cast<std::size_t>(n.local)] = static_cast<int>(y);
      max_label = std::max(max_label, static_cast<int>(y));
    }
    if (g.num_classes <= 0) g.num_classes = max_label + 1;

    const std::string sf = split_file.string();
    for (const Row& row : read_tsv(split_file, true)) {
      if (row.cols.size() != 2) throw ParseError(sf, row.line, "expected 'id<TAB>train|val|test'");
      NodeRef n = lookup(sf, row.line, row.cols[0]);
      if (n.type != target)
        throw SchemaError(sf + ":" + std::to_string(row.line) + ": node '" + row.cols[0] +
                          "' is not of target type " + g.target_type);
      const std::string& part = row.cols[1];
      if (part == "train") g.node_split.train.push_back(n.local);
      else if (part == "val") g.node_split.val.push_back(n.local);
      else if (part == "test") g.node_split.test.push_back(n.local);
      else throw ParseError(sf, row.line, "unknown split '" + part + "'");
    }
  } else {
    const std::string sf = split_file.string();
    std::size_t rel = g.require_relation(g.target_relation);
    for (LinkSample* s : {&g.link_split.train, &g.link_split.val, &g.link_split.test})
      s->relation = g.target_relation;
    bool any_negative = false;
    for (const Row& row : read_tsv(split_file, true)) {
      if (row.cols.size() != 4)
        throw ParseError(sf, row.line, "expected 'src<TAB>dst<TAB>train|val|test<TAB>0|1'");
      NodeRef s = lookup(sf, row.line, row.cols[0]);
      NodeRef d = lookup(sf, row.line, row.cols[1]);
      if (g.node_types[s.type] != g.relations[rel].src || g.node_types[d.type] != g.relations[rel].dst)
        throw SchemaError(sf + ":" + std::to_string(row.line) + ": pair does not match relation " +
                          g.target_relation);
      LinkSample* target = nullptr;
      if (row.cols[2] == "train") target = &g.link_split.train;
      else if (row.cols[2] == "val") target = &g.link_split.val;
      else if (row.cols[2] == "test") target = &g.link_split.test;
      else throw ParseError(sf, row.line, "unknown split '" + row.cols[2] + "'");
      long y = parse_int(sf, row.line, row.cols[3]);
      if (y != 0 && y != 1) throw ParseError(sf, row.line, "link label must be 0 or 1");
      (y ? target->positives : target->negatives).emplace_back(s.local, d.local);
      any_negative |= (y == 0);
    }
    if (!any_negative) {
      std::uint64_t k = 0;
      for (LinkSample* s : {&g.link_split.train, &g.link_split.val, &g.link_split.test})
        s->negatives = sample_negatives(g, g.target_relation, s->positives, ++k);
    }
  }

  g = derive_reverse_relations(std::move(g));
  validate(g);
  return g;
}

namespace {

std::string node_id(const HeteroGraph& g, std::size_t type, Index local) {
  return g.node_types[type] + "_" + std::to_string(local);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_dataset(const HeteroGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  auto paths = DatasetPaths::in_directory(dir);
  {
    std::ofstream out(paths.descriptor, std::ios::trunc);
    out << to_json(describe(g)).dump(2) << '\n';
  }
  {
    std::ofstream out(paths.nodes, std::ios::trunc);
    for (std::size_t t = 0; t < g.node_types.size(); ++t) {
      for (Index i = 0; i < g.num_nodes[t]; ++i) {
        out << node_id(g, t, i) << '\t' << g.node_types[t] << '\t';
        if (t < g.features.size()) {
          for (Index k = 0; k < g.features[t].cols(); ++k) {
            if (k) out << ',';
            out << format_double(g.features[t](i, k));
          }
        }
        out << '\n';
      }
    }
  }
  {
    std::ofstream out(paths.edges, std::ios::trunc);
    for (std::size_t r = 0; r < g.relations.size(); ++r) {
      std::size_t s = g.require_type(g.relations[r].src);
      std::size_t d = g.require_type(g.relations[r].dst);
      for (const auto& [a, b] : g.edges[r])
        out << node_id(g, s, a) << '\t' << node_id(g, d, b) << '\t' << g.relations[r].name << '\n';
    }
  }
  std::ofstream labels(paths.labels, std::ios::trunc);
  std::ofstream splits(paths.splits, std::ios::trunc);
  if (g.task == Task::node_classification) {
    std::size_t t = g.require_type(g.target_type);
    for (std::size_t i = 0; i < g.labels.size(); ++i)
      if (g.labels[i] >= 0) labels << node_id(g, t, static_cast<Index>(i)) << '\t' << g.labels[i] << '\n';
    for (auto [part, ids] : {std::pair{"train", &g.node_split.train}, std::pair{"val", &g.node_split.val},
                             std::pair{"test", &g.node_split.test}})
      for (Index id : *ids) splits << node_id(g, t, id) << '\t' << part << '\n';
  } else {
    const Relation& rel = g.relations[g.require_relation(g.target_relation)];
    std::size_t s = g.require_type(rel.src);
    std::size_t d = g.require_type(rel.dst);
    for (auto [part, sample] : {std::pair{"train", &g.link_split.train}, std::pair{"val", &g.link_split.val},
                                std::pair{"test", &g.link_split.test}}) {
      for (const auto& [a, b] : sample->positives)
        splits << node_id(g, s, a) << '\t' << node_id(g, d, b) << '\t' << part << "\t1\n";
      for (const auto& [a, b] : sample->negatives)
        splits << node_id(g, s, a) << '\t' << node_id(g, d, b) << '\t' << part << "\t0\n";
    }
  }
}

std::string relation_summary(const HeteroGraph& g) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s\n", "Relations(A-B)", "#A", "#B", "#A-B");
  out << buf;
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const Relation& rel = g.relations[r];
    std::string label = "Relation(" + rel.name + ")";
    std::snprintf(buf, sizeof buf, "%-24s %10lld %10lld %10lld\n", label.c_str(),
                  static_cast<long long>(g.count(rel.src)), static_cast<long long>(g.count(rel.dst)),
                  static_cast<long long>(g.edges[r].size()));
    out << buf;
  }
  return out.str();
}

}  // namespace hgnas
