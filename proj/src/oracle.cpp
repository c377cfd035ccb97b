#include "hgnas/oracle.hpp"

#include "hgnas/error.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace hgnas {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected a number, got '" + s + "'");
  }
}

std::string partial_header(const SearchSpace& space, const OracleOptions& o) {
  return "# hgnas-oracle-partial size=" + std::to_string(space_size(space)) + " repeats=" + std::to_string(o.repeats) +
         " seed=" + std::to_string(o.seed);
}

void finish_entry(OracleEntry& e) {
  e.mean_val = std::accumulate(e.val.begin(), e.val.end(), 0.0) / static_cast<double>(e.val.size());
  e.mean_test = std::accumulate(e.test.begin(), e.test.end(), 0.0) / static_cast<double>(e.test.size());
}

}  // namespace

const OracleEntry& OracleTable::at(const ArchSeq& a) const {
  check_membership(a, space);
  const std::uint64_t i = arch_index(a, space);
  if (i >= entries.size()) throw ValidationError("oracle table does not cover index " + std::to_string(i));
  return entries[i];
}

const OracleEntry& OracleTable::by_rank(std::uint64_t rank) const {
  for (const auto& e : entries)
    if (e.rank == rank) return e;
  throw ValidationError("no oracle entry with rank " + std::to_string(rank));
}

void assign_ranks(OracleTable& table) {
  std::vector<std::size_t> order(table.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const OracleEntry& x = table.entries[a];
    const OracleEntry& y = table.entries[b];
    if (x.mean_val != y.mean_val) return x.mean_val > y.mean_val;
    const auto ax = x.arch.active_slots(), ay = y.arch.active_slots();
    if (ax != ay) return ax < ay;
    return x.index < y.index;
  });
  for (std::size_t r = 0; r < order.size(); ++r) table.entries[order[r]].rank = r + 1;
}

std::uint64_t rank_of(const OracleTable& table, const ArchSeq& a) { return table.at(a).rank; }

OracleTable build_oracle(const SearchSpace& space, const Evaluator& evaluate, const OracleOptions& o) {
  if (o.repeats < 1) throw ConfigError("oracle repeats must be at least 1");
  const std::uint64_t size = space_size(space);
  if (size > default_enumeration_cap) throw EnumerationCapExceeded(size, default_enumeration_cap);

  OracleTable table;
  table.space = space;
  table.repeats = o.repeats;
  table.entries.resize(size);
  std::vector<char> done(size, 0);
  for (std::uint64_t i = 0; i < size; ++i) {
    table.entries[i].index = i;
    table.entries[i].arch = arch_at(i, space);
    table.entries[i].text = encode(table.entries[i].arch);
  }

  const std::size_t R = static_cast<std::size_t>(o.repeats);
  const std::string header = partial_header(space, o);
  if (!o.partial_path.empty() && std::filesystem::exists(o.partial_path)) {
    std::ifstream in(o.partial_path, std::ios::binary);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || line != header)
      throw ConfigError(o.partial_path.string() + " belongs to a different oracle build");
    const std::string file = o.partial_path.string();
    std::uintmax_t complete_bytes = header.size() + 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (in.eof()) break;  // unterminated tail from an interrupted write
      const auto f = split(line, ',');
      if (f.size() != 1 + 2 * R) throw ParseError(file, lineno, "malformed row '" + line + "'");
      const std::uint64_t i = static_cast<std::uint64_t>(parse_double(f[0], file, lineno));
      if (i >= size) throw ParseError(file, lineno, "index out of range");
      OracleEntry& e = table.entries[i];
      e.val.clear();
      e.test.clear();
      for (std::size_t r = 0; r < R; ++r) e.val.push_back(parse_double(f[1 + r], file, lineno));
      for (std::size_t r = 0; r < R; ++r) e.test.push_back(parse_double(f[1 + R + r], file, lineno));
      done[i] = 1;
      complete_bytes += line.size() + 1;
    }
    in.close();
    if (std::filesystem::file_size(o.partial_path) != complete_bytes) std::filesystem::resize_file(o.partial_path, complete_bytes);
  }

  std::ofstream partial;
  if (!o.partial_path.empty()) {
    const bool fresh = !std::filesystem::exists(o.partial_path);
    partial.open(o.partial_path, std::ios::binary | std::ios::app);
    if (!partial) throw std::runtime_error("cannot write " + o.partial_path.string());
    if (fresh) partial << header << '\n' << std::flush;
  }

  std::vector<std::uint64_t> todo;
  for (std::uint64_t i = 0; i < size; ++i)
    if (!done[i]) todo.push_back(i);
  std::size_t completed = size - todo.size();

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto work = [&] {
    while (!stop) {
      const std::size_t k = next++;
      if (k >= todo.size()) return;
      if (k >= o.stop_after) {
        stop = true;
        return;
      }
      OracleEntry& e = table.entries[todo[k]];
      std::vector<double> val(R), test(R);
      for (std::size_t r = 0; r < R; ++r) {
        TrialResult t;
        try {
          t = evaluate(e.arch, o.seed + r);
        } catch (const std::exception&) {
          t.failed = true;
        }
        val[r] = t.failed ? 0.0 : t.val_metric;
        test[r] = t.failed ? 0.0 : t.test_metric;
      }
      std::lock_guard lock(mu);
      e.val = std::move(val);
      e.test = std::move(test);
      done[e.index] = 1;
      if (partial.is_open()) {
        std::string row = std::to_string(e.index);
        for (double v : e.val) row += "," + g17(v);
        for (double v : e.test) row += "," + g17(v);
        partial << row << '\n' << std::flush;
      }
      ++completed;
      if (o.progress) o.progress(completed, size);
    }
  };
  const int workers = std::max(1, std::min<int>(o.workers, static_cast<int>(std::max<std::size_t>(todo.size(), 1))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (completed < size) throw OracleInterrupted("oracle build stopped after " + std::to_string(completed) + " of " +
                                                std::to_string(size) + " architectures");

  for (auto& e : table.entries) finish_entry(e);
  assign_ranks(table);
  return table;
}

void write_oracle_csv(const OracleTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "arch,index";
  for (int r = 1; r <= table.repeats; ++r) out << ",val_" << r;
  for (int r = 1; r <= table.repeats; ++r) out << ",test_" << r;
  out << ",mean_val,mean_test,rank\n";
  for (const auto& e : table.entries) {
    out << '"' << e.text << "\"," << e.index;
    for (double v : e.val) out << ',' << g17(v);
    for (double v : e.test) out << ',' << g17(v);
    out << ',' << g17(e.mean_val) << ',' << g17(e.mean_test) << ',' << e.rank << '\n';
  }
}

OracleTable read_oracle_csv(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open oracle table " + path.string());
  std::string line;
  const std::string file = path.string();
  if (!std::getline(in, line)) throw ParseError(file, 1, "empty oracle table");
  const auto head = split(line, ',');
  if (head.size() < 7 || head[0] != "arch" || head[1] != "index" || (head.size() - 5) % 2 != 0)
    throw ParseError(file, 1, "unexpected oracle header");
  OracleTable t;
  t.space = space;
  t.repeats = static_cast<int>((head.size() - 5) / 2);
  const std::size_t R = static_cast<std::size_t>(t.repeats);
  const std::uint64_t size = space_size(space);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = file + ":" + std::to_string(lineno);
    if (line.front() != '"') throw ParseError(file, lineno, "arch field must be quoted");
    const auto close = line.find('"', 1);
    if (close == std::string::npos || close + 1 >= line.size() || line[close + 1] != ',')
      throw ParseError(file, lineno, "unterminated arch field");
    OracleEntry e;
    e.text = line.substr(1, close - 1);
    const auto f = split(line.substr(close + 2), ',');
    if (f.size() != 1 + 2 * R + 3) throw ParseError(file, lineno, "expected " + std::to_string(head.size()) + " columns");
    try {
      e.arch = decode(e.text, space);
    } catch (const DecodeError& err) {
      throw ValidationError(where + ": oracle arch does not belong to the search space: " + err.what());
    }
    e.index = static_cast<std::uint64_t>(parse_double(f[0], file, lineno));
    if (e.index != arch_index(e.arch, space)) throw ValidationError(where + ": index does not match the arch");
    for (std::size_t r = 0; r < R; ++r) e.val.push_back(parse_double(f[1 + r], file, lineno));
    for (std::size_t r = 0; r < R; ++r) e.test.push_back(parse_double(f[1 + R + r], file, lineno));
    e.mean_val = parse_double(f[1 + 2 * R], file, lineno);
    e.mean_test = parse_double(f[2 + 2 * R], file, lineno);
    e.rank = static_cast<std::uint64_t>(parse_double(f[3 + 2 * R], file, lineno));
    t.entries.push_back(std::move(e));
  }
  if (t.entries.size() != size)
    throw ValidationError(path.string() + ": oracle has " + std::to_string(t.entries.size()) +
                          " rows but the search space has " + std::to_string(size) + " architectures");
  std::sort(t.entries.begin(), t.entries.end(), [](const OracleEntry& a, const OracleEntry& b) { return a.index < b.index; });
  for (std::uint64_t i = 0; i < size; ++i)
    if (t.entries[i].index != i) throw ValidationError(path.string() + ": duplicate or missing index " + std::to_string(i));
  return t;
}

Evaluator oracle_evaluator(const OracleTable& table) {
  auto shared = std::make_shared<const OracleTable>(table);
  return [shared](const ArchSeq& a, std::uint64_t) {
    const OracleEntry& e = shared->at(a);
    TrialResult r;
    r.val_metric = e.mean_val;
    r.test_metric = e.mean_test;
    return r;
  };
}

}  // namespace hgnas
