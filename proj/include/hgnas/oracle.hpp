#pragma once

#include "hgnas/orchestrator.hpp"
#include "hgnas/space.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hgnas {

struct OracleEntry {
  ArchSeq arch;
  std::string text;
  std::uint64_t index = 0;  // arch_index in the space
  std::vector<double> val;
  std::vector<double> test;
  double mean_val = 0;
  double mean_test = 0;
  std::uint64_t rank = 0;  // 1 = best
};

struct OracleTable {
  SearchSpace space;
  int repeats = 0;
  std::vector<OracleEntry> entries;  // by index

  const OracleEntry& at(const ArchSeq& a) const;  // throws like check_membership
  const OracleEntry& by_rank(std::uint64_t rank) const;
};

// Orders by mean validation metric, descending; ties go to fewer active slots, then to the
// lower index. Ranks are a permutation of 1..size.
void assign_ranks(OracleTable& table);

std::uint64_t rank_of(const OracleTable& table, const ArchSeq& a);

struct OracleOptions {
  int repeats = 5;
  std::uint64_t seed = 0;  // repeat r trains with seed + r
  int workers = 1;
  // Completed rows are appended here as they finish and skipped when the build restarts.
  std::filesystem::path partial_path;
  std::size_t stop_after = SIZE_MAX;  // newly completed archs before the build stops (interruption tests)
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// Thrown when a build stops early because of OracleOptions::stop_after.
class OracleInterrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluates every arch of the space `repeats` times. Refuses spaces above the enumeration cap.
OracleTable build_oracle(const SearchSpace& space, const Evaluator& evaluate, const OracleOptions& options);

// arch,index,val_1..val_R,test_1..test_R,mean_val,mean_test,rank; metrics printed with %.17g.
void write_oracle_csv(const OracleTable& table, const std::filesystem::path& path);
OracleTable read_oracle_csv(const std::filesystem::path& path, const SearchSpace& space);

// Answers with the stored means instead of training; the seed is ignored.
Evaluator oracle_evaluator(const OracleTable& table);

}  // namespace hgnas
