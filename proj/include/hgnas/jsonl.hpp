#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

// Append-only JSON-lines sink. Every record gets a "timestamp" (UTC, ISO 8601) unless
// it already has one. Each write is flushed so a killed process leaves whole lines.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(std::filesystem::path path);

  void write(nlohmann::json record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

std::string utc_timestamp();

// Reads every record; throws IntegrityError at the first line that is not valid JSON,
// except for a truncated final line, which is dropped when `tolerate_partial_tail` is set.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path, bool tolerate_partial_tail = false);

}  // namespace hgnas
