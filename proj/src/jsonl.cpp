#include "hgnas/jsonl.hpp"

#include "hgnas/error.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

namespace hgnas {

TranscriptWriter::TranscriptWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

void TranscriptWriter::write(nlohmann::json record) {
  if (!record.contains("timestamp")) record["timestamp"] = utc_timestamp();
  const std::string line = record.dump() + "\n";
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot append to " + path_.string());
  out << line;
  out.flush();
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path, bool tolerate_partial_tail) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open " + path.string(), 0);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const bool last = in.peek() == std::char_traits<char>::eof();
    const bool terminated = !in.eof();
    if (!line.empty()) {
      try {
        out.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        if (!(tolerate_partial_tail && last && !terminated))
          throw IntegrityError(path.string() + ": malformed record: " + e.what(), offset);
      }
    }
    offset += line.size() + 1;
  }
  return out;
}

}  // namespace hgnas
