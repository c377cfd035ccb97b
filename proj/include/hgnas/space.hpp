#pragma once

#include "hgnas/graph.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hgnas {

enum class GnnOp { gcn, gat, edge, sage, zero };
enum class Aggr { sum, mean, max, lstm, att };
enum class SpaceKind { hgnas, benchmark, diffmg };

std::string to_string(GnnOp op);
std::string to_string(Aggr a);
std::string to_string(SpaceKind k);
std::optional<GnnOp> gnn_op_from_string(std::string_view text);
std::optional<Aggr> aggr_from_string(std::string_view text);
SpaceKind space_kind_from_string(const std::string& text);

inline const std::vector<GnnOp>& all_gnn_ops() {
  static const std::vector<GnnOp> ops{GnnOp::gcn, GnnOp::gat, GnnOp::edge, GnnOp::sage, GnnOp::zero};
  return ops;
}
inline const std::vector<Aggr>& all_aggrs() {
  static const std::vector<Aggr> aggrs{Aggr::sum, Aggr::mean, Aggr::max, Aggr::lstm, Aggr::att};
  return aggrs;
}

// One message channel in one layer: a graph relation or a per-type self-relation.
struct Slot {
  std::string relation;  // relation name, or "<type>-self"
  std::string src;
  std::string dst;
  bool self = false;

  bool operator==(const Slot&) const = default;
};

struct SearchSpace {
  int layers = 0;
  std::vector<std::vector<Slot>> slots;  // per layer, canonical order
  std::vector<GnnOp> gnn_candidates;
  std::vector<Aggr> aggr_candidates;
  SpaceKind kind = SpaceKind::hgnas;

  std::size_t token_count() const;  // slots plus one aggregator per layer
  std::size_t slot_count() const;

  bool operator==(const SearchSpace&) const = default;
};

struct ArchSeq {
  std::vector<std::vector<GnnOp>> ops;  // per layer, per slot
  std::vector<Aggr> aggr;               // per layer
  SpaceKind kind = SpaceKind::hgnas;

  bool operator==(const ArchSeq&) const = default;
  std::size_t active_slots() const;  // slots not set to zero
};

struct SpaceOptions {
  int layers = 2;
  SpaceKind kind = SpaceKind::hgnas;
  bool prune = false;
  bool self_relations = true;
};

// Throws SchemaError when no relation (or self-relation) can reach the task target.
SearchSpace build_space(const HeteroGraph& g, const SpaceOptions& opts);

// Product over layers of |gnn|^|slots| * |aggr|, saturating at UINT64_MAX.
std::uint64_t space_size(const SearchSpace& s);

// Text encodings: operator names, or candidate indices for the no-operation prompt variant.
enum class TokenStyle { names, indices };

std::string encode(const ArchSeq& a);
// Index style needs the space to map operators to candidate positions.
std::string encode(const ArchSeq& a, const SearchSpace& s, TokenStyle style);

// Decode failures; what() quotes the offending text so it can be fed back to a controller.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::string text) : std::runtime_error(what), text_(std::move(text)) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class LengthError : public DecodeError {
 public:
  LengthError(std::size_t expected, std::size_t got, std::string text);
  std::size_t expected() const { return expected_; }
  std::size_t got() const { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

class TokenError : public DecodeError {
 public:
  TokenError(std::size_t position, std::string token, std::string reason, std::string text);
  std::size_t position() const { return position_; }  // 0-based token position
  const std::string& token() const { return token_; }

 private:
  std::size_t position_;
  std::string token_;
};

// Accepts the canonical "[gcn, zero, sum | ...]" form; surrounding brackets optional.
// Layer separators are treated like commas. With TokenStyle::indices, tokens are
// candidate indices.
ArchSeq decode(const std::string& text, const SearchSpace& s, TokenStyle style = TokenStyle::names);

// Throws TokenError / LengthError when `a` does not belong to `s`.
void check_membership(const ArchSeq& a, const SearchSpace& s);

// Mixed-radix position in lexicographic token order (first token most significant).
std::uint64_t arch_index(const ArchSeq& a, const SearchSpace& s);
ArchSeq arch_at(std::uint64_t index, const SearchSpace& s);

constexpr std::uint64_t default_enumeration_cap = std::uint64_t{1} << 20;

class EnumerationCapExceeded : public std::runtime_error {
 public:
  EnumerationCapExceeded(std::uint64_t size, std::uint64_t cap);
  std::uint64_t size() const { return size_; }

 private:
  std::uint64_t size_;
};

// Calls `visit` once per architecture in lexicographic order; stops early if it returns false.
void enumerate(const SearchSpace& s, const std::function<bool(const ArchSeq&)>& visit,
               std::uint64_t cap = default_enumeration_cap);
std::vector<ArchSeq> enumerate_all(const SearchSpace& s, std::uint64_t cap = default_enumeration_cap);

struct BaselineArchs {
  ArchSeq all_relations;
  ArchSeq meta_path;
};

// all_relations: gcn everywhere; meta_path: gcn on step k in layer n-|mp|+k, zero elsewhere.
BaselineArchs baseline_archs(const SearchSpace& s, const MetaPath& mp);

// Bracketed template naming each position, e.g. "[A-P, P-A, HAggr | ...]".
std::string describe_positions(const SearchSpace& s,
                              const std::function<std::string(const Slot&)>& label = {});

nlohmann::json to_json(const SearchSpace& s);
SearchSpace space_from_json(const nlohmann::json& j);

}  // namespace hgnas
