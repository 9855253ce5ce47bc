#pragma once

#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "debias/matcher.hpp"
#include "debias/textproc.hpp"

namespace debias {

enum class EntityKind { person, location, organization, other };
enum class EntitySource { heuristic, external };

std::string_view to_string(EntityKind kind);
EntityKind parse_entity_kind(std::string_view s);

struct EntitySpan {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  EntityKind kind = EntityKind::other;
  EntitySource source = EntitySource::heuristic;

  bool operator==(const EntitySpan&) const = default;
};

/// Named-entity recognizer for a preprocessed document.
class NerBackend {
 public:
  virtual ~NerBackend() = default;
  virtual std::vector<EntitySpan> detect(const LemmatizedDocument& doc) const = 0;
};

/// Capitalization heuristic: runs of two or more adjacent capitalized words
/// with at least one word unknown to the language dictionary, plus lone
/// unknown capitalized words that do not open a sentence. Stateless and
/// total.
class HeuristicNerBackend final : public NerBackend {
 public:
  explicit HeuristicNerBackend(const TextResources& resources) : resources_(&resources) {}
  std::vector<EntitySpan> detect(const LemmatizedDocument& doc) const override;

 private:
  const TextResources* resources_;
};

/// Proxies an HTTP annotator: POST {"text", "language"} ->
/// {"entities": [{"start", "end", "kind"}]} with character offsets.
class HttpNerBackend final : public NerBackend {
 public:
  HttpNerBackend(std::string endpoint, int timeout_ms = 10000, int max_in_flight = 4);
  std::vector<EntitySpan> detect(const LemmatizedDocument& doc) const override;

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  int timeout_ms_;
  mutable std::counting_semaphore<1024> in_flight_;
};

/// Runs the backend; returns spans sorted by start with overlaps merged.
std::vector<EntitySpan> detect_entities(const LemmatizedDocument& doc, const NerBackend& backend);

struct FilterResult {
  std::vector<RawMatch> kept;
  std::vector<RawMatch> dropped;
};

/// Drops every match whose span shares at least one character with an entity.
FilterResult filter_matches(const std::vector<RawMatch>& matches, const std::vector<EntitySpan>& entities);

}  // namespace debias
