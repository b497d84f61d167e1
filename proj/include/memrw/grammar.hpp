#pragma once

// Template grammar for the synthetic smart-home domain. It renders
// (intent, slots) into carrier phrases and doubles as the reference NLU:
// annotate() recovers intent and slots from a token sequence, or nothing
// when the sequence is outside the grammar.

#include <optional>
#include <string>
#include <vector>

#include "memrw/corpus.hpp"

namespace memrw::corpus {

struct DeviceSpec {
  std::string name;
  bool dimmable = false;
  bool colorable = false;
  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

struct IntentSpec {
  std::string name;
  // Space-separated words; "{device}", "{level}", "{color}" and
  // "{temperature}" are slot placeholders.
  std::vector<std::string> templates;
  friend bool operator==(const IntentSpec&, const IntentSpec&) = default;
};

class Grammar {
 public:
  std::vector<IntentSpec> intents;
  std::vector<DeviceSpec> devices;
  std::vector<std::string> colors;
  std::vector<std::string> levels;
  std::vector<std::string> temperatures;

  static Grammar smart_home();

  const IntentSpec& intent(const std::string& name) const;
  const DeviceSpec* device(const std::string& name) const;
  // Renders template `template_index` of `intent`. Throws when a slot the
  // template needs is missing.
  Utterance render(const std::string& intent, const Slots& slots,
                   std::size_t template_index) const;
  std::optional<Utterance> annotate(const Tokens& tokens) const;

  void validate() const;
  friend bool operator==(const Grammar&, const Grammar&) = default;

 private:
  std::vector<std::string> values_for(const std::string& slot) const;
};

}  // namespace memrw::corpus
