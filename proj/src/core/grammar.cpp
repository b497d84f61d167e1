#include "memrw/grammar.hpp"

#include <functional>
#include <set>

#include "memrw/error.hpp"

namespace memrw::corpus {
namespace {

bool is_placeholder(const std::string& w) {
  return w.size() > 2 && w.front() == '{' && w.back() == '}';
}

std::string slot_name(const std::string& w) { return w.substr(1, w.size() - 2); }

}  // namespace

Grammar Grammar::smart_home() {
  Grammar g;
  g.intents = {
      {"TurnOn",
       {"turn on the {device}", "turn on {device}", "{device} on", "switch on the {device}",
        "can you turn on the {device}", "turn the {device} on", "please turn on {device}"}},
      {"TurnOff",
       {"turn off the {device}", "turn off {device}", "{device} off", "switch off the {device}",
        "can you turn off the {device}", "turn the {device} off", "please turn off {device}"}},
      {"SetBrightness",
       {"set the {device} to {level} percent", "dim the {device} to {level} percent",
        "set {device} brightness to {level}"}},
      {"SetColor",
       {"set the {device} to {color}", "make the {device} {color}", "change the {device} to {color}",
        "turn the {device} {color}"}},
      {"SetTemperature",
       {"set the temperature to {temperature} degrees", "set the thermostat to {temperature}",
        "make it {temperature} degrees"}},
  };
  g.devices = {
      {"bedroom", true, true},      {"bathroom", true, false},     {"laundry room", true, true},
      {"living room", true, true},  {"dining room", true, true},   {"kitchen", true, false},
      {"hallway", true, false},     {"office", true, true},        {"garage", false, false},
      {"porch light", true, true},  {"nursery", true, true},       {"basement", false, false},
      {"attic", false, false},      {"patio", true, false},        {"den", true, false},
      {"study", true, false},       {"fan", false, false},         {"heater", false, false},
      {"tv", false, false},         {"lamp", true, true},          {"coffee maker", false, false},
      {"air purifier", false, false}, {"closet light", true, false}, {"guest room", true, true},
  };
  g.colors = {"white", "yellow", "red", "blue", "green", "purple", "orange", "pink"};
  g.levels = {"ten", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};
  g.temperatures = {"sixty-five", "sixty-eight", "seventy", "seventy-two", "seventy-five"};
  return g;
}

const IntentSpec& Grammar::intent(const std::string& name) const {
  for (const auto& i : intents) {
    if (i.name == name) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown intent '" + name + "'");
}

const DeviceSpec* Grammar::device(const std::string& name) const {
  for (const auto& d : devices) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::vector<std::string> Grammar::values_for(const std::string& slot) const {
  if (slot == "device") {
    std::vector<std::string> names;
    for (const auto& d : devices) names.push_back(d.name);
    return names;
  }
  if (slot == "color") return colors;
  if (slot == "level") return levels;
  if (slot == "temperature") return temperatures;
  return {};
}

Utterance Grammar::render(const std::string& intent_name, const Slots& slots,
                          std::size_t template_index) const {
  const IntentSpec& spec = intent(intent_name);
  if (template_index >= spec.templates.size()) {
    throw Error(ErrorCode::kInvalidArgument, "template index out of range");
  }
  Utterance u{{}, intent_name, {}};
  for (const std::string& w : split_words(spec.templates[template_index])) {
    if (!is_placeholder(w)) {
      u.tokens.push_back(w);
      continue;
    }
    const std::string name = slot_name(w);
    auto it = slots.find(name);
    if (it == slots.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "template for " + intent_name + " needs slot '" + name + "'");
    }
    for (auto& t : split_words(it->second)) u.tokens.push_back(std::move(t));
    u.slots[name] = it->second;
  }
  return u;
}

std::optional<Utterance> Grammar::annotate(const Tokens& tokens) const {
  for (const IntentSpec& spec : intents) {
    for (const std::string& tmpl : spec.templates) {
      const Tokens pattern = split_words(tmpl);
      Slots slots;
      std::function<bool(std::size_t, std::size_t)> match = [&](std::size_t ti,
                                                                std::size_t pi) -> bool {
        if (pi == pattern.size()) return ti == tokens.size();
        const std::string& p = pattern[pi];
        if (!is_placeholder(p)) {
          return ti < tokens.size() && tokens[ti] == p && match(ti + 1, pi + 1);
        }
        const std::string name = slot_name(p);
        const std::vector<std::string> values = values_for(name);
        for (const std::string& value : values) {
          const Tokens vt = split_words(value);
          if (ti + vt.size() > tokens.size()) continue;
          if (!std::equal(vt.begin(), vt.end(), tokens.begin() + static_cast<long>(ti))) continue;
          slots[name] = value;
          if (match(ti + vt.size(), pi + 1)) return true;
          slots.erase(name);
        }
        return false;
      };
      if (match(0, 0)) return Utterance{tokens, spec.name, slots};
    }
  }
  return std::nullopt;
}

void Grammar::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kConfig, "config error: " + what);
  };
  if (devices.empty()) fail("empty device catalog");
  if (intents.empty()) fail("empty intent grammar");
  std::set<std::string> seen;
  for (const auto& d : devices) {
    if (split_words(d.name).empty()) fail("blank device name");
    if (!seen.insert(d.name).second) fail("duplicate device '" + d.name + "'");
  }
  for (const auto& i : intents) {
    if (i.templates.empty()) fail("intent " + i.name + " has no templates");
    for (const auto& t : i.templates) {
      for (const auto& w : split_words(t)) {
        if (is_placeholder(w) && values_for(slot_name(w)).empty()) {
          fail("template '" + t + "' uses a slot with no values");
        }
      }
    }
  }
}

}  // namespace memrw::corpus
