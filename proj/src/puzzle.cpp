#include "rpmlab/puzzle.hpp"

#include <stdexcept>

namespace rpmlab {

const char* config_name(Config c) {
  switch (c) {
    case Config::Center: return "Center";
    case Config::Grid22: return "2*2Grid";
    case Config::Grid33: return "3*3Grid";
    case Config::LeftRight: return "L-R";
    case Config::UpDown: return "U-D";
  }
  return "?";
}

std::optional<Config> parse_config(const std::string& s) {
  if (s == "Center" || s == "center") return Config::Center;
  if (s == "2*2Grid" || s == "2x2" || s == "2x2grid") return Config::Grid22;
  if (s == "3*3Grid" || s == "3x3" || s == "3x3grid") return Config::Grid33;
  if (s == "L-R" || s == "lr" || s == "left-right") return Config::LeftRight;
  if (s == "U-D" || s == "ud" || s == "up-down") return Config::UpDown;
  return std::nullopt;
}

const char* attr_name(AttrKind a) {
  switch (a) {
    case AttrKind::ShapeType: return "ShapeType";
    case AttrKind::Size: return "Size";
    case AttrKind::Shade: return "Shade";
    case AttrKind::Count: return "Count";
  }
  return "?";
}

std::optional<AttrKind> parse_attr(const std::string& s) {
  if (s == "ShapeType") return AttrKind::ShapeType;
  if (s == "Size") return AttrKind::Size;
  if (s == "Shade") return AttrKind::Shade;
  if (s == "Count") return AttrKind::Count;
  return std::nullopt;
}

const char* rule_type_name(RuleType t) {
  switch (t) {
    case RuleType::Constant: return "Constant";
    case RuleType::Progression: return "Progression";
    case RuleType::Arithmetic: return "Arithmetic";
    case RuleType::DistributeThree: return "DistributeThree";
  }
  return "?";
}

int component_count(Config c) {
  return (c == Config::LeftRight || c == Config::UpDown) ? 2 : 1;
}

int slot_capacity(Config c, int component) {
  (void)component;
  switch (c) {
    case Config::Grid22: return 4;
    case Config::Grid33: return 9;
    default: return 1;
  }
}

std::pair<int, int> attr_range(AttrKind a, Config c, int component) {
  switch (a) {
    case AttrKind::ShapeType: return {0, kShapeKinds - 1};
    case AttrKind::Size: return {0, kSizeLevels - 1};
    case AttrKind::Shade: return {0, kShadeLevels - 1};
    case AttrKind::Count: return {1, slot_capacity(c, component)};
  }
  return {0, 0};
}

std::vector<AttrKind> governable_attrs(Config c) {
  std::vector<AttrKind> attrs{AttrKind::ShapeType, AttrKind::Size, AttrKind::Shade};
  if (slot_capacity(c, 0) > 1) attrs.push_back(AttrKind::Count);
  return attrs;
}

bool is_ordinal(AttrKind a) {
  return a == AttrKind::Size || a == AttrKind::Shade || a == AttrKind::Count;
}

Panel make_panel(Config c) {
  Panel p;
  p.config = c;
  p.components.resize(component_count(c));
  return p;
}

int get_attr(const Panel& p, int component, AttrKind a) {
  const Component& comp = p.components.at(component);
  switch (a) {
    case AttrKind::ShapeType: return comp.shape;
    case AttrKind::Size: return comp.size;
    case AttrKind::Shade: return comp.shade;
    case AttrKind::Count: return comp.count;
  }
  return 0;
}

void set_attr(Panel& p, int component, AttrKind a, int value) {
  auto [lo, hi] = attr_range(a, p.config, component);
  if (value < lo || value > hi)
    throw std::invalid_argument(std::string("attribute ") + attr_name(a) + " value " +
                                std::to_string(value) + " outside [" + std::to_string(lo) + "," +
                                std::to_string(hi) + "] for " + config_name(p.config));
  Component& comp = p.components.at(component);
  switch (a) {
    case AttrKind::ShapeType: comp.shape = value; break;
    case AttrKind::Size: comp.size = value; break;
    case AttrKind::Shade: comp.shade = value; break;
    case AttrKind::Count: comp.count = value; break;
  }
}

Panel transpose_panel(const Panel& p) {
  if (p.config != Config::LeftRight && p.config != Config::UpDown)
    throw std::invalid_argument(std::string("transpose_panel: unsupported configuration ") +
                                config_name(p.config));
  Panel out = p;
  out.config = p.config == Config::LeftRight ? Config::UpDown : Config::LeftRight;
  // left component becomes top (and right becomes bottom), and vice versa
  return out;
}

namespace {

nlohmann::json panel_to_json(const Panel& p) {
  nlohmann::json comps = nlohmann::json::array();
  for (size_t ci = 0; ci < p.components.size(); ++ci) {
    const auto& c = p.components[ci];
    nlohmann::json slots = nlohmann::json::array();
    for (int s = 0; s < slot_capacity(p.config, static_cast<int>(ci)); ++s)
      if (p.slot_occupied(static_cast<int>(ci), s)) slots.push_back(s);
    comps.push_back({{"shape", c.shape},
                     {"size", c.size},
                     {"shade", c.shade},
                     {"count", c.count},
                     {"slots", slots}});
  }
  return comps;
}

Panel panel_from_json(Config config, const nlohmann::json& j) {
  Panel p = make_panel(config);
  if (j.size() != p.components.size())
    throw std::invalid_argument("panel JSON has " + std::to_string(j.size()) +
                                " components, expected " + std::to_string(p.components.size()));
  for (size_t ci = 0; ci < p.components.size(); ++ci) {
    const auto& cj = j[ci];
    Component& c = p.components[ci];
    c.shape = cj.at("shape").get<int>();
    c.size = cj.at("size").get<int>();
    c.shade = cj.at("shade").get<int>();
    c.count = cj.at("count").get<int>();
  }
  return p;
}

nlohmann::json rule_to_json(const Rule& r) {
  nlohmann::json j{{"component", r.component},
                   {"attr", attr_name(r.attr)},
                   {"type", rule_type_name(r.type)}};
  if (r.type == RuleType::Progression) j["delta"] = r.delta;
  if (r.type == RuleType::Arithmetic) j["sign"] = r.sign;
  if (r.type == RuleType::DistributeThree) {
    j["values"] = r.values;
    j["row_shift"] = r.row_shift;
  }
  return j;
}

Rule rule_from_json(const nlohmann::json& j) {
  Rule r;
  r.component = j.at("component").get<int>();
  auto attr = parse_attr(j.at("attr").get<std::string>());
  if (!attr) throw std::invalid_argument("unknown attribute in rule JSON");
  r.attr = *attr;
  std::string type = j.at("type").get<std::string>();
  if (type == "Constant") {
    r.type = RuleType::Constant;
  } else if (type == "Progression") {
    r.type = RuleType::Progression;
    r.delta = j.at("delta").get<int>();
  } else if (type == "Arithmetic") {
    r.type = RuleType::Arithmetic;
    r.sign = j.at("sign").get<int>();
  } else if (type == "DistributeThree") {
    r.type = RuleType::DistributeThree;
    r.values = j.at("values").get<std::array<int, 3>>();
    r.row_shift = j.at("row_shift").get<std::array<int, 3>>();
  } else {
    throw std::invalid_argument("unknown rule type '" + type + "' in rule JSON");
  }
  return r;
}

}  // namespace

nlohmann::json problem_to_json(const RpmProblem& p) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : p.rules.rules) rules.push_back(rule_to_json(r));
  nlohmann::json panels = nlohmann::json::array();
  for (const auto& panel : p.context) panels.push_back(panel_to_json(panel));
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& panel : p.candidates) candidates.push_back(panel_to_json(panel));
  return nlohmann::json{{"config", config_name(p.config)}, {"rules", rules},
                        {"panels", panels},               {"candidates", candidates},
                        {"answer", p.answer},             {"seed", p.seed}};
}

RpmProblem problem_from_json(const nlohmann::json& j) {
  RpmProblem p;
  auto config = parse_config(j.at("config").get<std::string>());
  if (!config) throw std::invalid_argument("unknown configuration in problem JSON");
  p.config = *config;
  for (const auto& rj : j.at("rules")) p.rules.rules.push_back(rule_from_json(rj));
  const auto& panels = j.at("panels");
  const auto& candidates = j.at("candidates");
  if (panels.size() != 8 || candidates.size() != 8)
    throw std::invalid_argument("problem JSON must carry 8 context panels and 8 candidates");
  for (int i = 0; i < 8; ++i) {
    p.context[i] = panel_from_json(p.config, panels[i]);
    p.candidates[i] = panel_from_json(p.config, candidates[i]);
  }
  p.answer = j.at("answer").get<int>();
  p.seed = j.at("seed").get<uint64_t>();
  return p;
}

}  // namespace rpmlab
