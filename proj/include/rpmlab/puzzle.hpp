#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rpmlab {

// Figure configurations. L-R and U-D are transposes of each other under image
// transposition of every panel.
enum class Config : uint8_t { Center = 0, Grid22 = 1, Grid33 = 2, LeftRight = 3, UpDown = 4 };

inline constexpr std::array<Config, 5> kAllConfigs = {
    Config::Center, Config::Grid22, Config::Grid33, Config::LeftRight, Config::UpDown};

const char* config_name(Config c);                       // "Center", "2*2Grid", ...
std::optional<Config> parse_config(const std::string&);  // accepts names and cli tokens

enum class AttrKind : uint8_t { ShapeType = 0, Size = 1, Shade = 2, Count = 3 };

const char* attr_name(AttrKind a);
std::optional<AttrKind> parse_attr(const std::string&);

// shape vocabulary: 0 triangle, 1 square, 2 pentagon, 3 hexagon, 4 circle
inline constexpr int kShapeKinds = 5;
inline constexpr int kSizeLevels = 6;    // 0..5
inline constexpr int kShadeLevels = 10;  // 0..9

int component_count(Config c);           // 1 for Center/grids, 2 for L-R/U-D
int slot_capacity(Config c, int component);

// Inclusive value range of an attribute within a configuration component.
// Count is capped by the component's slot capacity.
std::pair<int, int> attr_range(AttrKind a, Config c, int component);

// Attributes a rule may govern in this configuration (per component).
std::vector<AttrKind> governable_attrs(Config c);

bool is_ordinal(AttrKind a);  // Size, Shade, Count

// One component of a panel: all its entities share ShapeType/Size/Shade, and
// count entities occupy the first `count` slots in row-major order.
struct Component {
  int shape = 0;
  int size = 0;
  int shade = 0;
  int count = 1;
  bool operator==(const Component&) const = default;
};

struct Panel {
  Config config = Config::Center;
  std::vector<Component> components;

  bool slot_occupied(int component, int slot) const {
    return slot < components.at(component).count;
  }
  bool operator==(const Panel&) const = default;
};

Panel make_panel(Config c);  // all components defaulted

int get_attr(const Panel& p, int component, AttrKind a);
void set_attr(Panel& p, int component, AttrKind a, int value);  // validates range

// L-R <-> U-D component swap; rendering the result equals the image transpose
// of rendering the input.
Panel transpose_panel(const Panel& p);

enum class RuleType : uint8_t { Constant = 0, Progression = 1, Arithmetic = 2, DistributeThree = 3 };

const char* rule_type_name(RuleType t);

struct Rule {
  int component = 0;
  AttrKind attr = AttrKind::Size;
  RuleType type = RuleType::Constant;
  int delta = 0;                      // Progression: -2, -1, +1, +2
  int sign = 1;                       // Arithmetic: +1 or -1
  std::array<int, 3> values{};        // DistributeThree value triple
  std::array<int, 3> row_shift{};     // DistributeThree: cyclic shift per row
  bool operator==(const Rule&) const = default;
};

struct RuleSet {
  std::vector<Rule> rules;
  bool operator==(const RuleSet&) const = default;
};

// Full problem: context panels x1..x8 (row-major 3x3 matrix with the last
// cell missing), candidates y1..y8, 0-based answer index, declared rules.
struct RpmProblem {
  Config config = Config::Center;
  std::array<Panel, 8> context;
  std::array<Panel, 8> candidates;
  int answer = 0;
  RuleSet rules;
  uint64_t seed = 0;
  bool operator==(const RpmProblem&) const = default;
};

// JSON round trip with fixed field names: "config", "rules", "panels",
// "candidates", "answer", "seed". answer is 0-based, matching the pack format.
nlohmann::json problem_to_json(const RpmProblem& p);
RpmProblem problem_from_json(const nlohmann::json& j);

}  // namespace rpmlab
