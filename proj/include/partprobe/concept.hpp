#pragma once

#include <array>
#include <string_view>

namespace partprobe {

enum class Concept { leg, arm, foot, hand, eye };

inline constexpr std::array<Concept, 5> kAllConcepts{Concept::leg, Concept::arm, Concept::foot,
                                                     Concept::hand, Concept::eye};

std::string_view to_string(Concept c) noexcept;
/// Usage error for unknown names.
Concept parse_concept(std::string_view name);

}  // namespace partprobe
