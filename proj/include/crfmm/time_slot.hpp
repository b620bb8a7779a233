#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace crfmm {

using Timestamp = std::int64_t;  // whole seconds; local clock time of day is t mod 86400

enum class TimeSlot : std::uint8_t { MorningPeak = 0, EveningPeak = 1, Normal = 2 };

inline constexpr std::array<TimeSlot, 3> kAllSlots = {TimeSlot::MorningPeak, TimeSlot::EveningPeak,
                                                      TimeSlot::Normal};

inline constexpr std::int64_t kSecondsPerDay = 86400;

constexpr std::size_t slot_index(TimeSlot s) { return static_cast<std::size_t>(s); }

// Morning peak [07:30, 09:30), evening peak [17:30, 19:30), everything else normal.
constexpr TimeSlot slot_of(Timestamp t) {
  std::int64_t tod = t % kSecondsPerDay;
  if (tod < 0) tod += kSecondsPerDay;
  if (tod >= 7 * 3600 + 1800 && tod < 9 * 3600 + 1800) return TimeSlot::MorningPeak;
  if (tod >= 17 * 3600 + 1800 && tod < 19 * 3600 + 1800) return TimeSlot::EveningPeak;
  return TimeSlot::Normal;
}

constexpr std::string_view slot_name(TimeSlot s) {
  switch (s) {
    case TimeSlot::MorningPeak: return "morning";
    case TimeSlot::EveningPeak: return "evening";
    case TimeSlot::Normal: return "normal";
  }
  return "normal";
}

inline std::optional<TimeSlot> parse_slot(std::string_view name) {
  for (TimeSlot s : kAllSlots)
    if (slot_name(s) == name) return s;
  return std::nullopt;
}

}  // namespace crfmm
