// command.hpp

#ifndef ROBOFP_COMMAND_HPP
#define ROBOFP_COMMAND_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace robofp {

/// high-level robot command families whose traffic signatures are detected
enum class CommandKind { CartesianMove = 0, GripperPosition = 1, GripperSpeed = 2 };

inline constexpr std::size_t kNumCommandKinds = 3;
inline constexpr std::array<CommandKind, kNumCommandKinds> kAllCommandKinds = {
    CommandKind::CartesianMove, CommandKind::GripperPosition, CommandKind::GripperSpeed};

inline std::size_t index_of(CommandKind kind) { return static_cast<std::size_t>(kind); }

inline std::string_view to_string(CommandKind kind) {
    constexpr std::array<std::string_view, kNumCommandKinds> names = {"CartesianMove", "GripperPosition",
                                                                      "GripperSpeed"};
    return names[index_of(kind)];
}

/// snake_case prefix used in feature names
inline std::string_view feature_prefix(CommandKind kind) {
    constexpr std::array<std::string_view, kNumCommandKinds> names = {"cartesian", "gripper_position",
                                                                      "gripper_speed"};
    return names[index_of(kind)];
}

inline std::optional<CommandKind> parse_command_kind(std::string_view name) {
    for (auto kind : kAllCommandKinds) {
        if (to_string(kind) == name || feature_prefix(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

} // namespace robofp

#endif // ROBOFP_COMMAND_HPP
