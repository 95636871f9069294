#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace pdgkit {

/// A static memory object: one per allocation site. `index` is the alloca's
/// instruction ordinal, the global's position, or the function's ordinal.
/// `Io` is the program's output stream, which `print` writes.
struct ObjectRef {
  enum class Kind : uint8_t { Alloca, Global, Function, Io };
  Kind kind = Kind::Alloca;
  uint32_t index = 0;

  static ObjectRef io() { return {Kind::Io, 0}; }
  friend auto operator<=>(const ObjectRef &, const ObjectRef &) = default;
};

std::string objectName(const ObjectRef &o);

/// Data dependence kind between two accesses, in execution order.
enum class DepKind : uint8_t { RAW, WAW, WAR };

std::string_view depKindName(DepKind k);

} // namespace pdgkit
