#pragma once

#include <compare>
#include <string>

namespace asdkit {

/// (Machine Type, Machine ID). The type is kept verbatim as it appears in the
/// dataset directory name, e.g. "fan" or "ToyCar".
struct MachineKey {
  std::string machine_type;
  int machine_id = 0;

  auto operator<=>(const MachineKey&) const = default;
  bool operator==(const MachineKey&) const = default;

  /// "<type>_id_<NN>", the stem used in submission and model file names.
  std::string stem() const;
  void validate() const;
};

/// Human-readable name for the six machine types of the public corpora
/// ("slider" -> "Slide rail"); other names are returned unchanged.
std::string display_machine_type(const std::string& machine_type);

}  // namespace asdkit
