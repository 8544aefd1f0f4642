#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peerimport {

// Dense firm index in 0..n-1.
enum class FirmId : std::uint32_t {};

constexpr std::uint32_t to_index(FirmId id) noexcept { return static_cast<std::uint32_t>(id); }
constexpr FirmId firm_id(std::uint32_t i) noexcept { return static_cast<FirmId>(i); }

enum class Origin : std::uint8_t { EU = 0, NonEU = 1, Any = 2 };

// D: suppliers (downstream flow into i), U: customers (upstream flow into i).
enum class Side : std::uint8_t { Downstream, Upstream };

std::string_view origin_name(Origin o);
Origin parse_origin(std::string_view s);

// Every module throws this. `module` names the stage that failed and `hint`
// is a short remediation suggestion shown by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what, std::string hint = {})
      : std::runtime_error(module + ": " + what), module_(std::move(module)), hint_(std::move(hint)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& hint() const noexcept { return hint_; }

 private:
  std::string module_;
  std::string hint_;
};

}  // namespace peerimport
