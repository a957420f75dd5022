#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace spwm {

// Contract violations (bad shapes, bad arguments, broken invariants).
// CLI maps these to exit code 1.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures. CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void concat_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  concat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string strcat_msg(const Args&... args) {
  std::ostringstream os;
  detail::concat_into(os, args...);
  return os.str();
}

}  // namespace spwm

#define SPWM_CHECK(cond, ...)                                      \
  do {                                                             \
    if (!(cond)) throw ::spwm::ContractError(::spwm::strcat_msg(__VA_ARGS__)); \
  } while (0)

#define SPWM_IO_CHECK(cond, ...)                                   \
  do {                                                             \
    if (!(cond)) throw ::spwm::IoError(::spwm::strcat_msg(__VA_ARGS__)); \
  } while (0)
