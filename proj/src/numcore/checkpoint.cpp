#include "numcore/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "common/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace spwm::numcore {

namespace {
constexpr char kMagic[4] = {'S', 'P', 'W', 'M'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  SPWM_IO_CHECK(is.good(), "truncated checkpoint '", path, "'");
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  SPWM_IO_CHECK(os.good(), "cannot write checkpoint '", path, "'");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  for (const auto& p : params.items()) {
    write_u32(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(os, static_cast<uint32_t>(p.value.ndim()));
    for (int d : p.value.shape()) write_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(sizeof(double) * p.value.size()));
  }
  os.flush();
  SPWM_IO_CHECK(os.good(), "write failure for checkpoint '", path, "'");
}

void load_checkpoint(const std::string& path, ParamSet& params) {
  std::ifstream is(path, std::ios::binary);
  SPWM_IO_CHECK(is.good(), "cannot open checkpoint '", path, "'");
  char magic[4];
  is.read(magic, 4);
  SPWM_IO_CHECK(is.good() && std::memcmp(magic, kMagic, 4) == 0,
                "'", path, "' is not a SPWM checkpoint");
  const uint32_t version = read_u32(is, path);
  SPWM_IO_CHECK(version == kVersion, "unsupported checkpoint version ", version,
                " in '", path, "'");
  std::set<std::string> seen;
  for (;;) {
    uint32_t name_len = 0;
    is.read(reinterpret_cast<char*>(&name_len), 4);
    if (is.eof()) break;
    SPWM_IO_CHECK(is.good(), "truncated checkpoint '", path, "'");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t ndim = read_u32(is, path);
    Shape shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(read_u32(is, path));
    Param* p = params.find(name);
    SPWM_CHECK(p != nullptr, "checkpoint '", path, "' has unknown tensor '", name, "'");
    SPWM_CHECK(p->value.shape() == shape, "checkpoint tensor '", name, "' shape ",
               shape_str(shape), " does not match expected ",
               shape_str(p->value.shape()));
    auto& vals = p->value.mutable_values();
    is.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(sizeof(double) * vals.size()));
    SPWM_IO_CHECK(is.good(), "truncated payload for tensor '", name, "' in '", path, "'");
    seen.insert(name);
  }
  for (const auto& p : params.items())
    SPWM_CHECK(seen.count(p.name), "checkpoint '", path, "' is missing tensor '",
               p.name, "'");
}

}  // namespace spwm::numcore
