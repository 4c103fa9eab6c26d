#include <cstdlib>
#include <string_view>

#include "aseg/kernels.hpp"

namespace aseg::kernels {
namespace detail {
const Table* avx2_table();
}

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& select() {
  const char* forced = std::getenv("ASEG_KERNELS");
  if (forced != nullptr && std::string_view(forced) == "scalar") return scalar();
  if (const Table* t = avx2()) return *t;
  return scalar();
}

}  // namespace

const Table* avx2() {
  static const Table* t = cpu_has_avx2_fma() ? detail::avx2_table() : nullptr;
  return t;
}

const Table& active() {
  static const Table& t = select();
  return t;
}

}  // namespace aseg::kernels
