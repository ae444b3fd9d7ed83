#include "ousym/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace ousym {

int thread_count() {
  if (const char* env = std::getenv("OUSYM_THREADS")) {
    int n = 0;
    const auto res = std::from_chars(env, env + std::strlen(env), n);
    if (res.ec == std::errc() && n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace ousym
