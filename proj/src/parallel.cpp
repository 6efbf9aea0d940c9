#include "lrq/parallel.hpp"

#include <cstdlib>
#include <string>

namespace lrq {

int default_workers() {
  if (const char* env = std::getenv("LRQ_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w > 0) return w;
    } catch (...) {
    }
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace lrq
