#include "kktrace/util.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace kktrace {

int worker_count() {
  static std::atomic<int> cached{-1};
  int c = cached.load();
  if (c > 0) return c;
  int n = 1;
  if (const char* env = std::getenv("KKTRACE_WORKERS")) {
    n = std::max(1, std::atoi(env));
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0) n = std::min<int>(n, int(hw) * 2);
  }
  cached.store(n);
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  int spawn = std::min<std::size_t>(workers, n);
  pool.reserve(spawn);
  for (int t = 0; t < spawn; ++t) pool.emplace_back(run);
  for (auto& th : pool) th.join();
}

std::vector<complexd> dft(const std::vector<complexd>& x,
                          const std::vector<double>& angles) {
  std::vector<complexd> out(angles.size());
  for (std::size_t j = 0; j < angles.size(); ++j) {
    complexd acc(0, 0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      double phase = -angles[j] * double(k);
      acc += x[k] * complexd(std::cos(phase), std::sin(phase));
    }
    out[j] = acc;
  }
  return out;
}

}  // namespace kktrace
